#include "ceunet/ensemble.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "ceunet/error.hpp"
#include "ceunet/rng.hpp"

namespace ceunet {

WeightScheme parse_weight_scheme(std::string_view s) {
  if (s == "constant") return WeightScheme::Constant;
  if (s == "abundance") return WeightScheme::Abundance;
  if (s == "random") return WeightScheme::Random;
  fail(ErrorKind::Config, "unknown weight scheme: " + std::string(s));
}

std::string_view to_string(WeightScheme w) {
  switch (w) {
    case WeightScheme::Constant: return "constant";
    case WeightScheme::Abundance: return "abundance";
    case WeightScheme::Random: return "random";
  }
  return "?";
}

std::vector<double> make_weights(WeightScheme scheme, std::span<const std::size_t> sizes, std::uint64_t seed) {
  const std::size_t k = sizes.size();
  if (k == 0) fail(ErrorKind::Weight, "no clusters to weight");
  for (std::size_t s : sizes) {
    if (s == 0) fail(ErrorKind::Weight, "cannot weight an empty cluster");
  }
  std::vector<double> w(k);
  switch (scheme) {
    case WeightScheme::Constant:
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k));
      break;
    case WeightScheme::Abundance: {
      const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
      for (std::size_t j = 0; j < k; ++j) w[j] = static_cast<double>(sizes[j]) / total;
      break;
    }
    case WeightScheme::Random: {
      Rng rng(derive_seed(seed, Stream::Weights));
      double total = 0.0;
      for (auto& v : w) {
        // (0, 1]
        v = 1.0 - static_cast<double>(rng() >> 11) * 0x1.0p-53;
        total += v;
      }
      for (auto& v : w) v /= total;
      break;
    }
  }
  return w;
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  return derive_seed(seed, Stream::Trial, static_cast<std::uint64_t>(trial));
}

std::uint64_t subnet_seed(std::uint64_t seed, std::size_t cluster) {
  return derive_seed(seed, Stream::Network, 1000 + cluster);
}

std::vector<float> routing_features(const SampleView& data) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim;
  const std::size_t centre = (data.n / 2) * data.n + data.n / 2;
  std::vector<float> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const float* src = data.features.data() + i * data.stride() + centre * d;
    std::copy_n(src, d, out.data() + i * d);
  }
  return out;
}

namespace {

struct OwnedView {
  std::vector<float> features;
  std::vector<int> labels;
  SampleView view(const SampleView& like) const {
    return {like.n, like.dim, like.num_classes, features, labels};
  }
};

OwnedView select(const SampleView& data, std::span<const std::size_t> idx) {
  OwnedView out;
  const std::size_t stride = data.stride();
  out.features.resize(idx.size() * stride);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(data.features.data() + idx[i] * stride, stride, out.features.data() + i * stride);
  }
  if (!data.labels.empty()) {
    out.labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out.labels[i] = data.labels[idx[i]];
  }
  return out;
}

std::vector<std::vector<std::size_t>> members_of(std::span<const int> ids, std::size_t k) {
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < ids.size(); ++i) members[static_cast<std::size_t>(ids[i])].push_back(i);
  return members;
}

}  // namespace

EnsembleModel train_ensemble(const SampleView& train, const EnsembleConfig& cfg, std::uint64_t seed) {
  if (cfg.k < 1) fail(ErrorKind::Config, "ensemble needs k >= 1");
  if (train.size() == 0) fail(ErrorKind::EmptyDataset, "no training samples");
  EnsembleModel model;
  model.config = cfg;

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<float> features = routing_features(train);
  ClusterOptions opts = cfg.cluster;
  opts.min_cluster_size = std::max<std::size_t>(cfg.min_cluster_size, 1);
  model.cluster = fit_cluster(features, train.dim, cfg.method, cfg.k, derive_seed(seed, Stream::Cluster), opts);
  const std::vector<int> ids = assign(model.cluster, features);
  model.cluster_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  model.train_sizes = cluster_sizes(ids, cfg.k);

  if (!cfg.omega.empty()) {
    if (cfg.omega.size() != cfg.k) fail(ErrorKind::Weight, "omega has the wrong length");
    double total = 0.0;
    for (double w : cfg.omega) {
      if (!(w > 0.0)) fail(ErrorKind::Weight, "omega entries must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::Weight, "omega must sum to 1");
    model.omega = cfg.omega;
  } else {
    model.omega = make_weights(cfg.weight_scheme, model.train_sizes, seed);
  }

  UNetSpec spec = cfg.network;
  spec.patch = train.n;
  spec.in_features = train.dim;
  spec.num_classes = train.num_classes;

  const auto members = members_of(ids, cfg.k);
  model.subnets.reserve(cfg.k);
  for (std::size_t j = 0; j < cfg.k; ++j) {
    const OwnedView part = select(train, members[j]);
    const std::uint64_t s = subnet_seed(seed, j);
    UNet<float> net = build_unet(spec, s);
    TrainConfig tc;
    tc.epochs = cfg.epochs_per_subnet;
    tc.learning_rate = cfg.learning_rate;
    tc.loss_weight = model.omega[j];
    tc.batch_size = cfg.batch_size;
    tc.seed = s;
    const auto ts = std::chrono::steady_clock::now();
    try {
      train_unet(net, part.view(train), tc);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Divergence) {
        fail(ErrorKind::Divergence, "cluster " + std::to_string(j) + ": " + e.what());
      }
      throw;
    }
    model.train_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count());
    model.subnets.push_back(std::move(net));
  }
  return model;
}

double EnsembleEvaluation::contribution_sum() const {
  std::size_t numer = 0;
  for (const auto& c : clusters) numer += c.correct;
  return total ? static_cast<double>(numer) / static_cast<double>(total) : 0.0;
}

EnsembleEvaluation predict_ensemble(const EnsembleModel& model, const SampleView& test) {
  EnsembleEvaluation ev;
  const std::size_t n = test.size();
  ev.total = n;
  ev.routes = assign(model.cluster, routing_features(test));
  ev.labels.assign(n, 0);
  ev.clusters.resize(model.subnets.size());
  const bool scored = !test.labels.empty();
  const auto members = members_of(ev.routes, model.subnets.size());
  for (std::size_t j = 0; j < model.subnets.size(); ++j) {
    auto& outcome = ev.clusters[j];
    outcome.test_size = members[j].size();
    if (members[j].empty()) continue;
    const OwnedView part = select(test, members[j]);
    const Prediction p = predict(model.subnets[j], part.view(test));
    for (std::size_t i = 0; i < members[j].size(); ++i) {
      ev.labels[members[j][i]] = p.labels[i];
      if (scored && p.labels[i] == part.labels[i]) ++outcome.correct;
    }
  }
  if (scored && n > 0) {
    for (auto& c : ev.clusters) {
      c.contribution = static_cast<double>(c.correct) / static_cast<double>(n);
      ev.correct += c.correct;
    }
    ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(n);
  }
  return ev;
}

void TrialLedger::finalize() {
  trial_accuracy.clear();
  int trials = 0;
  for (const auto& r : rows) trials = std::max(trials, r.trial + 1);
  std::vector<std::size_t> correct(static_cast<std::size_t>(trials), 0), total(static_cast<std::size_t>(trials), 0);
  for (const auto& r : rows) {
    correct[static_cast<std::size_t>(r.trial)] += r.correct;
    total[static_cast<std::size_t>(r.trial)] = r.test_total;
  }
  for (int t = 0; t < trials; ++t) {
    const auto i = static_cast<std::size_t>(t);
    trial_accuracy.push_back(total[i] ? static_cast<double>(correct[i]) / static_cast<double>(total[i]) : 0.0);
  }
  mean = 0.0;
  stddev = 0.0;
  if (trial_accuracy.empty()) return;
  for (double a : trial_accuracy) mean += a;
  mean /= static_cast<double>(trial_accuracy.size());
  if (trial_accuracy.size() > 1) {
    double ss = 0.0;
    for (double a : trial_accuracy) ss += (a - mean) * (a - mean);
    stddev = std::sqrt(ss / static_cast<double>(trial_accuracy.size() - 1));
  }
}

std::vector<LedgerRow> run_trial(const SampleView& train, const SampleView& test, const EnsembleConfig& cfg,
                                 std::uint64_t seed, int trial_index) {
  const EnsembleModel model = train_ensemble(train, cfg, seed);
  const EnsembleEvaluation ev = predict_ensemble(model, test);
  std::vector<LedgerRow> rows;
  for (std::size_t j = 0; j < model.subnets.size(); ++j) {
    LedgerRow r;
    r.trial = trial_index;
    r.cluster = static_cast<int>(j);
    r.train_size = model.train_sizes[j];
    r.test_size = ev.clusters[j].test_size;
    r.correct = ev.clusters[j].correct;
    r.test_total = ev.total;
    r.contribution = ev.clusters[j].contribution;
    r.train_seconds = model.train_seconds[j];
    rows.push_back(r);
  }
  return rows;
}

TrialLedger run_trials(const LabeledPixelSet& ds, const EnsembleConfig& cfg, const SplitSpec& split) {
  if (split.trials < 1) fail(ErrorKind::Config, "need at least one trial");
  TrialLedger ledger;
  for (int t = 0; t < split.trials; ++t) {
    try {
      const auto [train, test] = random_split(ds, split, t);
      auto rows = run_trial(SampleView::of(train), SampleView::of(test), cfg, trial_seed(split.seed, t), t);
      ledger.rows.insert(ledger.rows.end(), rows.begin(), rows.end());
    } catch (const SmallClusterError&) {
      throw;
    } catch (const Error& e) {
      fail(e.kind(), "trial " + std::to_string(t) + ": " + e.what());
    }
  }
  ledger.finalize();
  return ledger;
}

}  // namespace ceunet
