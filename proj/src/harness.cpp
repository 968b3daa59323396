#include "ceunet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <thread>

#include "ceunet/error.hpp"
#include "ceunet/rng.hpp"
#include "ceunet/simd/kernels.hpp"
#include "ceunet/unet.hpp"

namespace ceunet {

using io::Json;

ReducerMethod parse_reducer(std::string_view s) {
  if (s == "none") return ReducerMethod::None;
  if (s == "pca") return ReducerMethod::Pca;
  if (s == "cae2d") return ReducerMethod::Cae2d;
  if (s == "cae3d") return ReducerMethod::Cae3d;
  fail(ErrorKind::Config, "unknown reducer: " + std::string(s));
}

std::string_view to_string(ReducerMethod r) {
  switch (r) {
    case ReducerMethod::None: return "none";
    case ReducerMethod::Pca: return "pca";
    case ReducerMethod::Cae2d: return "cae2d";
    case ReducerMethod::Cae3d: return "cae3d";
  }
  return "?";
}

ModelKind parse_model(std::string_view s) {
  if (s == "unet") return ModelKind::UNet;
  if (s == "ceunet") return ModelKind::CeuNet;
  fail(ErrorKind::Config, "unknown model: " + std::string(s));
}

std::string_view to_string(ModelKind m) { return m == ModelKind::UNet ? "unet" : "ceunet"; }

Reducer Reducer::fit(ReducerMethod method, std::span<const float> samples, std::size_t dim, std::size_t out_dim,
                     std::uint64_t seed, int epochs) {
  Reducer r;
  r.method_ = method;
  r.input_dim_ = dim;
  switch (method) {
    case ReducerMethod::None:
      r.output_dim_ = dim;
      break;
    case ReducerMethod::Pca:
      r.pca_ = pca_fit(samples, dim, out_dim);
      r.output_dim_ = out_dim;
      break;
    case ReducerMethod::Cae2d:
    case ReducerMethod::Cae3d: {
      CaeConfig c;
      c.variant = method == ReducerMethod::Cae2d ? CaeVariant::Cae2d : CaeVariant::Cae3d;
      c.input_dim = dim;
      c.latent_dim = out_dim;
      c.epochs = epochs;
      c.seed = derive_seed(seed, Stream::Reducer);
      r.cae_ = std::make_shared<CaeModel>(cae_fit(samples, c));
      r.output_dim_ = r.cae_->latent_dim();
      break;
    }
  }
  return r;
}

std::vector<float> Reducer::transform(std::span<const float> samples) const {
  if (input_dim_ == 0 || samples.size() % input_dim_ != 0) {
    fail(ErrorKind::Dimension, "reducer input has the wrong width");
  }
  switch (method_) {
    case ReducerMethod::None: return {samples.begin(), samples.end()};
    case ReducerMethod::Pca: return pca_transform(*pca_, samples);
    default: return cae_->encode(samples);
  }
}

void Reducer::save(const std::filesystem::path& path) {
  if (pca_) {
    save_pca(path, *pca_);
  } else if (cae_) {
    save_cae(path, *cae_);
  } else {
    fail(ErrorKind::Config, "the identity reducer has nothing to save");
  }
}

// ---------------------------------------------------------------------------

int ExperimentConfig::resolved_epochs() const {
  if (epochs) return *epochs;
  return model == ModelKind::UNet ? 150 : 200;
}

std::size_t ExperimentConfig::resolved_dim() const {
  if (reduced_dim) return reduced_dim;
  return reducer == ReducerMethod::Cae2d ? 32 : 30;
}

void ExperimentConfig::validate() const {
  auto reject = [&](const std::string& why) { fail(ErrorKind::Config, name + ": " + why); };
  if (patch_n < 1) reject("patch n must be >= 1");
  if (patch && *patch != PatchMode::Cpc && pad == PadPolicy::None) {
    reject("pad policy 'none' applies only to cpc patches");
  }
  if (k < 1) reject("k must be >= 1");
  if (model == ModelKind::UNet && !omega.empty()) reject("omega is an ensemble setting");
  if (!omega.empty()) {
    if (omega.size() != k) reject("omega needs exactly k entries");
    double total = 0.0;
    for (double w : omega) {
      if (!(w > 0.0)) reject("omega entries must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) reject("omega must sum to 1");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) reject("test_fraction must lie in (0, 1)");
  if (trials < 1) reject("trials must be >= 1");
  if (epochs && *epochs < 0) reject("epochs must be >= 0");
  if (reducer_epochs < 0) reject("reducer epochs must be >= 0");
  if (!(learning_rate > 0.0)) reject("learning_rate must be positive");
}

namespace {

std::string_view patch_name(const std::optional<PatchMode>& p) { return p ? to_string(*p) : "none"; }

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) fail(ErrorKind::Config, std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(ErrorKind::Config, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

}  // namespace

Json ExperimentConfig::to_json() const {
  Json j;
  j["name"] = name;
  j["study"] = study;
  j["dataset"] = dataset.string();
  j["reducer"] = {{"method", std::string(to_string(reducer))}, {"dim", resolved_dim()}, {"epochs", reducer_epochs}};
  j["patch"] = {{"mode", std::string(patch_name(patch))},
                {"n", patch_n},
                {"pad", pad == PadPolicy::Zero ? "zero" : "none"}};
  j["model"] = std::string(to_string(model));
  j["ensemble"] = {{"k", k},
                   {"method", std::string(to_string(cluster))},
                   {"weights", std::string(to_string(weights))},
                   {"omega", omega},
                   {"min_cluster_size", min_cluster_size}};
  j["split"] = {{"test_fraction", test_fraction}, {"trials", trials}};
  j["seed"] = seed;
  j["epochs"] = resolved_epochs();
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["parallel_trials"] = parallel_trials;
  j["checkpoint_dir"] = checkpoint_dir.string();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig c;
  try {
    check_keys(j,
               {"name", "study", "dataset", "reducer", "patch", "model", "ensemble", "split", "seed", "epochs",
                "learning_rate", "batch_size", "parallel_trials", "checkpoint_dir"},
               "config");
    c.name = j.value("name", c.name);
    c.study = j.value("study", c.study);
    c.dataset = j.value("dataset", std::string{});
    if (j.contains("reducer")) {
      const Json& r = j["reducer"];
      check_keys(r, {"method", "dim", "epochs"}, "reducer");
      c.reducer = parse_reducer(r.value("method", "pca"));
      c.reduced_dim = r.value("dim", std::size_t{0});
      c.reducer_epochs = r.value("epochs", 0);
    }
    if (j.contains("patch")) {
      const Json& p = j["patch"];
      check_keys(p, {"mode", "n", "pad"}, "patch");
      const std::string mode = p.value("mode", "none");
      if (mode != "none") c.patch = parse_patch_mode(mode);
      c.patch_n = p.value("n", c.patch_n);
      const std::string pad = p.value("pad", "zero");
      if (pad != "zero" && pad != "none") fail(ErrorKind::Config, "unknown pad policy: " + pad);
      c.pad = pad == "zero" ? PadPolicy::Zero : PadPolicy::None;
    }
    if (j.contains("model")) c.model = parse_model(j["model"].get<std::string>());
    if (j.contains("ensemble")) {
      const Json& e = j["ensemble"];
      check_keys(e, {"k", "method", "weights", "omega", "min_cluster_size"}, "ensemble");
      c.k = e.value("k", c.k);
      c.cluster = parse_cluster_method(e.value("method", "kmeans"));
      c.weights = parse_weight_scheme(e.value("weights", "constant"));
      c.omega = e.value("omega", std::vector<double>{});
      c.min_cluster_size = e.value("min_cluster_size", c.min_cluster_size);
    }
    if (j.contains("split")) {
      const Json& s = j["split"];
      check_keys(s, {"test_fraction", "trials"}, "split");
      c.test_fraction = s.value("test_fraction", c.test_fraction);
      c.trials = s.value("trials", c.trials);
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.parallel_trials = j.value("parallel_trials", c.parallel_trials);
    c.checkpoint_dir = j.value("checkpoint_dir", std::string{});
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return ExperimentConfig::from_json(io::read_json(path));
}

// ---------------------------------------------------------------------------

std::string hardware_note() {
  std::string cpu = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads, kernels: " +
         std::string(simd::to_string(simd::active_isa()));
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct TrialOutcome {
  std::vector<LedgerRow> rows;
  TrialTiming timing;
  std::vector<double> omega;
  std::string stage;
  std::string error;
  bool ok = true;
};

struct Samples {
  std::optional<LabeledPixelSet> pixels;
  std::optional<PatchDataset> patches;
  SampleView view() const { return pixels ? SampleView::of(*pixels) : SampleView::of(*patches); }
};

std::string safe_name(std::string s) {
  for (char& ch : s) {
    if (ch == '/' || ch == ' ') ch = '_';
  }
  return s;
}

double mean_epoch_seconds(const std::vector<std::vector<double>>& per_net) {
  std::vector<double> total;
  for (const auto& v : per_net) {
    if (total.size() < v.size()) total.resize(v.size(), 0.0);
    for (std::size_t e = 0; e < v.size(); ++e) total[e] += v[e];
  }
  if (total.empty()) return 0.0;
  const std::size_t first = total.size() > 1 ? 1 : 0;
  double s = 0.0;
  for (std::size_t e = first; e < total.size(); ++e) s += total[e];
  return s / static_cast<double>(total.size() - first);
}

TrialOutcome run_one(const ExperimentConfig& cfg, const HsiCube& cube, const LabeledPixelSet& pixels, int t) {
  TrialOutcome out;
  try {
    const std::uint64_t ts = trial_seed(cfg.seed, t);
    out.stage = "split";
    const SplitSpec spec{cfg.test_fraction, cfg.trials, cfg.seed};
    const SplitIndices idx = split_indices(pixels.size(), spec, t);
    const LabeledPixelSet train_px = pixels.subset(idx.train);
    const LabeledPixelSet test_px = pixels.subset(idx.test);

    out.stage = "reduction";
    auto t0 = Clock::now();
    const Reducer reducer =
        Reducer::fit(cfg.reducer, train_px.samples, pixels.dim, cfg.resolved_dim(), ts, cfg.reducer_epochs);
    Samples train, test;
    const bool cpc = cfg.patch == PatchMode::Cpc;
    HsiCube reduced;
    if (cpc) {
      reduced = HsiCube(cube.name, cube.height, cube.width, reducer.output_dim());
      reduced.data = reducer.transform(cube.data);
    } else {
      auto reduce = [&](const LabeledPixelSet& s) {
        LabeledPixelSet r = s;
        r.dim = reducer.output_dim();
        r.samples = reducer.transform(s.samples);
        return r;
      };
      train.pixels = reduce(train_px);
      test.pixels = reduce(test_px);
    }
    out.timing.reduction = since(t0);

    if (cpc) {
      out.stage = "patching";
      t0 = Clock::now();
      const PatchConfig pc{cfg.patch_n, PatchMode::Cpc, cfg.pad};
      train.patches = extract_cpc_at(reduced, train_px.coords, train_px.labels, pixels.num_classes, pc);
      test.patches = extract_cpc_at(reduced, test_px.coords, test_px.labels, pixels.num_classes, pc);
      out.timing.patching = since(t0);
    }

    const SampleView train_v = train.view();
    const SampleView test_v = test.view();
    const int epochs = cfg.resolved_epochs();
    EnsembleConfig ec;
    ec.k = cfg.model == ModelKind::UNet ? 1 : cfg.k;
    ec.method = cfg.cluster;
    ec.weight_scheme = cfg.weights;
    ec.omega = cfg.omega;
    ec.epochs_per_subnet = epochs;
    ec.learning_rate = cfg.learning_rate;
    ec.batch_size = cfg.batch_size;
    ec.min_cluster_size = cfg.min_cluster_size;

    if (epochs == 0) {
      if (cfg.model == ModelKind::CeuNet) {
        out.stage = "clustering";
        t0 = Clock::now();
        ClusterOptions opts;
        opts.min_cluster_size = std::max<std::size_t>(cfg.min_cluster_size, 1);
        const std::vector<float> f = routing_features(train_v);
        const ClusterModel cm = fit_cluster(f, train_v.dim, cfg.cluster, cfg.k, derive_seed(ts, Stream::Cluster), opts);
        out.timing.clustering = since(t0);
        out.omega = make_weights(cfg.weights, cluster_sizes(assign(cm, f), cfg.k), ts);
      }
      return out;
    }

    if (cfg.model == ModelKind::UNet) {
      out.stage = "training";
      UNetSpec spec;
      spec.patch = train_v.n;
      spec.in_features = train_v.dim;
      spec.num_classes = train_v.num_classes;
      const std::uint64_t s = subnet_seed(ts, 0);
      UNet<float> net = build_unet(spec, s);
      TrainConfig tc;
      tc.epochs = epochs;
      tc.learning_rate = cfg.learning_rate;
      tc.batch_size = cfg.batch_size;
      tc.seed = s;
      t0 = Clock::now();
      train_unet(net, train_v, tc);
      out.timing.training = since(t0);
      out.timing.per_epoch = mean_epoch_seconds({net.epoch_seconds});
      out.timing.epochs = epochs;
      out.omega = {1.0};

      out.stage = "prediction";
      t0 = Clock::now();
      const Prediction p = predict(net, test_v);
      out.timing.prediction = since(t0);
      LedgerRow row;
      row.trial = t;
      row.train_size = train_v.size();
      row.test_size = test_v.size();
      row.test_total = test_v.size();
      for (std::size_t i = 0; i < p.labels.size(); ++i) row.correct += p.labels[i] == test_v.labels[i] ? 1 : 0;
      row.contribution = static_cast<double>(row.correct) / static_cast<double>(row.test_total);
      row.train_seconds = out.timing.training;
      out.rows.push_back(row);
      if (!cfg.checkpoint_dir.empty()) {
        save_unet(cfg.checkpoint_dir / (safe_name(cfg.name) + "-trial" + std::to_string(t) + ".ckpt"), net,
                  cfg.to_json().dump());
      }
      return out;
    }

    out.stage = "training";
    t0 = Clock::now();
    EnsembleModel model = train_ensemble(train_v, ec, ts);
    out.timing.clustering = model.cluster_seconds;
    out.timing.training = since(t0) - model.cluster_seconds;
    std::vector<std::vector<double>> epoch_times;
    for (const auto& net : model.subnets) epoch_times.push_back(net.epoch_seconds);
    out.timing.per_epoch = mean_epoch_seconds(epoch_times);
    out.timing.epochs = epochs;
    out.omega = model.omega;

    out.stage = "prediction";
    t0 = Clock::now();
    const EnsembleEvaluation ev = predict_ensemble(model, test_v);
    out.timing.prediction = since(t0);
    for (std::size_t j = 0; j < model.subnets.size(); ++j) {
      LedgerRow r;
      r.trial = t;
      r.cluster = static_cast<int>(j);
      r.train_size = model.train_sizes[j];
      r.test_size = ev.clusters[j].test_size;
      r.correct = ev.clusters[j].correct;
      r.test_total = ev.total;
      r.contribution = ev.clusters[j].contribution;
      r.train_seconds = model.train_seconds[j];
      out.rows.push_back(r);
      if (!cfg.checkpoint_dir.empty()) {
        save_unet(cfg.checkpoint_dir /
                      (safe_name(cfg.name) + "-trial" + std::to_string(t) + "-cluster" + std::to_string(j) + ".ckpt"),
                  model.subnets[j], cfg.to_json().dump());
      }
    }
  } catch (const Error& e) {
    out.ok = false;
    out.error = e.what();
    if (e.kind() == ErrorKind::SmallCluster || e.kind() == ErrorKind::Cluster) out.stage = "clustering";
  }
  return out;
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg) {
  Dataset data;
  try {
    if (cfg.dataset.empty()) fail(ErrorKind::Config, cfg.name + ": no dataset path");
    data = load_dataset(cfg.dataset);
  } catch (const Error& e) {
    Report r;
    r.config = cfg;
    r.ok = false;
    r.failed_stage = "load";
    r.failure = e.what();
    r.hardware = hardware_note();
    return r;
  }
  return run_experiment(cfg, data);
}

Report run_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  Report r;
  r.config = cfg;
  r.dataset = data.cube.name;
  r.hardware = hardware_note();
  r.timing_comparable = !cfg.parallel_trials;
  std::string stage = "config";
  try {
    cfg.validate();
    r.trained = cfg.resolved_epochs() > 0;
    stage = "prepare";
    Dataset down;
    const Dataset* src = &data;
    if (cfg.patch && *cfg.patch != PatchMode::Cpc) {
      const PatchConfig pc{cfg.patch_n, *cfg.patch, cfg.pad};
      down = *cfg.patch == PatchMode::Exclusive ? downsample_exclusive(data.cube, data.truth, pc)
                                                : downsample_majority(data.cube, data.truth, pc);
      src = &down;
    }
    const LabeledPixelSet pixels = remove_background(src->cube, src->truth);
    if (cfg.reducer != ReducerMethod::None && cfg.resolved_dim() > pixels.dim) {
      fail(ErrorKind::Dimension, "reduced dimension exceeds the band count");
    }

    std::vector<TrialOutcome> outcomes;
    if (cfg.parallel_trials) {
      std::vector<std::future<TrialOutcome>> jobs;
      for (int t = 0; t < cfg.trials; ++t) {
        jobs.push_back(std::async(std::launch::async, run_one, std::cref(cfg), std::cref(src->cube),
                                  std::cref(pixels), t));
      }
      for (auto& j : jobs) outcomes.push_back(j.get());
    } else {
      for (int t = 0; t < cfg.trials; ++t) {
        outcomes.push_back(run_one(cfg, src->cube, pixels, t));
        if (!outcomes.back().ok) break;
      }
    }
    for (std::size_t t = 0; t < outcomes.size(); ++t) {
      const TrialOutcome& o = outcomes[t];
      if (!o.ok) {
        r.ok = false;
        r.failed_stage = o.stage;
        r.failure = "trial " + std::to_string(t) + ": " + o.error;
        r.ledger = {};
        r.timings.clear();
        r.omega.clear();
        return r;
      }
      r.ledger.rows.insert(r.ledger.rows.end(), o.rows.begin(), o.rows.end());
      r.timings.push_back(o.timing);
      r.omega.push_back(o.omega);
    }
    r.ledger.finalize();
  } catch (const Error& e) {
    r.ok = false;
    r.failed_stage = stage;
    r.failure = e.what();
  }
  return r;
}

std::vector<Report> grid_cluster_tuning(const Dataset& data, const ExperimentConfig& base,
                                        std::span<const ClusterMethod> methods, std::size_t k_min,
                                        std::size_t k_max) {
  std::vector<Report> out;
  for (ClusterMethod m : methods) {
    for (std::size_t k = k_min; k <= k_max; ++k) {
      ExperimentConfig c = base;
      c.study = "grid";
      c.model = ModelKind::CeuNet;
      c.cluster = m;
      c.k = k;
      c.omega.clear();
      c.name = "grid/" + std::string(to_string(m)) + "/k" + std::to_string(k);
      out.push_back(run_experiment(c, data));
    }
  }
  return out;
}

std::optional<std::size_t> best_report(std::span<const Report> reports) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const Report& r = reports[i];
    if (!r.ok || !r.trained || r.ledger.trial_accuracy.empty()) continue;
    if (!best || r.ledger.mean > reports[*best].ledger.mean) best = i;
  }
  return best;
}

std::vector<Report> weight_study(const Dataset& data, const ExperimentConfig& base,
                                 std::span<const WeightScheme> schemes) {
  std::vector<Report> out;
  for (WeightScheme s : schemes) {
    ExperimentConfig c = base;
    c.study = "weights";
    c.model = ModelKind::CeuNet;
    c.weights = s;
    c.omega.clear();
    c.name = "weights/" + std::string(to_string(s));
    out.push_back(run_experiment(c, data));
  }
  return out;
}

std::vector<Report> timing_comparison(const Dataset& data, const ExperimentConfig& base, std::size_t patch_n) {
  std::vector<Report> out;
  for (ModelKind m : {ModelKind::UNet, ModelKind::CeuNet}) {
    for (bool patched : {false, true}) {
      ExperimentConfig c = base;
      c.study = "timing";
      c.model = m;
      c.reducer = ReducerMethod::Pca;
      c.reduced_dim = 30;
      c.omega.clear();
      c.patch = patched ? std::optional<PatchMode>(PatchMode::Cpc) : std::nullopt;
      c.patch_n = patch_n;
      c.parallel_trials = false;
      c.name = "timing/" + std::string(to_string(m)) + "/" + (patched ? "cpc" : "none");
      out.push_back(run_experiment(c, data));
    }
  }
  return out;
}

}  // namespace ceunet
