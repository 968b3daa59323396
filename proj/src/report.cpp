#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "ceunet/error.hpp"
#include "ceunet/harness.hpp"

namespace ceunet {

using io::Json;

double Report::min_accuracy() const {
  if (ledger.trial_accuracy.empty()) return 0.0;
  return *std::min_element(ledger.trial_accuracy.begin(), ledger.trial_accuracy.end());
}

double Report::max_accuracy() const {
  if (ledger.trial_accuracy.empty()) return 0.0;
  return *std::max_element(ledger.trial_accuracy.begin(), ledger.trial_accuracy.end());
}

TrialTiming Report::mean_timing() const {
  TrialTiming m;
  if (timings.empty()) return m;
  for (const auto& t : timings) {
    m.reduction += t.reduction;
    m.patching += t.patching;
    m.clustering += t.clustering;
    m.training += t.training;
    m.prediction += t.prediction;
    m.per_epoch += t.per_epoch;
    m.epochs = t.epochs;
  }
  const double n = static_cast<double>(timings.size());
  m.reduction /= n;
  m.patching /= n;
  m.clustering /= n;
  m.training /= n;
  m.prediction /= n;
  m.per_epoch /= n;
  return m;
}

namespace {

Json timing_json(const TrialTiming& t) {
  return {{"reduction", t.reduction}, {"patching", t.patching},     {"clustering", t.clustering},
          {"training", t.training},   {"prediction", t.prediction}, {"per_epoch", t.per_epoch},
          {"epochs", t.epochs}};
}

TrialTiming timing_from(const Json& j) {
  TrialTiming t;
  t.reduction = j.at("reduction").get<double>();
  t.patching = j.at("patching").get<double>();
  t.clustering = j.at("clustering").get<double>();
  t.training = j.at("training").get<double>();
  t.prediction = j.at("prediction").get<double>();
  t.per_epoch = j.at("per_epoch").get<double>();
  t.epochs = j.at("epochs").get<int>();
  return t;
}

}  // namespace

Json Report::to_json() const {
  Json rows = Json::array();
  for (const auto& r : ledger.rows) {
    rows.push_back({{"trial", r.trial},
                    {"cluster", r.cluster},
                    {"train_size", r.train_size},
                    {"test_size", r.test_size},
                    {"correct", r.correct},
                    {"test_total", r.test_total},
                    {"contribution", r.contribution},
                    {"train_seconds", r.train_seconds}});
  }
  Json tj = Json::array();
  for (const auto& t : timings) tj.push_back(timing_json(t));
  return {{"config", config.to_json()},
          {"dataset", dataset},
          {"ok", ok},
          {"failed_stage", failed_stage},
          {"failure", failure},
          {"trained", trained},
          {"ledger", rows},
          {"timings", tj},
          {"omega", omega},
          {"hardware", hardware},
          {"timing_comparable", timing_comparable}};
}

Report Report::from_json(const Json& j) {
  Report r;
  try {
    r.config = ExperimentConfig::from_json(j.at("config"));
    r.dataset = j.at("dataset").get<std::string>();
    r.ok = j.at("ok").get<bool>();
    r.failed_stage = j.at("failed_stage").get<std::string>();
    r.failure = j.at("failure").get<std::string>();
    r.trained = j.at("trained").get<bool>();
    for (const auto& x : j.at("ledger")) {
      LedgerRow row;
      row.trial = x.at("trial").get<int>();
      row.cluster = x.at("cluster").get<int>();
      row.train_size = x.at("train_size").get<std::size_t>();
      row.test_size = x.at("test_size").get<std::size_t>();
      row.correct = x.at("correct").get<std::size_t>();
      row.test_total = x.at("test_total").get<std::size_t>();
      row.contribution = x.at("contribution").get<double>();
      row.train_seconds = x.at("train_seconds").get<double>();
      r.ledger.rows.push_back(row);
    }
    for (const auto& x : j.at("timings")) r.timings.push_back(timing_from(x));
    r.omega = j.at("omega").get<std::vector<std::vector<double>>>();
    r.hardware = j.at("hardware").get<std::string>();
    r.timing_comparable = j.at("timing_comparable").get<bool>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::Integrity, std::string("malformed report: ") + e.what());
  }
  r.ledger.finalize();
  return r;
}

// ---------------------------------------------------------------------------

bool operator==(const LedgerCsvRow& a, const LedgerCsvRow& b) {
  const LedgerRow &x = a.row, &y = b.row;
  return a.experiment == b.experiment && a.dataset == b.dataset && a.model == b.model && x.trial == y.trial &&
         x.cluster == y.cluster && x.train_size == y.train_size && x.test_size == y.test_size &&
         x.correct == y.correct && x.test_total == y.test_total && x.contribution == y.contribution &&
         x.train_seconds == y.train_seconds;
}

bool operator==(const TrialCsvRow& a, const TrialCsvRow& b) {
  const TrialTiming &x = a.timing, &y = b.timing;
  return a.experiment == b.experiment && a.dataset == b.dataset && a.model == b.model && a.trial == b.trial &&
         a.accuracy == b.accuracy && x.reduction == y.reduction && x.patching == y.patching &&
         x.clustering == y.clustering && x.training == y.training && x.prediction == y.prediction &&
         x.per_epoch == y.per_epoch && x.epochs == y.epochs;
}

std::vector<LedgerCsvRow> ledger_rows(std::span<const Report> reports) {
  std::vector<LedgerCsvRow> out;
  for (const auto& r : reports) {
    for (const auto& row : r.ledger.rows) {
      out.push_back({r.config.name, r.dataset, std::string(to_string(r.config.model)), row});
    }
  }
  return out;
}

std::vector<TrialCsvRow> trial_rows(std::span<const Report> reports) {
  std::vector<TrialCsvRow> out;
  for (const auto& r : reports) {
    for (std::size_t t = 0; t < r.ledger.trial_accuracy.size(); ++t) {
      TrialCsvRow row{r.config.name, r.dataset, std::string(to_string(r.config.model)), static_cast<int>(t),
                      r.ledger.trial_accuracy[t], t < r.timings.size() ? r.timings[t] : TrialTiming{}};
      out.push_back(row);
    }
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::string join(const std::vector<std::string>& cells, char sep) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += sep;
    line += cells[i];
  }
  return line + '\n';
}

// Splits CSV text into records; quoted fields may contain commas and quotes.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string cur;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(std::move(cur));
      cur.clear();
      any = true;
    } else if (c == '\n') {
      rec.push_back(std::move(cur));
      cur.clear();
      records.push_back(std::move(rec));
      rec.clear();
      any = false;
    } else if (c != '\r') {
      cur += c;
      any = true;
    }
  }
  if (quoted) fail(ErrorKind::Integrity, "unterminated quoted CSV field");
  if (any) {
    rec.push_back(std::move(cur));
    records.push_back(std::move(rec));
  }
  return records;
}

const char* kLedgerHeader =
    "experiment,dataset,model,trial,cluster,train_size,test_size,correct,test_total,contribution,train_seconds";
const char* kTrialsHeader =
    "experiment,dataset,model,trial,accuracy,reduction_s,patching_s,clustering_s,training_s,prediction_s,"
    "per_epoch_s,epochs";

std::vector<std::vector<std::string>> body(std::string_view text, const char* header, std::size_t columns) {
  auto recs = split_csv(text);
  if (recs.empty() || join(recs.front(), ',') != std::string(header) + '\n') {
    fail(ErrorKind::Integrity, "unexpected CSV header");
  }
  recs.erase(recs.begin());
  for (const auto& r : recs) {
    if (r.size() != columns) fail(ErrorKind::Integrity, "CSV row has the wrong number of fields");
  }
  return recs;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

}  // namespace

std::string format_ledger_csv(std::span<const LedgerCsvRow> rows) {
  std::string out = std::string(kLedgerHeader) + '\n';
  for (const auto& r : rows) {
    const LedgerRow& x = r.row;
    out += join({field(r.experiment), field(r.dataset), field(r.model), std::to_string(x.trial),
                 std::to_string(x.cluster), std::to_string(x.train_size), std::to_string(x.test_size),
                 std::to_string(x.correct), std::to_string(x.test_total), num(x.contribution), num(x.train_seconds)},
                ',');
  }
  return out;
}

std::vector<LedgerCsvRow> parse_ledger_csv(std::string_view text) {
  std::vector<LedgerCsvRow> out;
  try {
    for (const auto& f : body(text, kLedgerHeader, 11)) {
      LedgerCsvRow r{f[0], f[1], f[2], {}};
      r.row.trial = std::stoi(f[3]);
      r.row.cluster = std::stoi(f[4]);
      r.row.train_size = to_size(f[5]);
      r.row.test_size = to_size(f[6]);
      r.row.correct = to_size(f[7]);
      r.row.test_total = to_size(f[8]);
      r.row.contribution = std::stod(f[9]);
      r.row.train_seconds = std::stod(f[10]);
      out.push_back(std::move(r));
    }
  } catch (const std::logic_error& e) {
    fail(ErrorKind::Integrity, std::string("bad ledger number: ") + e.what());
  }
  return out;
}

std::string format_trials_csv(std::span<const TrialCsvRow> rows) {
  std::string out = std::string(kTrialsHeader) + '\n';
  for (const auto& r : rows) {
    const TrialTiming& t = r.timing;
    out += join({field(r.experiment), field(r.dataset), field(r.model), std::to_string(r.trial), num(r.accuracy),
                 num(t.reduction), num(t.patching), num(t.clustering), num(t.training), num(t.prediction),
                 num(t.per_epoch), std::to_string(t.epochs)},
                ',');
  }
  return out;
}

std::vector<TrialCsvRow> parse_trials_csv(std::string_view text) {
  std::vector<TrialCsvRow> out;
  try {
    for (const auto& f : body(text, kTrialsHeader, 12)) {
      TrialCsvRow r{f[0], f[1], f[2], std::stoi(f[3]), std::stod(f[4]), {}};
      r.timing.reduction = std::stod(f[5]);
      r.timing.patching = std::stod(f[6]);
      r.timing.clustering = std::stod(f[7]);
      r.timing.training = std::stod(f[8]);
      r.timing.prediction = std::stod(f[9]);
      r.timing.per_epoch = std::stod(f[10]);
      r.timing.epochs = std::stoi(f[11]);
      out.push_back(std::move(r));
    }
  } catch (const std::logic_error& e) {
    fail(ErrorKind::Integrity, std::string("bad trials number: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string table(const std::vector<std::string>& head, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) w[c] = head[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < w.size(); ++c) w[c] = std::max(w[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < w.size(); ++c) {
      const std::string v = c < cells.size() ? cells[c] : "";
      s += v + std::string(w[c] - v.size(), ' ');
      s += c + 1 < w.size() ? " | " : "";
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + '\n';
  };
  std::string out = line(head);
  std::size_t total = 0;
  for (std::size_t c = 0; c < w.size(); ++c) total += w[c] + (c + 1 < w.size() ? 3 : 0);
  out += std::string(total, '-') + '\n';
  for (const auto& r : rows) out += line(r);
  return out;
}

bool usable(const Report& r) { return r.ok && r.trained && !r.ledger.trial_accuracy.empty(); }

std::string patch_label(const ExperimentConfig& c) {
  if (!c.patch) return "none";
  return std::string(to_string(*c.patch)) + " " + std::to_string(c.patch_n) + "x" + std::to_string(c.patch_n);
}

// Best mean among matching reports, keyed by dataset.
template <class Pred>
std::map<std::string, const Report*> best_by_dataset(std::span<const Report> reports, Pred pred) {
  std::map<std::string, const Report*> best;
  for (const auto& r : reports) {
    if (!usable(r) || !pred(r)) continue;
    auto& slot = best[r.dataset];
    if (!slot || r.ledger.mean > slot->ledger.mean) slot = &r;
  }
  return best;
}

std::string segmentation_table(std::span<const Report> reports, bool patched, std::size_t& printed) {
  auto match = [&](const Report& r, ModelKind m) {
    const auto& c = r.config;
    return c.study.empty() && c.model == m && c.reducer == ReducerMethod::Pca &&
           (patched ? c.patch == PatchMode::Cpc : !c.patch);
  };
  const auto unet = best_by_dataset(reports, [&](const Report& r) { return match(r, ModelKind::UNet); });
  const auto ceu = best_by_dataset(reports, [&](const Report& r) { return match(r, ModelKind::CeuNet); });
  std::map<std::string, int> names;
  for (const auto& [d, _] : unet) names[d];
  for (const auto& [d, _] : ceu) names[d];
  printed = names.size();
  std::vector<std::vector<std::string>> rows;
  for (const auto& [d, _] : names) {
    const auto u = unet.find(d);
    const auto e = ceu.find(d);
    rows.push_back({d, "-", u != unet.end() ? fixed(u->second->ledger.mean) : "-", "-",
                    e != ceu.end() ? fixed(e->second->ledger.mean) + " (k=" +
                                         std::to_string(e->second->config.k) + ")"
                                   : "-"});
  }
  return table({"Dataset", "HybridSN", "U-Net", "AeroRIT", "CEU-Net"}, rows);
}

}  // namespace

std::string format_report(std::span<const Report> reports) {
  std::ostringstream out;
  out << "Hardware: " << (reports.empty() ? hardware_note() : reports.front().hardware) << "\n\n";

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    const auto& c = r.config;
    const bool good = usable(r);
    rows.push_back({c.name, r.dataset, std::string(to_string(c.model)),
                    std::string(to_string(c.reducer)) + "-" + std::to_string(c.resolved_dim()), patch_label(c),
                    c.model == ModelKind::CeuNet ? std::to_string(c.k) : "-",
                    c.model == ModelKind::CeuNet ? std::string(to_string(c.cluster)) : "-",
                    c.model == ModelKind::CeuNet ? std::string(to_string(c.weights)) : "-",
                    std::to_string(r.ledger.trial_accuracy.size()), good ? fixed(r.ledger.mean) : "-",
                    good ? fixed(r.ledger.stddev) : "-", good ? fixed(r.min_accuracy()) : "-",
                    good ? fixed(r.max_accuracy()) : "-",
                    r.ok ? (r.trained ? "ok" : "untrained") : "failed (" + r.failed_stage + ")"});
  }
  out << "Experiments (overall test accuracy over trials)\n"
      << table({"experiment", "dataset", "model", "reducer", "patch", "k", "cluster", "weights", "trials", "mean",
                "std", "min", "max", "status"},
               rows)
      << '\n';

  {
    std::map<std::string, std::map<ReducerMethod, const Report*>> grid;
    for (const auto& r : reports) {
      if (!usable(r) || !r.config.study.empty() || r.config.patch) continue;
      auto& slot = grid[r.dataset][r.config.reducer];
      const bool prefer = !slot || (r.config.model == ModelKind::CeuNet && slot->config.model != ModelKind::CeuNet) ||
                          (r.config.model == slot->config.model && r.ledger.mean > slot->ledger.mean);
      if (prefer) slot = &r;
    }
    bool any_cae = false;
    for (const auto& [d, m] : grid) any_cae = any_cae || m.count(ReducerMethod::Cae2d) || m.count(ReducerMethod::Cae3d);
    if (any_cae) {
      std::vector<std::vector<std::string>> t;
      for (const auto& [d, m] : grid) {
        std::vector<std::string> row{d};
        for (ReducerMethod k : {ReducerMethod::Pca, ReducerMethod::Cae2d, ReducerMethod::Cae3d}) {
          const auto it = m.find(k);
          row.push_back(it != m.end() ? fixed(it->second->ledger.mean) : "-");
        }
        t.push_back(row);
      }
      out << "Feature reduction comparison (no patching)\n" << table({"Dataset", "PCA", "2D CAE", "3D CAE"}, t) << '\n';
    }
  }

  std::size_t printed = 0;
  const std::string plain = segmentation_table(reports, false, printed);
  if (printed) out << "Segmentation without patching (PCA)\n" << plain << '\n';
  const std::string patched = segmentation_table(reports, true, printed);
  if (printed) out << "Segmentation with centre-pixel patches (PCA)\n" << patched << '\n';

  {
    std::vector<const Report*> grid;
    for (const auto& r : reports) {
      if (r.config.study == "grid") grid.push_back(&r);
    }
    if (!grid.empty()) {
      std::size_t kmax = 0, kmin = SIZE_MAX;
      for (const auto* r : grid) {
        kmax = std::max(kmax, r->config.k);
        kmin = std::min(kmin, r->config.k);
      }
      const Report* best = nullptr;
      for (const auto* r : grid) {
        if (usable(*r) && (!best || r->ledger.mean > best->ledger.mean)) best = r;
      }
      std::vector<std::string> head{"method"};
      for (std::size_t k = kmin; k <= kmax; ++k) head.push_back("k=" + std::to_string(k));
      std::vector<std::vector<std::string>> t;
      for (ClusterMethod m : {ClusterMethod::KMeans, ClusterMethod::Gmm}) {
        std::vector<std::string> row{std::string(to_string(m))};
        bool any = false;
        for (std::size_t k = kmin; k <= kmax; ++k) {
          std::string cell = "";
          for (const auto* r : grid) {
            if (r->config.cluster != m || r->config.k != k) continue;
            any = true;
            cell = usable(*r) ? fixed(r->ledger.mean) + (r == best ? " *" : "") : "infeasible";
          }
          row.push_back(cell);
        }
        if (any) t.push_back(row);
      }
      out << "Cluster grid (mean accuracy; * best)\n" << table(head, t) << '\n';
    }
  }

  {
    std::vector<std::vector<std::string>> t;
    for (const auto& r : reports) {
      if (r.config.study != "weights") continue;
      std::string trials;
      for (double a : r.ledger.trial_accuracy) trials += (trials.empty() ? "" : " ") + fixed(a);
      t.push_back({std::string(to_string(r.config.weights)), usable(r) ? fixed(r.ledger.mean) : "failed",
                   usable(r) ? fixed(r.ledger.stddev) : "-", trials});
    }
    if (!t.empty()) out << "Weight schemes (paired splits)\n" << table({"scheme", "mean", "std", "trials"}, t) << '\n';
  }

  {
    std::vector<std::vector<std::string>> t;
    std::map<ModelKind, std::pair<double, double>> ratio;
    for (const auto& r : reports) {
      if (r.config.study != "timing") continue;
      const TrialTiming m = r.mean_timing();
      const double total = m.reduction + m.patching + m.clustering + m.training;
      t.push_back({std::string(to_string(r.config.model)), patch_label(r.config), fixed(m.per_epoch, 4),
                   fixed(m.training, 2), fixed(m.clustering, 3), fixed(m.reduction, 3), fixed(total, 2),
                   r.ok ? "ok" : "failed"});
      auto& [plain_s, cpc_s] = ratio[r.config.model];
      (r.config.patch ? cpc_s : plain_s) = m.per_epoch;
    }
    if (!t.empty()) {
      out << "Training time (seconds, mean per trial)\n"
          << table({"model", "patch", "s/epoch", "training", "clustering", "reduction", "total", "status"}, t);
      for (const auto& [m, pr] : ratio) {
        if (pr.first > 0.0 && pr.second > 0.0) {
          out << to_string(m) << ": patched/unpatched per-epoch ratio " << fixed(pr.second / pr.first, 1) << "x\n";
        }
      }
      out << '\n';
    }
  }

  bool header = false;
  for (const auto& r : reports) {
    if (r.ok) continue;
    if (!header) out << "Failures\n";
    header = true;
    out << "  " << r.config.name << " [" << r.failed_stage << "]: " << r.failure << '\n';
  }
  if (header) out << '\n';
  for (const auto& r : reports) {
    if (!r.timing_comparable) {
      out << "Note: " << r.config.name << " ran trials in parallel; its timings are not comparable.\n";
    }
  }

  out << "Configurations\n";
  for (const auto& r : reports) out << "  " << r.config.to_json().dump() << '\n';
  return out.str();
}

std::vector<std::filesystem::path> emit_outputs(std::span<const Report> reports, const std::filesystem::path& out,
                                                std::ostream& notice) {
  if (reports.empty()) {
    notice << "no reports to emit; nothing written\n";
    return {};
  }
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& rel, const std::string& text) {
    io::write_text(out / rel, text);
    written.push_back(out / rel);
  };
  put("report.txt", format_report(reports));
  put("ledger.csv", format_ledger_csv(ledger_rows(reports)));
  put("trials.csv", format_trials_csv(trial_rows(reports)));
  Json all = Json::array();
  for (const auto& r : reports) all.push_back(r.to_json());
  put("results.json", all.dump(1) + '\n');

  std::string acc = "experiment\ttrial\taccuracy\n";
  for (const auto& row : trial_rows(reports)) {
    acc += row.experiment + '\t' + std::to_string(row.trial) + '\t' + num(row.accuracy) + '\n';
  }
  put("series/accuracy.tsv", acc);

  std::string grid, weights, timing;
  for (const auto& r : reports) {
    const auto& c = r.config;
    const bool good = usable(r);
    if (c.study == "grid") {
      grid += std::string(to_string(c.cluster)) + '\t' + std::to_string(c.k) + '\t' +
              (good ? num(r.ledger.mean) : "nan") + '\t' + (good ? num(r.ledger.stddev) : "nan") + '\t' +
              (r.ok ? "ok" : "infeasible") + '\n';
    } else if (c.study == "weights") {
      for (std::size_t t = 0; t < r.ledger.trial_accuracy.size(); ++t) {
        weights += std::string(to_string(c.weights)) + '\t' + std::to_string(t) + '\t' +
                   num(r.ledger.trial_accuracy[t]) + '\n';
      }
    } else if (c.study == "timing") {
      const TrialTiming m = r.mean_timing();
      timing += std::string(to_string(c.model)) + '\t' + (c.patch ? std::to_string(c.patch_n) : "1") + '\t' +
                num(m.per_epoch) + '\t' + num(m.training) + '\t' + num(m.clustering) + '\t' + num(m.reduction) +
                '\n';
    }
  }
  if (!grid.empty()) put("series/grid.tsv", "method\tk\tmean\tstd\tstatus\n" + grid);
  if (!weights.empty()) put("series/weights.tsv", "scheme\ttrial\taccuracy\n" + weights);
  if (!timing.empty()) {
    put("series/timing.tsv", "model\tpatch_n\tper_epoch_s\ttraining_s\tclustering_s\treduction_s\n" + timing);
  }
  return written;
}

std::vector<Report> load_results(const std::filesystem::path& results_json) {
  const Json j = io::read_json(results_json);
  if (!j.is_array()) fail(ErrorKind::Integrity, results_json.string() + ": expected an array of reports");
  std::vector<Report> out;
  for (const auto& x : j) out.push_back(Report::from_json(x));
  return out;
}

}  // namespace ceunet
