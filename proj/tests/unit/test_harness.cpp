#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ceunet/error.hpp"
#include "ceunet/harness.hpp"
#include "ceunet/synthetic.hpp"
#include "support.hpp"

using namespace ceunet;

namespace {

Dataset small_scene(std::uint64_t seed = 3) {
  SyntheticSpec s;
  s.height = 16;
  s.width = 16;
  s.bands = 20;
  s.seed = seed;
  return make_synthetic(s);
}

ExperimentConfig quick_config() {
  ExperimentConfig c;
  c.name = "quick";
  c.reduced_dim = 8;
  c.trials = 2;
  c.epochs = 2;
  c.seed = 5;
  c.min_cluster_size = 5;
  return c;
}

// Two spectrally distant groups of two classes each, laid out in stripes.
Dataset two_group_scene() {
  Dataset d;
  d.cube = HsiCube("groups", 20, 20, 12);
  d.truth = GroundTruth(20, 20, 4);
  Rng rng(1);
  std::normal_distribution<float> g(0.0f, 0.02f);
  for (std::size_t r = 0; r < 20; ++r) {
    for (std::size_t c = 0; c < 20; ++c) {
      const int cls = static_cast<int>((r / 5) % 4) + 1;
      d.truth.labels[r * 20 + c] = static_cast<std::uint16_t>(cls);
      auto px = d.cube.pixel(r, c);
      for (std::size_t b = 0; b < 12; ++b) {
        const float base = cls <= 2 ? 0.2f : 0.8f;
        const float bump = ((cls % 2) == static_cast<int>(b % 2)) ? 0.1f : -0.1f;
        px[b] = base + bump + g(rng);
      }
    }
  }
  return d;
}

ErrorKind config_error(const std::string& text) {
  try {
    ExperimentConfig::from_json(io::Json::parse(text));
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("configuration round trip") {
  ExperimentConfig c = quick_config();
  c.reducer = ReducerMethod::Cae3d;
  c.patch = PatchMode::Cpc;
  c.patch_n = 5;
  c.pad = PadPolicy::None;
  c.k = 3;
  c.cluster = ClusterMethod::Gmm;
  c.omega = {0.5, 0.25, 0.25};
  c.test_fraction = 0.3;
  c.learning_rate = 1e-3;
  c.batch_size = 64;
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.patch == PatchMode::Cpc);
  CHECK(back.omega == c.omega);
  CHECK(*back.epochs == 2);

  ExperimentConfig d;
  CHECK(d.resolved_epochs() == 200);
  d.model = ModelKind::UNet;
  CHECK(d.resolved_epochs() == 150);
  CHECK(d.resolved_dim() == 30);
  d.reducer = ReducerMethod::Cae2d;
  CHECK(d.resolved_dim() == 32);

  testing::TempDir dir;
  std::ofstream(dir / "c.json") << c.to_json().dump();
  CHECK(load_config(dir / "c.json").to_json() == c.to_json());
}

TEST_CASE("invalid configurations are rejected") {
  CHECK(config_error(R"({"bogus": 1})") == ErrorKind::Config);
  CHECK(config_error(R"({"patch": {"mode": "majority", "pad": "none"}})") == ErrorKind::Config);
  CHECK(config_error(R"({"model": "unet", "ensemble": {"omega": [1.0]}})") == ErrorKind::Config);
  CHECK(config_error(R"({"ensemble": {"k": 2, "omega": [0.5, 0.6]}})") == ErrorKind::Config);
  CHECK(config_error(R"({"ensemble": {"k": 3, "omega": [0.5, 0.5]}})") == ErrorKind::Config);
  CHECK(config_error(R"({"ensemble": {"k": 0}})") == ErrorKind::Config);
  CHECK(config_error(R"({"split": {"test_fraction": 1.0}})") == ErrorKind::Config);
  CHECK(config_error(R"({"split": {"trials": 0}})") == ErrorKind::Config);
  CHECK(config_error(R"({"epochs": -1})") == ErrorKind::Config);
  CHECK(config_error(R"({"reducer": {"method": "ica"}})") == ErrorKind::Config);
  CHECK(config_error(R"({"patch": {"mode": "cpc", "pad": "none"}})") == ErrorKind::Io);
}

TEST_CASE("csv round trips survive awkward names") {
  LedgerCsvRow a{"exp, \"one\"", "scene\nb", "ceunet", {1, 2, 30, 7, 5, 20, 0.25, 1.5}};
  LedgerCsvRow b{"plain", "d", "unet", {0, 0, 100, 20, 19, 20, 0.95, 0.125}};
  const std::vector<LedgerCsvRow> rows{a, b};
  CHECK(parse_ledger_csv(format_ledger_csv(rows)) == rows);

  TrialCsvRow t{"x,y", "d", "ceunet", 3, 0.1 + 0.2, {}};
  t.timing = {0.1, 0.2, 0.3, 0.4, 0.5, 1.0 / 3, 7};
  const std::vector<TrialCsvRow> trials{t};
  CHECK(parse_trials_csv(format_trials_csv(trials)) == trials);
  CHECK(format_ledger_csv(rows).rfind(
            "experiment,dataset,model,trial,cluster,train_size,test_size,correct,test_total,contribution,"
            "train_seconds\n",
            0) == 0);
  CHECK_THROWS_AS(parse_ledger_csv("experiment,dataset\nx,y\n"), Error);
}

TEST_CASE("emitting nothing writes nothing") {
  testing::TempDir dir;
  std::ostringstream notice;
  CHECK(emit_outputs({}, dir / "out", notice).empty());
  CHECK(!std::filesystem::exists(dir / "out"));
  CHECK(!notice.str().empty());
}

TEST_CASE("experiment outputs are complete and traceable") {
  const Dataset data = small_scene();
  ExperimentConfig u = quick_config();
  u.name = "u";
  u.model = ModelKind::UNet;
  ExperimentConfig e = quick_config();
  e.name = "e";
  std::vector<Report> reports{run_experiment(u, data), run_experiment(e, data)};
  for (const auto& r : reports) {
    REQUIRE(r.ok);
    CHECK(r.ledger.trial_accuracy.size() == 2);
    CHECK(r.min_accuracy() <= r.ledger.mean);
    CHECK(r.ledger.mean <= r.max_accuracy());
    CHECK(r.timings.size() == 2);
    CHECK(!r.hardware.empty());
  }
  CHECK(reports[1].ledger.rows.size() == 4);
  for (int t = 0; t < 2; ++t) {
    double sum = 0.0;
    for (const auto& row : reports[1].ledger.rows) {
      if (row.trial == t) sum += row.contribution;
    }
    CHECK(sum == doctest::Approx(reports[1].ledger.trial_accuracy[t]).epsilon(1e-12));
  }

  testing::TempDir dir;
  std::ostringstream notice;
  const auto files = emit_outputs(reports, dir.path(), notice);
  for (const char* f : {"report.txt", "ledger.csv", "trials.csv", "results.json", "series/accuracy.tsv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(files.size() == 5);

  const auto ledger = parse_ledger_csv(io::read_text(dir / "ledger.csv"));
  CHECK(ledger.size() == 2 + 4);
  CHECK(ledger == ledger_rows(reports));
  const auto back = load_results(dir / "results.json");
  REQUIRE(back.size() == 2);
  CHECK(back[1].to_json() == reports[1].to_json());

  const std::string text = io::read_text(dir / "report.txt");
  const auto at = text.find("Segmentation without patching (PCA)");
  REQUIRE(at != std::string::npos);
  const auto head = text.find('\n', at) + 1;
  const std::string header = text.substr(head, text.find('\n', head) - head);
  CHECK(header.find("Dataset") == 0);
  for (const char* col : {"HybridSN", "U-Net", "AeroRIT", "CEU-Net"}) CHECK(header.find(col) != std::string::npos);
  CHECK(text.find("(k=2)") != std::string::npos);
}

TEST_CASE("runs are reproducible") {
  const Dataset data = small_scene(4);
  ExperimentConfig c = quick_config();
  const Report a = run_experiment(c, data);
  const Report b = run_experiment(c, data);
  REQUIRE(a.ok);
  CHECK(a.ledger.trial_accuracy == b.ledger.trial_accuracy);
  CHECK(ledger_rows(std::span(&a, 1)).size() == ledger_rows(std::span(&b, 1)).size());
  c.seed = 6;
  CHECK(run_experiment(c, data).ok);
}

TEST_CASE("zero epochs only reduces and clusters") {
  const Dataset data = small_scene();
  ExperimentConfig c = quick_config();
  c.epochs = 0;
  const Report r = run_experiment(c, data);
  CHECK(r.ok);
  CHECK(!r.trained);
  REQUIRE(r.timings.size() == 2);
  for (const auto& t : r.timings) {
    CHECK(t.training == 0.0);
    CHECK(t.epochs == 0);
  }
}

TEST_CASE("failures are recorded by stage") {
  ExperimentConfig c = quick_config();
  c.dataset = "/nonexistent/scene";
  const Report missing = run_experiment(c);
  CHECK(!missing.ok);
  CHECK(missing.failed_stage == "load");

  c.min_cluster_size = 100000;
  const Report small = run_experiment(c, small_scene());
  CHECK(!small.ok);
  CHECK(small.failed_stage == "clustering");
  CHECK(!small.failure.empty());
}

TEST_CASE("grid search keeps going past infeasible cells") {
  const Dataset data = two_group_scene();
  ExperimentConfig base = quick_config();
  base.reducer = ReducerMethod::None;
  base.epochs = 15;
  base.learning_rate = 1e-3;
  base.trials = 1;
  base.min_cluster_size = 40;
  const std::vector<ClusterMethod> methods{ClusterMethod::KMeans};
  const auto grid = grid_cluster_tuning(data, base, methods, 2, 6);
  REQUIRE(grid.size() == 5);
  CHECK(grid[0].config.name == "grid/kmeans/k2");
  CHECK(grid[0].ok);
  CHECK(!grid[4].ok);
  const auto best = best_report(grid);
  REQUIRE(best);
  CHECK(grid[*best].ok);
  CHECK(grid[0].ledger.mean >= grid[4].ledger.mean);

  testing::TempDir dir;
  std::ostringstream notice;
  emit_outputs(grid, dir.path(), notice);
  const std::string tsv = io::read_text(dir / "series/grid.tsv");
  CHECK(tsv.find("infeasible") != std::string::npos);
}

TEST_CASE("weight study shares splits across schemes") {
  const Dataset data = small_scene();
  ExperimentConfig base = quick_config();
  base.epochs = 1;
  const std::vector<WeightScheme> schemes{WeightScheme::Constant, WeightScheme::Abundance, WeightScheme::Random};
  const auto reports = weight_study(data, base, schemes);
  REQUIRE(reports.size() == 3);
  CHECK(reports[1].config.name == "weights/abundance");
  for (const auto& r : reports) {
    REQUIRE(r.ok);
    for (std::size_t i = 0; i < r.ledger.rows.size(); ++i) {
      CHECK(r.ledger.rows[i].train_size == reports[0].ledger.rows[i].train_size);
      CHECK(r.ledger.rows[i].test_size == reports[0].ledger.rows[i].test_size);
    }
  }
  CHECK(reports[0].omega[0] == std::vector<double>{0.5, 0.5});
}
