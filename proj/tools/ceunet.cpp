// Command-line front end: dataset inspection, reduction, patching and the
// experiment studies.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ceunet/error.hpp"
#include "ceunet/harness.hpp"
#include "ceunet/io.hpp"
#include "ceunet/patching.hpp"
#include "ceunet/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ceunet;

namespace {

struct Common {
  std::uint64_t seed = 0;
  fs::path out = "out";
  fs::path config;
  bool seed_given = false;
};

// Experiment overrides shared by the training subcommands. Only options that
// were given on the command line replace config-file values.
struct Overrides {
  std::string dataset;
  int trials = 5;
  int epochs = 0;
  std::string reducer = "pca";
  std::size_t dim = 0;
  int reducer_epochs = 0;
  double learning_rate = 1e-4;
  std::size_t batch = 0;
  double test_fraction = 0.25;
  std::size_t min_cluster_size = 50;
  std::string checkpoints;
  std::string name;
  std::size_t k = 2;
  std::string cluster = "kmeans";
  std::string weights = "constant";
  std::size_t patch_n = 0;
  std::string patch_mode = "cpc";

  std::vector<CLI::Option*> given;
  CLI::Option *o_dataset{}, *o_trials{}, *o_epochs{}, *o_reducer{}, *o_dim{}, *o_reducer_epochs{}, *o_lr{},
      *o_batch{}, *o_fraction{}, *o_min{}, *o_ckpt{}, *o_name{}, *o_k{}, *o_cluster{}, *o_weights{}, *o_patch{},
      *o_mode{}, *o_parallel{};
  bool parallel = false;
};

void add_experiment_options(CLI::App* sub, Overrides& o, bool ensemble, bool patch) {
  o.o_dataset = sub->add_option("--dataset", o.dataset, "Dataset directory");
  o.o_trials = sub->add_option("--trials", o.trials, "Number of random 75/25 splits");
  o.o_epochs = sub->add_option("--epochs", o.epochs, "Training epochs (per subnet for CEU-Net)");
  o.o_reducer = sub->add_option("--reducer", o.reducer, "none, pca, cae2d or cae3d");
  o.o_dim = sub->add_option("--dim", o.dim, "Reduced feature count");
  o.o_reducer_epochs = sub->add_option("--reducer-epochs", o.reducer_epochs, "Autoencoder epochs");
  o.o_lr = sub->add_option("--lr", o.learning_rate, "Learning rate");
  o.o_batch = sub->add_option("--batch", o.batch, "Mini-batch size");
  o.o_fraction = sub->add_option("--test-fraction", o.test_fraction, "Held-out share per split");
  o.o_ckpt = sub->add_option("--checkpoints", o.checkpoints, "Directory for trained network checkpoints");
  o.o_name = sub->add_option("--name", o.name, "Experiment name");
  o.o_parallel = sub->add_flag("--parallel-trials", o.parallel, "Run trials concurrently (timings not comparable)");
  if (ensemble) {
    o.o_k = sub->add_option("--k", o.k, "Cluster count");
    o.o_cluster = sub->add_option("--cluster", o.cluster, "kmeans or gmm");
    o.o_weights = sub->add_option("--weights", o.weights, "constant, abundance or random");
    o.o_min = sub->add_option("--min-cluster-size", o.min_cluster_size, "Smallest allowed training cluster");
  }
  if (patch) {
    o.o_patch = sub->add_option("--patch-n", o.patch_n, "Patch side; enables patching");
    o.o_mode = sub->add_option("--patch-mode", o.patch_mode, "cpc, exclusive or majority");
  }
}

bool set(const CLI::Option* opt) { return opt && opt->count() > 0; }

ExperimentConfig build_config(const Common& c, const Overrides& o, ModelKind model) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  cfg.model = model;
  if (c.config.empty() || c.seed_given) cfg.seed = c.seed;
  if (set(o.o_dataset)) cfg.dataset = o.dataset;
  if (set(o.o_trials)) cfg.trials = o.trials;
  if (set(o.o_epochs)) cfg.epochs = o.epochs;
  if (set(o.o_reducer)) cfg.reducer = parse_reducer(o.reducer);
  if (set(o.o_dim)) cfg.reduced_dim = o.dim;
  if (set(o.o_reducer_epochs)) cfg.reducer_epochs = o.reducer_epochs;
  if (set(o.o_lr)) cfg.learning_rate = o.learning_rate;
  if (set(o.o_batch)) cfg.batch_size = o.batch;
  if (set(o.o_fraction)) cfg.test_fraction = o.test_fraction;
  if (set(o.o_min)) cfg.min_cluster_size = o.min_cluster_size;
  if (set(o.o_ckpt)) cfg.checkpoint_dir = o.checkpoints;
  if (set(o.o_name)) cfg.name = o.name;
  if (set(o.o_k)) cfg.k = o.k;
  if (set(o.o_cluster)) cfg.cluster = parse_cluster_method(o.cluster);
  if (set(o.o_weights)) cfg.weights = parse_weight_scheme(o.weights);
  if (set(o.o_patch)) {
    cfg.patch = parse_patch_mode(o.patch_mode);
    cfg.patch_n = o.patch_n;
  } else if (set(o.o_mode)) {
    cfg.patch = parse_patch_mode(o.patch_mode);
  }
  if (set(o.o_parallel)) cfg.parallel_trials = o.parallel;
  if (cfg.dataset.empty()) fail(ErrorKind::Config, "no dataset given (--dataset or the config file)");
  cfg.validate();
  return cfg;
}

int finish(const std::vector<Report>& reports, const fs::path& out, bool failures_are_errors) {
  for (const auto& path : emit_outputs(reports, out, std::cerr)) std::cerr << "wrote " << path.string() << '\n';
  int status = 0;
  for (const auto& r : reports) {
    if (r.ok) {
      std::cout << r.config.name << ": mean " << r.ledger.mean << " std " << r.ledger.stddev << " over "
                << r.ledger.trial_accuracy.size() << " trials\n";
    } else {
      std::cout << r.config.name << ": failed at " << r.failed_stage << ": " << r.failure << '\n';
      if (failures_are_errors) status = 1;
    }
  }
  return status;
}

template <class T, class Parse>
std::vector<T> parse_list(const std::vector<std::string>& names, Parse parse) {
  std::vector<T> out;
  for (const auto& n : names) out.push_back(parse(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CEU-Net hyperspectral segmentation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  auto* o_seed = app.add_option("--seed", common.seed, "Master seed");
  app.add_option("--out", common.out, "Output directory");
  app.add_option("--config", common.config, "Experiment config (JSON)");

  std::string dir;
  auto* inspect = app.add_subcommand("inspect", "Print dataset metadata");
  inspect->add_option("dataset", dir, "Dataset directory")->required();

  std::string method = "pca";
  std::size_t dim = 0;
  int cae_epochs = 0;
  auto* reduce = app.add_subcommand("reduce", "Fit a spectral reducer on every labelled pixel");
  reduce->add_option("--dataset", dir, "Dataset directory")->required();
  reduce->add_option("--method", method, "pca, cae2d or cae3d");
  reduce->add_option("--dim", dim, "Output features (default 30, 32 for cae2d)");
  reduce->add_option("--epochs", cae_epochs, "Autoencoder epochs");

  std::string mode = "cpc", pad = "zero";
  std::size_t n = 10;
  auto* patch = app.add_subcommand("patch", "Extract patches or downsample a dataset");
  patch->add_option("--dataset", dir, "Dataset directory")->required();
  patch->add_option("--mode", mode, "cpc, exclusive or majority");
  patch->add_option("--n", n, "Patch side length");
  patch->add_option("--pad", pad, "zero or none (cpc only)");

  Overrides unet_o, ceu_o, grid_o, weights_o, timing_o;
  auto* train = app.add_subcommand("train-unet", "Single U-Net over repeated splits");
  add_experiment_options(train, unet_o, false, true);
  auto* ceu = app.add_subcommand("ceunet", "Clustering ensemble over repeated splits");
  add_experiment_options(ceu, ceu_o, true, true);

  std::vector<std::string> methods{"kmeans", "gmm"};
  std::size_t k_min = 2, k_max = 6;
  auto* grid = app.add_subcommand("grid", "Cluster method x k sweep");
  add_experiment_options(grid, grid_o, true, true);
  grid->add_option("--methods", methods, "Clustering methods")->delimiter(',');
  grid->add_option("--k-min", k_min, "Smallest k");
  grid->add_option("--k-max", k_max, "Largest k");

  std::vector<std::string> schemes{"constant", "abundance", "random"};
  auto* weights = app.add_subcommand("weights", "Loss-weight scheme comparison on paired splits");
  add_experiment_options(weights, weights_o, true, true);
  weights->remove_option(weights_o.o_weights);
  weights_o.o_weights = nullptr;
  weights->add_option("--schemes", schemes, "Weight schemes")->delimiter(',');

  std::size_t timing_n = 10;
  auto* timing = app.add_subcommand("timing", "Training time with and without centre-pixel patches");
  add_experiment_options(timing, timing_o, true, false);
  timing->add_option("--patch-n", timing_n, "Patch side for the patched runs");

  std::vector<std::string> inputs;
  auto* report = app.add_subcommand("report", "Merge earlier results and re-emit tables");
  report->add_option("inputs", inputs, "Output directories or results.json files")->required();

  SyntheticSpec syn;
  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled scene");
  synth->add_option("--height", syn.height);
  synth->add_option("--width", syn.width);
  synth->add_option("--bands", syn.bands);
  synth->add_option("--classes", syn.classes);
  synth->add_option("--regions", syn.regions);
  synth->add_option("--noise", syn.noise);
  synth->add_option("--name", syn.name);

  CLI11_PARSE(app, argc, argv);
  common.seed_given = o_seed->count() > 0;

  try {
    if (*inspect) {
      const Dataset d = load_dataset(dir, false);
      const std::string text = format_summary(summarize(d.cube, d.truth));
      std::cout << text;
      if (app.get_option("--out")->count()) io::write_text(common.out / "inspect.txt", text);
      return 0;
    }
    if (*reduce) {
      const Dataset d = load_dataset(dir);
      const LabeledPixelSet px = remove_background(d.cube, d.truth);
      ExperimentConfig tmp;
      tmp.reducer = parse_reducer(method);
      tmp.reduced_dim = dim;
      Reducer r = Reducer::fit(tmp.reducer, px.samples, px.dim, tmp.resolved_dim(), common.seed, cae_epochs);
      r.save(common.out / (method + ".ckpt"));
      HsiCube reduced(d.cube.name + "-" + method, d.cube.height, d.cube.width, r.output_dim());
      reduced.data = r.transform(d.cube.data);
      save_dataset(common.out / "reduced", reduced, d.truth);
      std::cout << "reduced " << px.dim << " -> " << r.output_dim() << " features; wrote "
                << (common.out / (method + ".ckpt")).string() << " and " << (common.out / "reduced").string() << '\n';
      return 0;
    }
    if (*patch) {
      const Dataset d = load_dataset(dir);
      PatchConfig pc{n, parse_patch_mode(mode), pad == "none" ? PadPolicy::None : PadPolicy::Zero};
      if (pad != "zero" && pad != "none") fail(ErrorKind::Config, "unknown pad policy: " + pad);
      if (pc.mode == PatchMode::Cpc) {
        const PatchDataset p = extract_cpc(d.cube, d.truth, pc);
        save_patches(common.out / "patches", p);
        std::cout << p.size() << " patches of " << n << "x" << n << "x" << p.dim << '\n';
      } else {
        const Dataset down = pc.mode == PatchMode::Exclusive ? downsample_exclusive(d.cube, d.truth, pc)
                                                             : downsample_majority(d.cube, d.truth, pc);
        save_dataset(common.out / "downsampled", down.cube, down.truth);
        std::cout << down.truth.labeled_count() << " labelled pixels on a " << down.cube.height << "x"
                  << down.cube.width << " grid\n";
      }
      return 0;
    }
    if (*train) {
      const ExperimentConfig cfg = build_config(common, unet_o, ModelKind::UNet);
      return finish({run_experiment(cfg)}, common.out, true);
    }
    if (*ceu) {
      const ExperimentConfig cfg = build_config(common, ceu_o, ModelKind::CeuNet);
      return finish({run_experiment(cfg)}, common.out, true);
    }
    if (*grid) {
      const ExperimentConfig cfg = build_config(common, grid_o, ModelKind::CeuNet);
      const auto ms = parse_list<ClusterMethod>(methods, parse_cluster_method);
      const std::vector<Report> reports = grid_cluster_tuning(load_dataset(cfg.dataset), cfg, ms, k_min, k_max);
      if (const auto best = best_report(reports)) std::cout << "best: " << reports[*best].config.name << '\n';
      return finish(reports, common.out, false);
    }
    if (*weights) {
      const ExperimentConfig cfg = build_config(common, weights_o, ModelKind::CeuNet);
      const auto ws = parse_list<WeightScheme>(schemes, parse_weight_scheme);
      return finish(weight_study(load_dataset(cfg.dataset), cfg, ws), common.out, true);
    }
    if (*timing) {
      const ExperimentConfig cfg = build_config(common, timing_o, ModelKind::CeuNet);
      return finish(timing_comparison(load_dataset(cfg.dataset), cfg, timing_n), common.out, true);
    }
    if (*report) {
      std::vector<Report> all;
      for (const auto& in : inputs) {
        const fs::path p = fs::is_directory(in) ? fs::path(in) / "results.json" : fs::path(in);
        auto part = load_results(p);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
      return finish(all, common.out, false);
    }
    if (*synth) {
      syn.seed = common.seed;
      const Dataset d = make_synthetic(syn);
      save_dataset(common.out, d.cube, d.truth);
      std::cout << format_summary(summarize(d.cube, d.truth));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
