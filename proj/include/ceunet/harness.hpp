#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ceunet/cae.hpp"
#include "ceunet/cluster.hpp"
#include "ceunet/ensemble.hpp"
#include "ceunet/hsi_data.hpp"
#include "ceunet/io.hpp"
#include "ceunet/patching.hpp"
#include "ceunet/pca.hpp"

namespace ceunet {

enum class ReducerMethod { None, Pca, Cae2d, Cae3d };
enum class ModelKind { UNet, CeuNet };

ReducerMethod parse_reducer(std::string_view s);
std::string_view to_string(ReducerMethod r);
ModelKind parse_model(std::string_view s);
std::string_view to_string(ModelKind m);

// A spectral reducer fitted on training spectra.
class Reducer {
 public:
  static Reducer fit(ReducerMethod method, std::span<const float> samples, std::size_t dim, std::size_t out_dim,
                     std::uint64_t seed, int epochs = 0);

  ReducerMethod method() const { return method_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  std::vector<float> transform(std::span<const float> samples) const;
  void save(const std::filesystem::path& path);

  const PcaModel* pca() const { return pca_ ? &*pca_ : nullptr; }
  const CaeModel* cae() const { return cae_.get(); }

 private:
  ReducerMethod method_ = ReducerMethod::None;
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  std::optional<PcaModel> pca_;
  std::shared_ptr<CaeModel> cae_;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string study;  // "", "grid", "weights" or "timing"
  std::filesystem::path dataset;

  ReducerMethod reducer = ReducerMethod::Pca;
  std::size_t reduced_dim = 0;  // 0: 32 for cae2d, 30 otherwise
  int reducer_epochs = 0;  // 0: the autoencoder default

  std::optional<PatchMode> patch;
  std::size_t patch_n = 10;
  PadPolicy pad = PadPolicy::Zero;

  ModelKind model = ModelKind::CeuNet;
  std::size_t k = 2;
  ClusterMethod cluster = ClusterMethod::KMeans;
  WeightScheme weights = WeightScheme::Constant;
  std::vector<double> omega;
  std::size_t min_cluster_size = 50;

  double test_fraction = 0.25;
  int trials = 5;
  std::uint64_t seed = 0;
  std::optional<int> epochs;  // unset: 150 for unet, 200 per ensemble subnet; 0 skips training
  double learning_rate = 1e-4;
  std::size_t batch_size = 0;
  bool parallel_trials = false;
  std::filesystem::path checkpoint_dir;

  int resolved_epochs() const;
  std::size_t resolved_dim() const;
  void validate() const;
  io::Json to_json() const;
  static ExperimentConfig from_json(const io::Json& j);
};

ExperimentConfig load_config(const std::filesystem::path& path);

struct TrialTiming {
  double reduction = 0.0;
  double patching = 0.0;
  double clustering = 0.0;
  double training = 0.0;
  double prediction = 0.0;
  double per_epoch = 0.0;  // mean training seconds per epoch, first epoch excluded
  int epochs = 0;
};

struct Report {
  ExperimentConfig config;
  std::string dataset;
  bool ok = true;
  std::string failed_stage;
  std::string failure;
  bool trained = true;
  TrialLedger ledger;
  std::vector<TrialTiming> timings;
  std::vector<std::vector<double>> omega;  // per trial
  std::string hardware;
  bool timing_comparable = true;

  double min_accuracy() const;
  double max_accuracy() const;
  TrialTiming mean_timing() const;
  io::Json to_json() const;
  static Report from_json(const io::Json& j);
};

std::string hardware_note();

Report run_experiment(const ExperimentConfig& cfg);
Report run_experiment(const ExperimentConfig& cfg, const Dataset& data);

// kmeans/gmm x k grid; infeasible cells come back as failed reports.
std::vector<Report> grid_cluster_tuning(const Dataset& data, const ExperimentConfig& base,
                                        std::span<const ClusterMethod> methods, std::size_t k_min,
                                        std::size_t k_max);
// Index of the best successful grid report, if any.
std::optional<std::size_t> best_report(std::span<const Report> reports);

// Same splits across schemes.
std::vector<Report> weight_study(const Dataset& data, const ExperimentConfig& base,
                                 std::span<const WeightScheme> schemes);

// U-Net and CEU-Net, each without patching and with CPC patches of side patch_n.
std::vector<Report> timing_comparison(const Dataset& data, const ExperimentConfig& base, std::size_t patch_n = 10);

struct LedgerCsvRow {
  std::string experiment;
  std::string dataset;
  std::string model;
  LedgerRow row;
  friend bool operator==(const LedgerCsvRow&, const LedgerCsvRow&);
};

struct TrialCsvRow {
  std::string experiment;
  std::string dataset;
  std::string model;
  int trial = 0;
  double accuracy = 0.0;
  TrialTiming timing;
  friend bool operator==(const TrialCsvRow&, const TrialCsvRow&);
};

std::vector<LedgerCsvRow> ledger_rows(std::span<const Report> reports);
std::vector<TrialCsvRow> trial_rows(std::span<const Report> reports);
std::string format_ledger_csv(std::span<const LedgerCsvRow> rows);
std::vector<LedgerCsvRow> parse_ledger_csv(std::string_view text);
std::string format_trials_csv(std::span<const TrialCsvRow> rows);
std::vector<TrialCsvRow> parse_trials_csv(std::string_view text);

std::string format_report(std::span<const Report> reports);

// report.txt, ledger.csv, trials.csv, results.json and series/*.tsv under
// `out`. Returns the files written; an empty list writes nothing.
std::vector<std::filesystem::path> emit_outputs(std::span<const Report> reports, const std::filesystem::path& out,
                                                std::ostream& notice);

std::vector<Report> load_results(const std::filesystem::path& results_json);

}  // namespace ceunet
