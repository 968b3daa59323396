#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ceunet/cluster.hpp"
#include "ceunet/hsi_data.hpp"
#include "ceunet/unet.hpp"

namespace ceunet {

enum class WeightScheme { Constant, Abundance, Random };

WeightScheme parse_weight_scheme(std::string_view s);
std::string_view to_string(WeightScheme w);

// Positive loss multipliers summing to 1, one per cluster.
std::vector<double> make_weights(WeightScheme scheme, std::span<const std::size_t> cluster_sizes, std::uint64_t seed);

struct EnsembleConfig {
  std::size_t k = 2;
  ClusterMethod method = ClusterMethod::KMeans;
  WeightScheme weight_scheme = WeightScheme::Constant;
  std::vector<double> omega;  // explicit weights; overrides weight_scheme when non-empty
  int epochs_per_subnet = 200;
  double learning_rate = 1e-4;
  std::size_t batch_size = 0;
  std::size_t min_cluster_size = 50;
  ClusterOptions cluster;
  UNetSpec network;  // patch, in_features and num_classes are taken from the data
};

// Seeds shared by the single-network and ensemble paths so that a one-cluster
// ensemble reproduces the single network exactly.
std::uint64_t trial_seed(std::uint64_t seed, int trial);
std::uint64_t subnet_seed(std::uint64_t trial_seed, std::size_t cluster);

// Centre-cell spectrum of every sample: the clusterer's input.
std::vector<float> routing_features(const SampleView& data);

struct EnsembleModel {
  ClusterModel cluster;
  std::vector<UNet<float>> subnets;
  std::vector<double> omega;
  EnsembleConfig config;
  std::vector<std::size_t> train_sizes;
  std::vector<double> train_seconds;
  double cluster_seconds = 0.0;
};

EnsembleModel train_ensemble(const SampleView& train, const EnsembleConfig& cfg, std::uint64_t seed);

struct ClusterOutcome {
  std::size_t test_size = 0;
  std::size_t correct = 0;
  // correct / total test size; these add up to the overall accuracy.
  double contribution = 0.0;
};

struct EnsembleEvaluation {
  std::vector<int> labels;  // aligned with the input order
  std::vector<int> routes;  // cluster of each input sample
  std::vector<ClusterOutcome> clusters;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;

  // Sum of the per-cluster contributions over their common denominator.
  double contribution_sum() const;
};

// Routes each sample through the fitted clusterer and its cluster's network.
// `test.labels` may be empty, in which case only labels/routes are produced.
EnsembleEvaluation predict_ensemble(const EnsembleModel& model, const SampleView& test);

struct LedgerRow {
  int trial = 0;
  int cluster = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t correct = 0;
  std::size_t test_total = 0;
  double contribution = 0.0;
  double train_seconds = 0.0;
};

struct TrialLedger {
  std::vector<LedgerRow> rows;
  std::vector<double> trial_accuracy;
  double mean = 0.0;
  double stddev = 0.0;

  void finalize();
};

// One trial on an already split and reduced pair.
std::vector<LedgerRow> run_trial(const SampleView& train, const SampleView& test, const EnsembleConfig& cfg,
                                 std::uint64_t seed, int trial_index);

TrialLedger run_trials(const LabeledPixelSet& ds, const EnsembleConfig& cfg, const SplitSpec& split);

}  // namespace ceunet
