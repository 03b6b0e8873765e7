#pragma once

// End-to-end evaluation protocols on synthetic or ingested embedding domains.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "promix/embedspace.hpp"
#include "promix/eval.hpp"
#include "promix/losses.hpp"
#include "promix/mixture.hpp"
#include "promix/outclass.hpp"
#include "promix/stats.hpp"
#include "promix/train.hpp"

namespace promix {

// Externally computed embeddings: train/test sample files and one
// generalized-anchor file, all in the EMB1 layout.
struct EmbeddingFiles {
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path prototypes;
};

using DataSource = std::variant<SyntheticConfig, EmbeddingFiles>;

// Synthetic sources draw with seed `config.seed + seed_offset`; files ignore
// the offset and leave true_prototypes empty.
SyntheticDomain load_domain(const DataSource& source, std::uint64_t seed_offset = 0);

// Seed of the partition / training streams for replicate `seed`.
std::uint64_t source_seed(const DataSource& source, std::uint64_t seed);

struct SplitMetrics {
  double base = 0.0;
  double novel = 0.0;
  double h = 0.0;
};

SplitMetrics mean_metrics(std::span<const SplitMetrics> runs);

// Zero-initialized coordinates for `prompts` specialized heads. Direct
// weights have nothing to optimize and are rejected.
MixtureWeights initial_weights(Parameterization p, std::size_t prompts, double tau);

// Anchors for `strategy`; word-based kinds draw from a vocabulary pool of
// `pool_size` entries built with `pool_noise`.
std::vector<Embedding> make_outclass_anchors(const OutclassStrategy& strategy,
                                             std::size_t in_count, std::size_t dim,
                                             double pool_noise, std::size_t pool_size,
                                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Base-to-new

struct BaseToNewConfig {
  DataSource data = SyntheticConfig{};
  HyperParams hyper;
  LossConfig loss;  // loss of the CoA-tuned heads; baselines use plain CE
  OptimizerConfig opt;
  OutclassStrategy outclass;
  Parameterization weights = Parameterization::kTwoStage;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  double tau = kDefaultTemperature;
  std::size_t vocab_pool_size = 256;
  // Also run CoCoA-Mix with the other parameterization.
  bool compare_parameterizations = true;
};

struct ConfigurationResult {
  std::string name;
  std::vector<SplitMetrics> per_seed;
  SplitMetrics mean;
};

struct MixtureWeightSummary {
  double pi_in = 0.0;
  double pi_out = 0.0;
  bool in_monotone = true;
  bool out_monotone = true;
  bool out_skipped = false;
};

struct ParameterizationComparison {
  SplitMetrics one_stage;
  SplitMetrics two_stage;
  double h_difference = 0.0;  // |H(one) - H(two)|
};

struct BaseToNewReport {
  std::vector<std::uint64_t> seeds;
  // zero_shot, uniform_ensemble, coa_uniform, cocoa_mix, in that order.
  std::vector<ConfigurationResult> configurations;
  SplitMetrics head_ce;   // CE-tuned head alone
  SplitMetrics head_coa;  // CoA-tuned head alone
  std::vector<MixtureWeightSummary> cocoa_weights;  // per seed
  std::optional<ParameterizationComparison> parameterizations;

  const ConfigurationResult& configuration(std::string_view name) const;
};

inline constexpr const char* kZeroShot = "zero_shot";
inline constexpr const char* kUniformEnsemble = "uniform_ensemble";
inline constexpr const char* kCoaUniform = "coa_uniform";
inline constexpr const char* kCocoaMix = "cocoa_mix";

// Seeds run on up to `jobs` threads; results are reduced in seed order.
BaseToNewReport base_to_new_eval(const BaseToNewConfig& config, std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// FSCIL

struct FscilConfig {
  // The base session trains on every sample; later sessions are few-shot.
  DataSource data = SyntheticConfig{.num_classes = 100};
  SessionSchedule schedule;
  std::size_t incremental_shots = 5;
  HyperParams hyper{.margin = 0.1, .context_length = 2};
  LossConfig loss;
  OptimizerConfig opt;
  std::size_t first_session_weight_epochs = 2;
  std::size_t later_session_weight_epochs = 100;
  OutclassStrategy first_session_outclass;
  std::uint64_t seed = 0;
  double tau = kDefaultTemperature;
  std::size_t vocab_pool_size = 256;
};

struct FscilReport {
  std::vector<double> session_accuracy;  // accumulated mixture, all seen classes
  std::vector<double> zero_shot_accuracy;
  double mean = 0.0;
  double pd = 0.0;  // first minus last
  // Session-1 classes, scored against all classes seen at the final session.
  double retention_mixture = 0.0;
  double retention_zero_shot = 0.0;
  std::vector<MixtureWeightSummary> weights;
};

FscilReport fscil_run(const FscilConfig& config);

// ---------------------------------------------------------------------------
// Assumption check

struct AssumptionConfig {
  DataSource data = SyntheticConfig{.num_classes = 100};
  std::size_t splits = 10;
  HyperParams hyper;
  LossConfig loss;
  OptimizerConfig opt;
  double tau = kDefaultTemperature;
};

struct TTestOutcome {
  std::optional<TTestResult> result;  // unset when degenerate
  bool degenerate = false;
  bool significant = false;
};

TTestOutcome guarded_t_test(std::span<const double> diffs, double alpha = 0.05);

struct AssumptionReport {
  std::vector<double> in_domain_gaps;   // acc(t_i) - acc(t_0) on Y_i
  std::vector<double> out_domain_gaps;  // acc(t_0) - acc(t_i) off Y_i
  TTestOutcome in_domain;
  TTestOutcome out_domain;
  bool validated = false;
};

AssumptionReport assumption_check(const AssumptionConfig& config, std::size_t jobs = 1);

// Same test on precomputed gaps.
AssumptionReport assumption_from_gaps(std::vector<double> in_gaps, std::vector<double> out_gaps);

// ---------------------------------------------------------------------------
// Confusing-sample analysis

struct ConfusingGainConfig {
  DataSource data = SyntheticConfig{.confusion_pairs = 5};
  OptimizerConfig opt;
  std::size_t context_length = 16;
  double w_baseline = 0.0;
  double w_coa = 5.0;
  double gap_threshold = kDefaultGapThreshold;
  double tau = kDefaultTemperature;
};

struct SubsetAccuracy {
  double easy = 0.0;
  double confusing = 0.0;
  double hard = 0.0;
  double all = 0.0;
};

struct ConfusingGainReport {
  CategoryCounts counts;  // zero-shot categorization of the test set
  std::vector<SubsetAccuracy> baseline_curve;  // per epoch
  std::vector<SubsetAccuracy> coa_curve;
  SubsetAccuracy baseline_final;
  SubsetAccuracy coa_final;
  SubsetAccuracy delta;  // coa - baseline
};

ConfusingGainReport confusing_gain(const ConfusingGainConfig& config);

// ---------------------------------------------------------------------------
// Jensen gap sweep

struct BoundSweepConfig {
  std::size_t trials = 1000;
  std::size_t min_prompts = 1;
  std::size_t max_prompts = 4;
  std::size_t min_classes = 2;
  std::size_t max_classes = 20;
  std::size_t dim = 16;
  std::size_t samples = 8;
  double tau = kDefaultTemperature;
  std::uint64_t seed = 0;
};

struct BoundSweepReport {
  std::size_t trials = 0;
  double min_gap = 0.0;
  double max_gap = 0.0;
  double mean_gap = 0.0;
  std::size_t violations = 0;  // gap < -1e-12
  double identical_heads_gap = 0.0;
};

BoundSweepReport bound_sweep(const BoundSweepConfig& config);

// ---------------------------------------------------------------------------
// Loss comparison

struct LossZooConfig {
  DataSource data = SyntheticConfig{};
  std::vector<LossConfig> losses;  // empty: every loss kind with defaults
  OptimizerConfig opt;
  std::size_t context_length = 16;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  double tau = kDefaultTemperature;
};

struct LossZooRow {
  LossConfig loss;
  SplitMetrics metrics;  // tuned head alone, mean over seeds
};

std::vector<LossZooRow> loss_zoo(const LossZooConfig& config, std::size_t jobs = 1);

}  // namespace promix
