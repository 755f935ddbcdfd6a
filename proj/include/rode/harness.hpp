#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rode/dataset.hpp"
#include "rode/evaluation.hpp"
#include "rode/trainer.hpp"

namespace rode {

// Synthetic benchmark: identities [0, train) train the models; the next
// `test_identities` form the held-out retrieval set. Both splits share the
// generator's modality offset.
struct BenchmarkSpec {
  SynthSpec synth;  // synth.identities = training identities
  int test_identities = 20;
};

struct BenchmarkData {
  Dataset train;
  Dataset test;
};

BenchmarkData make_benchmark(const BenchmarkSpec& spec);

// Zero-noise separable benchmark: 20 identities, 20 samples per modality each.
BenchmarkSpec sanity_benchmark(std::uint64_t seed);
TrainConfig sanity_config();

// Noisy benchmark used for the ablation, sweep, and loss-separation studies:
// 40 overlapping training identities, 30% injected label noise.
BenchmarkSpec standard_benchmark(std::uint64_t seed);
TrainConfig standard_config();

struct ModelMetrics {
  EvaluationReport joint;
  EvaluationReport model_a;
  EvaluationReport model_b;
};

struct RunResult {
  std::string name;
  std::uint64_t seed = 0;
  BenchmarkSpec benchmark;
  TrainConfig config;
  bool ok = false;
  std::string error;
  ModelMetrics metrics;
  RunLog log;
  double loss_auc = 0.0;  // clean/noisy separation at the final epoch (NaN if untagged)
};

struct PlanRun {
  std::string name;
  std::uint64_t seed = 0;
  BenchmarkSpec benchmark;
  TrainConfig config;
};

struct ExperimentPlan {
  std::vector<PlanRun> runs;
  std::filesystem::path output_dir;  // empty: nothing is written
};

void validate(const ExperimentPlan& plan);

// Runs every entry; a failing run is recorded and the plan continues. When the
// plan has an output directory, each run's document is written there.
std::vector<RunResult> run_plan(const ExperimentPlan& plan);
RunResult run_single(const PlanRun& run);

// Retrieval figures are the mean of the two query directions.
struct ResultRow {
  std::string name;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double rank1 = 0.0;
  double map = 0.0;
  double minp = 0.0;
  double loss_auc = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  // Mean over the ok rows with this name.
  std::optional<ResultRow> mean(const std::string& name) const;
  std::vector<std::string> names() const;
};

namespace variant {
inline constexpr const char* kFull = "RoDE";
inline constexpr const char* kNoRalIntra = "w/o RAL-intra";
inline constexpr const char* kNoRalInter = "w/o RAL-inter";
inline constexpr const char* kNoCcmCrossModel = "w/o CCM cross-model";
inline constexpr const char* kNoCcmCrossModal = "w/o CCM cross-modal";
inline constexpr const char* kSingleA = "single A";
inline constexpr const char* kSingleB = "single B";
inline constexpr const char* kDualTestA = "A+B (A)";
inline constexpr const char* kDualTestB = "A+B (B)";
}  // namespace variant

// Full method plus every ablation variant, on identical data and seeds.
ExperimentPlan make_ablation_plan(const BenchmarkSpec& benchmark, const TrainConfig& config,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::filesystem::path& output_dir = {});
// Rows for every plan run plus the two cross-trained-single-tested rows,
// evaluated from the full runs.
ResultTable run_ablation_suite(const ExperimentPlan& plan);

// One fixed-gamma run per value plus the adaptive run, per seed.
ExperimentPlan make_gamma_sweep_plan(const BenchmarkSpec& benchmark, const TrainConfig& config,
                                     const std::vector<double>& gammas,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::filesystem::path& output_dir = {});
ResultTable run_gamma_sweep(const ExperimentPlan& plan);
std::string gamma_row_name(std::optional<double> gamma);

// Tags each training target noisy when it was flipped or when the majority
// identity of its cluster (intra or inter) differs from the sample's own.
// `train` must be the dataset the log was produced on.
void tag_target_noise(RunLog& log, const Dataset& train);

// Probability that a random noisy-tagged loss exceeds a random clean one
// (ties count one half). NaN when either group is empty.
double loss_auc(std::span<const double> losses, const std::vector<bool>& noisy);

// Mean per (trained model, modality) AUC of the diagnostic loss against the
// noise tags for one epoch: identity-based tags when present, flipped-target
// tags otherwise.
double epoch_loss_auc(const EpochLog& epoch);

struct LossSeparation {
  std::vector<double> auc;  // per epoch
};

// Writes loss_hist_epoch_<n>.csv (bin_lo,bin_hi,clean,noisy) per epoch and
// loss_auc.csv. Throws if the log carries no clean/noisy tags.
LossSeparation export_loss_distributions(const RunLog& log, const std::filesystem::path& dir,
                                         int bins = 20);

struct MismatchSeries {
  std::vector<double> cross_modal;  // per epoch, averaged over the models
  std::vector<double> cross_model;  // per epoch, averaged over the modalities; NaN if absent
};

// Fraction of matched pairs whose clusters' majority ground-truth identities
// differ. `train` must be the dataset the log was produced on.
MismatchSeries mismatch_rates(const RunLog& log, const Dataset& train);
// Writes mismatch_rates.csv (epoch,cross_modal,cross_model).
MismatchSeries export_mismatch_rates(const RunLog& log, const Dataset& train,
                                     const std::filesystem::path& dir);

// Median of pairwise slopes; NaN values are skipped.
double theil_sen_slope(std::span<const double> series);

// Run documents: config snapshot, per-epoch logs, final metrics.
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunLog& log);
RunLog run_log_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvaluationReport& report);
nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Matching& matching);
Matching matching_from_json(const nlohmann::json& j);

void write_run_document(const RunResult& run, const std::filesystem::path& path);
RunResult read_run_document(const std::filesystem::path& path);

void write_table_csv(const ResultTable& table, const std::filesystem::path& path);
ResultTable read_table_csv(const std::filesystem::path& path);

// Structured metrics file for the eval subcommand.
void write_metrics(const EvaluationReport& report, const std::filesystem::path& path);

}  // namespace rode
