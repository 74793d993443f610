#pragma once

// Experiment orchestration behind the command-line tool: training with
// validation-based checkpoint selection, downstream evaluation grids, and
// the batch-size sensitivity study.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmim/checkpoint.hpp"
#include "cmim/config.hpp"
#include "cmim/datasets.hpp"
#include "cmim/embed.hpp"
#include "cmim/probes.hpp"
#include "cmim/stats.hpp"
#include "cmim/toy2d.hpp"

namespace cmim {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
  kExitVerification = 5,
  kExitIo = 6,
};

/// Root directory for IDX data: $CMIM_DATA_ROOT, else "./data".
std::filesystem::path data_root_from_env();

/// Expands "synth_blobs:<seed>" with the config's synthetic shape into the
/// self-contained form
/// "synth_blobs:<seed>:<classes>x<per_class>:<side>:<jitter>:<pixel noise>".
/// Other specs are returned unchanged.
std::string canonical_dataset_spec(const std::string& spec, const RunConfig& config);

/// Builds a dataset from a (canonical or short) spec. "idx:<name>" reads
/// <data_root>/manifest.csv. Throws DataError.
Dataset load_dataset(const std::string& spec, const RunConfig& config,
                     const std::filesystem::path& data_root);

/// File-name-safe version of a dataset spec.
std::string dataset_tag(const std::string& spec);

struct TrainLogRow {
  long step = 0;
  double train_loss = 0.0;  // mean over steps since the previous row
  double lr_multiplier = 0.0;
  LossBreakdown val;
};

struct TrainOutcome {
  ModelBundle best;
  ModelBundle last;
  CheckpointMeta best_meta;
  CheckpointMeta last_meta;
  LossBreakdown best_val;
  LossBreakdown last_val;
  std::vector<TrainLogRow> log;
};

/// Loss of the whole validation split as a single batch with fixed noise
/// (and a fixed augmented view for InfoNCE).
LossBreakdown validation_loss(const ModelBundle& model, const Dataset& ds, std::uint64_t seed);

/// Adam + WSD training; evaluates validation loss every val_interval steps
/// and at the last step, keeping the lowest-loss parameters. Throws
/// DivergenceError with the failing step.
TrainOutcome train_model(const RunConfig& config, const Dataset& ds, const std::string& run_name);

/// Writes best.cmm, final.cmm, train_log.csv and config.txt into out_dir.
/// Returns the path of best.cmm.
std::filesystem::path cmd_train(const RunConfig& config, const std::filesystem::path& out_dir);

enum class Classifier { knn5_cosine, knn5_euclidean, mlp };
std::string_view classifier_name(Classifier c) noexcept;

struct EvalSetting {
  Classifier classifier;
  EmbeddingKind kind;
  std::string name() const;  // "<classifier>/<embedding kind>"
};

/// The 3 classifiers x 2 embeddings grid, mean encodings first.
const std::vector<EvalSetting>& eval_settings();

/// One evaluated checkpoint (or in-memory model) and setting.
struct EvalRun {
  std::string model;  // run name shared across seeds
  Variant variant = Variant::cMIM;
  int batch_size = 0;
  std::uint64_t seed = 0;
  std::string dataset;
  EvalSetting setting{Classifier::mlp, EmbeddingKind::mean_encoding};
  double accuracy = 0.0;
};

/// Seed-averaged accuracy of a (model, batch size, dataset, setting) cell with
/// z-score and rank within its (dataset, setting) population.
struct EvalCell {
  std::string model;
  Variant variant = Variant::cMIM;
  int batch_size = 0;
  std::string dataset;
  EvalSetting setting{Classifier::mlp, EmbeddingKind::mean_encoding};
  double accuracy = 0.0;
  double accuracy_sd = 0.0;
  int seeds = 0;
  double z = 0.0;
  double rank = 0.0;
};

struct EvalReport {
  std::vector<EvalRun> runs;
  std::vector<EvalCell> cells;
};

struct ModelForEval {
  CheckpointMeta meta;
  ModelBundle model;
};

/// Runs every supported setting on each model; probes fit on the train
/// split and score on the test split.
std::vector<EvalRun> evaluate_model(const ModelForEval& m, const Dataset& ds, long probe_steps);

/// Groups runs into cells and fills z-scores and ranks.
std::vector<EvalCell> aggregate_runs(const std::vector<EvalRun>& runs);

/// Writes eval_report.csv, eval_runs.csv and summary SVGs.
void write_eval_outputs(const EvalReport& report, const RunConfig& config,
                        const std::filesystem::path& out_dir);

/// Loads checkpoints, regenerates their datasets and evaluates them.
EvalReport cmd_eval(const std::vector<std::filesystem::path>& checkpoints, const RunConfig& config,
                    const std::filesystem::path& out_dir);

struct SlopeRow {
  std::string model;
  std::string setting;
  std::string dataset;
  double slope = 0.0;
};

struct SensitivityResult {
  EvalReport report;
  std::vector<SlopeRow> slopes;
  std::map<std::string, SlopeStats> summary;  // per model
};

/// Slopes of z-score on raw batch size per (model, dataset, setting) and a
/// t-test of the per-model mean slope.
SensitivityResult sensitivity_from_report(EvalReport report);

/// Trains the grid (variants x datasets x batch sizes x seeds), evaluates
/// it, and writes slopes, the per-model summary and the slope SVG. Each run
/// keeps best.cmm and train_log.csv under runs/<dataset>/<variant>_b<B>_s<seed>.
SensitivityResult cmd_sensitivity(const RunConfig& config, const std::filesystem::path& out_dir);

/// Runs the toy on config.seed and writes CSV/SVG snapshots.
ToyTrajectory cmd_toy2d(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace cmim
