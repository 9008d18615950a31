#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "treesmu/cells.hpp"
#include "treesmu/expr.hpp"
#include "treesmu/metrics.hpp"
#include "treesmu/model.hpp"
#include "treesmu/param_store.hpp"

namespace treesmu::training {

// accumulate: one graph per example, gradients summed over the batch.
// shape: examples of a batch sharing a shape key run as one column batch.
enum class BatchMode { Accumulate, Shape };

struct GridSpec {
  std::vector<std::size_t> hidden{50, 55, 60, 80, 100, 120};
  std::vector<double> dropout{0, 0.1, 0.15, 0.2, 0.25};
  std::vector<std::size_t> stack{1, 2, 3, 4, 5, 7, 14};
  // Empty means the architecture of TrainConfig::model.
  std::vector<cells::Architecture> architectures;
};

struct TrainConfig {
  cells::ModelConfig model;
  ad::AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  // Stop after this many epochs without a new best validation accuracy; 0
  // disables early stopping.
  std::size_t patience = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  BatchMode batching = BatchMode::Accumulate;
  std::filesystem::path train_path;
  std::filesystem::path validation_path;
  double subsample = 1.0;
  // false: train metrics come from the running (dropout) pass of each epoch;
  // true: from a clean evaluation pass after the epoch.
  bool full_train_metrics = false;
  GridSpec grid;

  void validate() const;
  nlohmann::json to_json() const;
  // Unknown keys are a ConfigError. Relative paths resolve against base_dir.
  static TrainConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  // Hex FNV-1a of everything except seeds and data paths.
  std::string hash() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double loss = 0;
  double median_loss = 0;  // not written to the CSV
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_validation_accuracy = 0;
  std::filesystem::path best_checkpoint;  // empty when nothing was written

  nlohmann::json to_json() const;
};

struct TrainOutcome {
  RunRecord record;
  cells::Model best;  // parameters at the best validation epoch
};

// Default alphabet plus every terminal of the given equations.
expr::Vocab build_vocab(std::span<const expr::Equation> equations);

// Label held by the larger part of the equations; ties go to Correct.
expr::Label majority_label(std::span<const expr::Equation> equations);

// Seeded uniform subsample of round(fraction * size) equations in their
// original order. fraction 1 returns the input unchanged.
std::vector<expr::Equation> subsample(std::span<const expr::Equation> equations, double fraction,
                                      std::uint64_t seed);

// Metrics and mean BCE of a model over equations, one forward per equation.
EpochMetrics evaluate(const cells::Model& model, std::span<const expr::Equation> equations);

// Trains one seed. With out_dir set, writes metrics.csv, best.ckpt and
// run.json there. Non-finite loss throws TrainingError naming the equation.
// `initial` replaces the seeded initialization (its vocabulary must cover
// the training set).
TrainOutcome train(const TrainConfig& config, std::uint64_t seed,
                   std::span<const expr::Equation> train_set,
                   std::span<const expr::Equation> validation_set,
                   const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                   const cells::Model* initial = nullptr);

// Reads config.train_path / validation_path, applies config.subsample with
// the run seed, and trains.
RunRecord train(const TrainConfig& config, std::uint64_t seed,
                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// Same as train() after overriding the subsample fraction.
RunRecord subsample_train(TrainConfig config, double fraction, std::uint64_t seed,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct GridEntry {
  cells::ModelConfig model;
  std::string config_hash;
  double mean_validation_accuracy = 0;
  double sd_validation_accuracy = 0;
  std::vector<RunRecord> runs;

  nlohmann::json to_json() const;
};

struct GridResult {
  std::vector<GridEntry> leaderboard;  // sorted by mean validation accuracy, best first
  std::map<cells::Architecture, GridEntry> best;
};

// Every grid point x seed is trained (jobs workers); entries are ranked by
// mean validation accuracy. Writes leaderboard.json and one directory per
// run under out_dir. The stack grid only applies to stack architectures.
GridResult grid_search(const TrainConfig& config, const std::filesystem::path& out_dir,
                       int jobs = 1);

// The model configurations a grid expands to, in training order.
std::vector<cells::ModelConfig> grid_points(const TrainConfig& config);

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> rows);

}  // namespace treesmu::training
