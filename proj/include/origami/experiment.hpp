#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "origami/config.hpp"
#include "origami/ppo.hpp"

namespace origami {

EnvFactory make_env_factory(const ExperimentConfig& config);
std::unique_ptr<PpoTrainer> make_trainer(const ExperimentConfig& config);

// Layout: 8-byte magic, version byte, config hash (u64), config text, trainer
// state. Written to a temporary file and renamed, so an interrupted write
// leaves the previous checkpoint intact.
inline constexpr char kCheckpointMagic[9] = "ORIGAMCK";
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::string checkpoint_bytes(const ExperimentConfig& config, const PpoTrainer& trainer);
void save_checkpoint(const std::string& path, const ExperimentConfig& config,
                     const PpoTrainer& trainer);
// Reads the embedded config text without touching any trainer.
ExperimentConfig checkpoint_config(const std::string& path);
// Throws Error(kCheckpoint) on bad magic/version or a config hash mismatch.
void load_checkpoint(const std::string& path, const ExperimentConfig& config,
                     PpoTrainer& trainer);

void write_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

std::string train_log_header();
std::string train_log_row(const IterationStats& s);
std::string design_log_header(int dim);
std::string design_log_row(const IterationStats& s, const DesignDistribution& d);

struct TrainOptions {
  bool resume = false;
  // Stop after this many iterations in this invocation (the timestep budget
  // still applies).
  std::optional<int> max_iterations;
  std::function<void(const IterationStats&)> on_iteration;
};

struct TrainOutcome {
  std::vector<IterationStats> iterations;  // this invocation only
  std::string checkpoint_path;
  bool finished = false;
};

// Writes <out>/config.txt, train_log.csv, design_log.csv (co-optimization
// only) and checkpoint.bin.
TrainOutcome run_train(const ExperimentConfig& config, const TrainOptions& options = {});

struct EvalOutcome {
  EpisodeSummary summary;
  VecX design;
  std::vector<std::string> trace;  // JSON lines
};

// Deterministic rollout: mean action, design mode (or the fixed design).
EvalOutcome evaluate(const ExperimentConfig& config, const PpoTrainer& trainer);

}  // namespace origami
