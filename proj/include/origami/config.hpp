#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "origami/design.hpp"
#include "origami/env.hpp"
#include "origami/forward_solver.hpp"
#include "origami/ppo.hpp"

namespace origami {

// Flat `section.key = value` text. '#' starts a comment; blank lines are
// ignored. Each entry remembers where it came from for error messages.
class ConfigMap {
 public:
  struct Entry {
    std::string value;
    std::string origin;  // "file.cfg:12", "env ORIGAMI_X", "--seed", ...
  };

  static ConfigMap parse(const std::string& text, const std::string& source);
  static ConfigMap load_file(const std::string& path);

  void set(const std::string& key, const std::string& value, const std::string& origin);
  // Later layers win.
  void merge(const ConfigMap& other);
  // ORIGAMI_TRAIN__SEED=3 sets train.seed (double underscore = dot).
  void apply_environment(const std::string& prefix = "ORIGAMI_");

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const Entry& at(const std::string& key) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

struct RunOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out = "out";
  int checkpoint_every = 10;  // iterations
};

struct ExperimentConfig {
  ManipulatorParams manipulator;
  ForwardSolverOptions solver;
  std::string task_name = "one-obstacle";
  TaskSpec task = one_obstacle_task();
  TrainConfig train;
  DesignConfig design;
  // Empty: co-optimize the design. Otherwise a set name (S1..S5) or a
  // comma-separated vector of 3N values.
  std::string fixed_stiffness;
  int schedule_samples = 50;
  int workspace_samples = 20000;
  double workspace_voxel = 5.0;
  std::string trajectory_set = "S1";
  std::vector<std::string> workspace_sets = {"S4", "S5"};
  RunOptions run;

  static ExperimentConfig defaults();
  // Throws Error(kConfig) naming the key and where it was set.
  static ExperimentConfig from_map(const ConfigMap& map);

  // Cross-field checks; throws Error(kConfig).
  void validate() const;
  // Every setting as `key = value` lines, sorted, round-trippable.
  std::string to_text() const;
  // Fingerprint of everything that changes training results (run.* excluded).
  std::uint64_t hash() const;

  bool co_optimize() const { return fixed_stiffness.empty(); }
  VecX resolve_stiffness(const std::string& spec) const;
  VecX fixed_design() const;
};

// Comma/space separated numbers.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace origami
