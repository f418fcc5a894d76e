#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "origami/forward_solver.hpp"

namespace origami {

// Fixed tendon schedule: d1 = 128 t, d2 = 100 sin(pi t / 2), d3 = 100 t^2,
// sampled at t_k = k / samples, k = 1..samples.
struct ActuationSchedule {
  int samples = 50;

  static TendonCommand at(double t);
  std::vector<double> times() const;
  std::vector<TendonCommand> commands() const;
};

// Named stiffness sets S1..S5 (12 entries each, written for four modules).
std::vector<std::string> stiffness_set_names();
std::vector<double> stiffness_set_base(const std::string& name);
// Cyclic repetition (or truncation) of `base` to n_chords entries.
VecX pad_stiffness(const std::vector<double>& base, int n_chords);
// Throws kInvalidArgument listing the available names.
VecX named_stiffness(const std::string& name, int n_chords);

struct TrajectoryResult {
  std::vector<double> times;
  std::vector<TendonCommand> commands;
  std::vector<ShapeSolution> solutions;
};

TrajectoryResult demo_trajectory(const VecX& stiffness,
                                 const ActuationSchedule& schedule,
                                 const ManipulatorParams& params,
                                 const ForwardSolverOptions& options = {});

// Largest distance between tips of the two trajectories at equal sample index.
double max_tip_separation(const TrajectoryResult& a, const TrajectoryResult& b);

struct WorkspaceCloud {
  std::vector<Vec3> points;           // converged tips only
  std::vector<std::int64_t> ids;      // sample index of each point
  std::vector<TendonCommand> commands;  // every sample, in index order
  std::vector<Vec3> tips;               // every sample; NaN when failed
  std::vector<bool> converged;
  int failures = 0;
  std::uint64_t seed = 0;
  VecX stiffness;
};

// Uniform command for sample `index`; depends only on (seed, index).
TendonCommand workspace_command(std::uint64_t seed, std::int64_t index,
                                const ManipulatorParams& params);

// Every sample is solved cold from rest, so any worker count gives the same cloud.
WorkspaceCloud sample_workspace(const VecX& stiffness, int n, std::uint64_t seed,
                                const ManipulatorParams& params, int workers = 1);

struct VoxelComparison {
  std::int64_t count_a = 0;
  std::int64_t count_b = 0;
  std::int64_t union_count = 0;
  std::int64_t intersection = 0;
  std::int64_t symmetric_difference = 0;
  double difference_fraction() const {
    return union_count ? static_cast<double>(symmetric_difference) / union_count : 0.0;
  }
};

VoxelComparison workspace_compare(const std::vector<Vec3>& a,
                                  const std::vector<Vec3>& b, double voxel);

void write_trajectory_csv(std::ostream& out, const TrajectoryResult& traj);
void write_workspace_csv(std::ostream& out, const WorkspaceCloud& cloud);

}  // namespace origami
