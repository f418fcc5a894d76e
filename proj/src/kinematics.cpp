#include "origami/kinematics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <unordered_set>

#include "origami/util.hpp"

namespace origami {

namespace {

const std::map<std::string, std::vector<double>>& stiffness_sets() {
  static const std::map<std::string, std::vector<double>> sets = [] {
    const std::vector<double> s1 = {1.37, 1.65, 0.66, 1.30, 0.64, 0.97,
                                    0.68, 2.28, 0.76, 0.42, 1.23, 1.06};
    auto right_shift = [](std::vector<double> v, int k) {
      std::vector<double> out(v.size());
      for (size_t i = 0; i < v.size(); ++i) out[(i + k) % v.size()] = v[i];
      return out;
    };
    std::vector<double> s4, s5;
    for (int j = 0; j < 4; ++j) {
      s4.insert(s4.end(), {2.50, 0.80, 0.80});
    }
    s5 = {0.80, 2.50, 0.80, 0.80, 2.50, 0.80, 0.80, 2.50, 0.80, 2.50, 0.80, 0.80};
    return std::map<std::string, std::vector<double>>{
        {"S1", s1},
        {"S2", right_shift(s1, 1)},
        {"S3", right_shift(s1, 2)},
        {"S4", s4},
        {"S5", s5},
    };
  }();
  return sets;
}

}  // namespace

TendonCommand ActuationSchedule::at(double t) {
  return TendonCommand(128.0 * t, 100.0 * std::sin(M_PI * t / 2.0), 100.0 * t * t);
}

std::vector<double> ActuationSchedule::times() const {
  if (samples < 1) throw Error(ErrorKind::kInvalidArgument, "schedule needs >= 1 sample");
  std::vector<double> t(samples);
  for (int k = 0; k < samples; ++k) t[k] = static_cast<double>(k + 1) / samples;
  return t;
}

std::vector<TendonCommand> ActuationSchedule::commands() const {
  std::vector<TendonCommand> out;
  for (double t : times()) out.push_back(at(t));
  return out;
}

std::vector<std::string> stiffness_set_names() {
  std::vector<std::string> names;
  for (const auto& [name, v] : stiffness_sets()) names.push_back(name);
  return names;
}

std::vector<double> stiffness_set_base(const std::string& name) {
  const auto& sets = stiffness_sets();
  auto it = sets.find(name);
  if (it == sets.end()) {
    std::string known;
    for (const auto& n : stiffness_set_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorKind::kInvalidArgument,
                "unknown stiffness set '" + name + "' (available: " + known + ")");
  }
  return it->second;
}

VecX pad_stiffness(const std::vector<double>& base, int n_chords) {
  if (base.empty()) throw Error(ErrorKind::kInvalidArgument, "empty stiffness set");
  VecX s(n_chords);
  for (int q = 0; q < n_chords; ++q) s[q] = base[q % base.size()];
  return s;
}

VecX named_stiffness(const std::string& name, int n_chords) {
  return pad_stiffness(stiffness_set_base(name), n_chords);
}

TrajectoryResult demo_trajectory(const VecX& stiffness,
                                 const ActuationSchedule& schedule,
                                 const ManipulatorParams& params,
                                 const ForwardSolverOptions& options) {
  TrajectoryResult out;
  out.times = schedule.times();
  out.commands = schedule.commands();
  out.solutions = solve_trajectory(out.commands, stiffness, params, options);
  return out;
}

double max_tip_separation(const TrajectoryResult& a, const TrajectoryResult& b) {
  if (a.solutions.size() != b.solutions.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "trajectories differ in length");
  }
  double best = 0.0;
  for (size_t k = 0; k < a.solutions.size(); ++k) {
    best = std::max(best, (a.solutions[k].tip - b.solutions[k].tip).norm());
  }
  return best;
}

TendonCommand workspace_command(std::uint64_t seed, std::int64_t index,
                                const ManipulatorParams& params) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  const double hi = params.max_displacement();
  TendonCommand d;
  // Top 53 bits -> [0, 1); avoids distribution implementation differences.
  for (int i = 0; i < 3; ++i) d[i] = hi * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return d;
}

WorkspaceCloud sample_workspace(const VecX& stiffness, int n, std::uint64_t seed,
                                const ManipulatorParams& params, int workers) {
  if (n < 1) throw Error(ErrorKind::kInvalidArgument, "workspace needs n >= 1");
  validate_stiffness(stiffness, params);
  ForwardSolverOptions options;
  options.tension_mode = TensionMode::kMultiplier;
  const ForwardSolver solver(params, options);

  WorkspaceCloud cloud;
  cloud.seed = seed;
  cloud.stiffness = stiffness;
  cloud.commands.resize(n);
  cloud.tips.assign(n, Vec3::Constant(std::numeric_limits<double>::quiet_NaN()));
  std::vector<char> ok(n, 0);
  parallel_for(n, workers, [&](std::int64_t i) {
    cloud.commands[i] = workspace_command(seed, i, params);
    try {
      cloud.tips[i] = solver.solve(cloud.commands[i], stiffness).tip;
      ok[i] = 1;
    } catch (const Error&) {
    }
  });
  cloud.converged.resize(n);
  for (int i = 0; i < n; ++i) {
    cloud.converged[i] = ok[i];
    if (ok[i]) {
      cloud.points.push_back(cloud.tips[i]);
      cloud.ids.push_back(i);
    } else {
      ++cloud.failures;
    }
  }
  return cloud;
}

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct VoxelHash {
  size_t operator()(const VoxelKey& k) const {
    return splitmix64(static_cast<std::uint64_t>(k.x) * 0x100000001b3ULL ^
                      splitmix64(static_cast<std::uint64_t>(k.y)) ^
                      (static_cast<std::uint64_t>(k.z) << 21));
  }
};

std::unordered_set<VoxelKey, VoxelHash> occupancy(const std::vector<Vec3>& pts,
                                                  double voxel) {
  std::unordered_set<VoxelKey, VoxelHash> cells;
  for (const Vec3& p : pts) {
    cells.insert({static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.z() / voxel))});
  }
  return cells;
}

}  // namespace

VoxelComparison workspace_compare(const std::vector<Vec3>& a,
                                  const std::vector<Vec3>& b, double voxel) {
  if (!(voxel > 0.0)) throw Error(ErrorKind::kInvalidArgument, "voxel must be > 0");
  const auto ca = occupancy(a, voxel);
  const auto cb = occupancy(b, voxel);
  VoxelComparison out;
  out.count_a = static_cast<std::int64_t>(ca.size());
  out.count_b = static_cast<std::int64_t>(cb.size());
  for (const auto& k : ca) out.intersection += cb.count(k);
  out.union_count = out.count_a + out.count_b - out.intersection;
  out.symmetric_difference = out.union_count - out.intersection;
  return out;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryResult& traj) {
  out << "t,d1,d2,d3,tip_x,tip_y,tip_z,E,tension1,tension2,tension3\n";
  for (size_t k = 0; k < traj.solutions.size(); ++k) {
    const auto& s = traj.solutions[k];
    const auto& d = traj.commands[k];
    out << csv_row({fmt9(traj.times[k]), fmt9(d[0]), fmt9(d[1]), fmt9(d[2]),
                    fmt9(s.tip[0]), fmt9(s.tip[1]), fmt9(s.tip[2]), fmt9(s.energy),
                    fmt9(s.tensions[0]), fmt9(s.tensions[1]), fmt9(s.tensions[2])})
        << '\n';
  }
}

void write_workspace_csv(std::ostream& out, const WorkspaceCloud& cloud) {
  out << "sample_id,d1,d2,d3,tip_x,tip_y,tip_z,converged\n";
  for (size_t i = 0; i < cloud.commands.size(); ++i) {
    const auto& d = cloud.commands[i];
    const auto& t = cloud.tips[i];
    out << csv_row({std::to_string(i), fmt9(d[0]), fmt9(d[1]), fmt9(d[2]), fmt9(t[0]),
                    fmt9(t[1]), fmt9(t[2]), cloud.converged[i] ? "1" : "0"})
        << '\n';
  }
}

}  // namespace origami
