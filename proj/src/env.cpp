#include "origami/env.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace origami {

void ObstacleRect::validate() const {
  if (!(y_max > y_min) || !(z_max > z_min) || !std::isfinite(plane_x)) {
    throw Error(ErrorKind::kInvalidArgument, "obstacle rectangle is degenerate");
  }
}

void TaskSpec::validate() const {
  if (!(success_threshold > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "success_threshold must be > 0");
  }
  if (!(reward.collision >= 0.0 && reward.success >= 0.0 && reward.distance >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "reward constants must be >= 0");
  }
  if (horizon < 1) throw Error(ErrorKind::kInvalidArgument, "horizon must be >= 1");
  if (!(action_bound > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "action_bound must be > 0");
  }
  if (!goal.allFinite()) throw Error(ErrorKind::kInvalidArgument, "goal must be finite");
  for (const auto& o : obstacles) o.validate();
}

TaskSpec one_obstacle_task() {
  TaskSpec t;
  t.obstacles.push_back(ObstacleRect{});
  return t;
}

TaskSpec two_obstacle_task() {
  TaskSpec t = one_obstacle_task();
  ObstacleRect second;
  second.plane_x = -60.0;
  second.y_min = -80.0;
  second.y_max = 80.0;
  second.z_min = 135.0;
  second.z_max = 200.0;
  t.obstacles.push_back(second);
  return t;
}

TaskSpec make_task(const std::string& name) {
  if (name == "one-obstacle") return one_obstacle_task();
  if (name == "two-obstacles") return two_obstacle_task();
  if (name == "free") return TaskSpec{};
  throw Error(ErrorKind::kInvalidArgument,
              "unknown task '" + name + "' (available: one-obstacle, two-obstacles, free)");
}

RewardTerms reward_terms(double d, bool collided, const TaskSpec& task) {
  RewardTerms r;
  r.collision = collided ? -task.reward.collision : 0.0;
  r.success = d < task.success_threshold ? task.reward.success : 0.0;
  r.distance = task.reward.distance / (0.2 + d);
  return r;
}

double reward_fn(double d, bool collided, const TaskSpec& task) {
  return reward_terms(d, collided, task).total();
}

std::vector<Segment> structural_segments(const std::vector<ModulePose>& world_poses,
                                         const ManipulatorParams& params) {
  const PlateGeometry g = initial_geometry(params);
  const int n = static_cast<int>(world_poses.size());
  // plates[0] is the fixed base.
  std::vector<std::array<Vec3, 3>> plates(n + 1);
  for (int i = 0; i < 3; ++i) plates[0][i] = g.bottom[i];
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < 3; ++i) plates[j + 1][i] = world_poses[j].apply(g.bottom[i]);
  }

  std::vector<Segment> segs;
  segs.reserve(15 * n + 3);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i < 3; ++i) segs.push_back({plates[j][i], plates[j][(i + 1) % 3]});
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < 3; ++i) {
      segs.push_back({plates[j][i], plates[j + 1][i]});
      segs.push_back({plates[j][diagonal_bottom_vertex(params.chirality, i)],
                      plates[j + 1][diagonal_top_vertex(params.chirality, i)]});
    }
  }
  // Tendon i runs up diagonal i of every module and crosses each plate from the
  // top of one diagonal to the bottom of the next.
  for (int i = 0; i < 3; ++i) {
    const int bottom = diagonal_bottom_vertex(params.chirality, i);
    const int top = diagonal_top_vertex(params.chirality, i);
    for (int j = 0; j < n; ++j) {
      segs.push_back({plates[j][bottom], plates[j + 1][top]});
      if (j + 1 < n) segs.push_back({plates[j + 1][top], plates[j + 1][bottom]});
    }
  }
  return segs;
}

bool segment_hits(const Segment& s, const ObstacleRect& rect) {
  const double fa = s.a.x() - rect.plane_x;
  const double fb = s.b.x() - rect.plane_x;
  if ((fa > 0.0 && fb > 0.0) || (fa < 0.0 && fb < 0.0)) return false;
  auto inside = [&](double y, double z) {
    return y >= rect.y_min && y <= rect.y_max && z >= rect.z_min && z <= rect.z_max;
  };
  if (fa != fb) {
    const double t = fa / (fa - fb);
    const Vec3 p = s.a + t * (s.b - s.a);
    return inside(p.y(), p.z());
  }
  // Segment lies in the plane: clip it against the rectangle.
  double t0 = 0.0, t1 = 1.0;
  const double dy = s.b.y() - s.a.y();
  const double dz = s.b.z() - s.a.z();
  auto clip = [&](double p, double q) {
    if (p == 0.0) return q >= 0.0;
    const double r = q / p;
    if (p < 0.0) t0 = std::max(t0, r);
    else t1 = std::min(t1, r);
    return t0 <= t1;
  };
  return clip(-dy, s.a.y() - rect.y_min) && clip(dy, rect.y_max - s.a.y()) &&
         clip(-dz, s.a.z() - rect.z_min) && clip(dz, rect.z_max - s.a.z());
}

bool collision_check(const std::vector<ModulePose>& world_poses,
                     const ManipulatorParams& params,
                     const std::vector<ObstacleRect>& obstacles) {
  if (obstacles.empty()) return false;
  for (const Segment& s : structural_segments(world_poses, params)) {
    for (const auto& o : obstacles) {
      if (segment_hits(s, o)) return true;
    }
  }
  return false;
}

ReachingEnv::ReachingEnv(const ManipulatorParams& params, const TaskSpec& task)
    : solver_(params, [] {
        ForwardSolverOptions o;
        o.tension_mode = TensionMode::kMultiplier;
        return o;
      }()),
      task_(task) {
  params.validate();
  task_.validate();
}

VecX ReachingEnv::observation() const {
  const int n = params().n_chords();
  VecX obs(observation_size());
  obs.segment<3>(0) = command_;
  obs.segment(3, n) = design_;
  obs.segment(3 + n, n) = shape_.chords;
  obs.segment<3>(3 + 2 * n) = task_.goal;
  return obs;
}

VecX ReachingEnv::reset(const VecX& design) {
  validate_stiffness(design, params());
  design_ = design;
  command_.setZero();
  shape_ = solver_.solve(command_, design_);
  step_index_ = 0;
  started_ = true;
  done_ = false;
  return observation();
}

StepResult ReachingEnv::step(const Vec3& action) {
  if (!started_ || done_) {
    throw Error(ErrorKind::kInvalidArgument, "step() called without an active episode");
  }
  if (!action.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "action has non-finite entries");
  }
  StepResult out;
  const double bound = task_.action_bound;
  const Vec3 clipped = action.cwiseMax(-bound).cwiseMin(bound);
  const double hi = params().max_displacement();
  const TendonCommand next = (command_ + clipped).cwiseMax(0.0).cwiseMin(hi);
  ++step_index_;
  out.info.action = clipped;

  try {
    ShapeSolution sol = solver_.solve(next, design_, &shape_);
    shape_ = std::move(sol);
    command_ = next;
  } catch (const Error& e) {
    out.info.solver_failure = true;
    out.info.failure_message = e.what();
    out.info.command = command_;
    out.info.tip = shape_.tip;
    out.info.distance = (shape_.tip - task_.goal).norm();
    out.reward = 0.0;
    out.truncated = true;
    done_ = true;
    out.observation = observation();
    return out;
  }

  const double d = (shape_.tip - task_.goal).norm();
  const bool success = d < task_.success_threshold;
  const bool collided =
      !success && collision_check(shape_.world_poses, params(), task_.obstacles);
  out.info.distance = d;
  out.info.success = success;
  out.info.collision = collided;
  out.info.terms = reward_terms(d, collided, task_);
  out.info.tip = shape_.tip;
  out.info.tensions = shape_.tensions;
  out.info.command = command_;
  out.reward = out.info.terms.total();
  out.terminated = success || (collided && task_.collision_terminates);
  out.truncated = !out.terminated && step_index_ >= task_.horizon;
  done_ = out.terminated || out.truncated;
  out.observation = observation();
  return out;
}

std::string trace_record(int t, const StepResult& step) {
  auto vec = [](const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); };
  nlohmann::json j;
  j["t"] = t;
  j["action"] = vec(step.info.action);
  j["command"] = vec(step.info.command);
  j["d"] = step.info.distance;
  j["reward"] = step.reward;
  j["collision"] = step.info.collision;
  j["success"] = step.info.success;
  j["tip"] = vec(step.info.tip);
  j["tensions"] = vec(step.info.tensions);
  j["solver_failure"] = step.info.solver_failure;
  return j.dump();
}

}  // namespace origami

namespace origami {

void write_shape(BinaryWriter& w, const ShapeSolution& s) {
  w.vec(s.chords);
  w.f64(s.energy);
  w.vec(s.module_energy);
  w.f64(s.objective);
  w.vec3(s.tensions);
  w.vec3(s.multipliers);
  w.vec3(s.slacks);
  w.vec3(s.tip);
  w.u64(s.local_poses.size());
  for (const auto& p : s.local_poses) {
    w.mat3(p.rotation);
    w.vec3(p.translation);
  }
  w.u64(s.world_poses.size());
  for (const auto& p : s.world_poses) {
    w.mat3(p.rotation);
    w.vec3(p.translation);
  }
  w.boolean(s.converged);
  w.i64(s.iterations);
  w.f64(s.stationarity);
}

ShapeSolution read_shape(BinaryReader& r) {
  ShapeSolution s;
  s.chords = r.vec();
  s.energy = r.f64();
  s.module_energy = r.vec();
  s.objective = r.f64();
  s.tensions = r.vec3();
  s.multipliers = r.vec3();
  s.slacks = r.vec3();
  s.tip = r.vec3();
  auto poses = [&](std::vector<ModulePose>* out) {
    const std::uint64_t n = r.u64();
    if (n > 10000) throw Error(ErrorKind::kCheckpoint, "pose count out of range");
    out->resize(n);
    for (auto& p : *out) {
      p.rotation = r.mat3();
      p.translation = r.vec3();
    }
  };
  poses(&s.local_poses);
  poses(&s.world_poses);
  s.converged = r.boolean();
  s.iterations = static_cast<int>(r.i64());
  s.stationarity = r.f64();
  return s;
}

void ReachingEnv::save_state(BinaryWriter& w) const {
  w.boolean(started_);
  w.boolean(done_);
  w.i64(step_index_);
  w.vec(design_);
  w.vec3(command_);
  write_shape(w, shape_);
}

void ReachingEnv::load_state(BinaryReader& r) {
  started_ = r.boolean();
  done_ = r.boolean();
  step_index_ = static_cast<int>(r.i64());
  design_ = r.vec();
  command_ = r.vec3();
  shape_ = read_shape(r);
  if (started_ && (design_.size() != params().n_chords() ||
                   shape_.chords.size() != params().n_chords())) {
    throw Error(ErrorKind::kCheckpoint, "environment state does not match the geometry");
  }
}

ReachingTask::ReachingTask(const ManipulatorParams& params, const TaskSpec& task,
                           const VecX& fixed_design, bool designable)
    : params_(params), env_(params, task), design_(fixed_design), designable_(designable) {
  validate_stiffness(fixed_design, params);
}

VecX ReachingTask::reset(std::mt19937_64&) { return env_.reset(design_); }

Transition ReachingTask::step(const VecX& action) {
  if (action.size() != 3) throw Error(ErrorKind::kDimensionMismatch, "reaching env takes 3 actions");
  // Policy actions are in units of the per-step bound, so a unit-std policy
  // explores the whole allowed step.
  const double k = env_.task().action_bound;
  const StepResult s = env_.step(k * Vec3(action[0], action[1], action[2]));
  Transition t;
  t.observation = s.observation;
  t.reward = s.reward;
  t.terminated = s.terminated;
  t.truncated = s.truncated;
  t.success = s.info.success;
  t.collision = s.info.collision;
  t.failure = s.info.solver_failure;
  t.distance = s.info.distance;
  return t;
}

void ReachingTask::save_state(BinaryWriter& w) const {
  w.vec(design_);
  env_.save_state(w);
}

void ReachingTask::load_state(BinaryReader& r) {
  design_ = r.vec();
  env_.load_state(r);
}

}  // namespace origami
