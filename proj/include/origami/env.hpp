#pragma once

#include <string>
#include <vector>

#include "origami/environment.hpp"
#include "origami/forward_solver.hpp"

namespace origami {

// Axis-aligned rectangle in the plane x = plane_x.
struct ObstacleRect {
  double plane_x = -25.0;
  double y_min = -80.0, y_max = 80.0;
  double z_min = 80.0, z_max = 200.0;

  void validate() const;
};

struct RewardConstants {
  double collision = 10.0;  // r_c
  double success = 50.0;    // r_s
  double distance = 1.0;    // r_d
};

struct TaskSpec {
  Vec3 goal = Vec3(-50.0, 0.0, 50.0);
  std::vector<ObstacleRect> obstacles;
  double success_threshold = 3.0;  // d_s, mm
  RewardConstants reward;
  int horizon = 60;
  double action_bound = 3.0;  // mm per step per tendon
  // When false a collision only costs r_c for that step and the episode goes on.
  bool collision_terminates = true;

  void validate() const;
};

TaskSpec one_obstacle_task();
TaskSpec two_obstacle_task();
// "one-obstacle" | "two-obstacles" | "free"; throws kInvalidArgument otherwise.
TaskSpec make_task(const std::string& name);

struct RewardTerms {
  double collision = 0.0;
  double success = 0.0;
  double distance = 0.0;
  double total() const { return collision + success + distance; }
};

RewardTerms reward_terms(double d, bool collided, const TaskSpec& task);
double reward_fn(double d, bool collided, const TaskSpec& task);

struct Segment {
  Vec3 a, b;
};

// Vertical links, diagonal chords, plate edges (base plate included) and the
// three tendon polylines, all in world coordinates.
std::vector<Segment> structural_segments(const std::vector<ModulePose>& world_poses,
                                         const ManipulatorParams& params);

bool segment_hits(const Segment& s, const ObstacleRect& rect);
bool collision_check(const std::vector<ModulePose>& world_poses,
                     const ManipulatorParams& params,
                     const std::vector<ObstacleRect>& obstacles);

struct StepInfo {
  double distance = 0.0;
  bool success = false;
  bool collision = false;
  bool solver_failure = false;
  std::string failure_message;
  RewardTerms terms;
  Vec3 tip = Vec3::Zero();
  Vec3 tensions = Vec3::Zero();
  Vec3 command = Vec3::Zero();
  Vec3 action = Vec3::Zero();  // after clipping
};

struct StepResult {
  VecX observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

// Goal-reaching environment. It holds no random state: an episode is fully
// determined by the design passed to reset() and the actions.
class ReachingEnv {
 public:
  ReachingEnv(const ManipulatorParams& params, const TaskSpec& task);

  int observation_size() const { return 6 * params().n_modules + 6; }
  static constexpr int action_size() { return 3; }

  // Observation layout [d (3) | S (3N) | B (3N) | goal (3)], unnormalized.
  VecX reset(const VecX& design);
  StepResult step(const Vec3& action);

  const ManipulatorParams& params() const { return solver_.params(); }
  const TaskSpec& task() const { return task_; }
  const VecX& design() const { return design_; }
  const TendonCommand& command() const { return command_; }
  const ShapeSolution& shape() const { return shape_; }
  int step_index() const { return step_index_; }
  bool done() const { return done_; }
  VecX observation() const;

  void save_state(BinaryWriter& w) const;
  void load_state(BinaryReader& r);

 private:
  ForwardSolver solver_;
  TaskSpec task_;
  VecX design_;
  TendonCommand command_ = TendonCommand::Zero();
  ShapeSolution shape_;
  int step_index_ = 0;
  bool started_ = false;
  bool done_ = false;
};

// Trainer adapter. With a design distribution the trainer calls set_design()
// before each reset; otherwise the fixed design given here is used.
// step() takes actions in units of task.action_bound.
class ReachingTask : public Environment {
 public:
  ReachingTask(const ManipulatorParams& params, const TaskSpec& task,
               const VecX& fixed_design, bool designable);

  int observation_size() const override { return env_.observation_size(); }
  int action_size() const override { return 3; }
  int design_size() const override { return designable_ ? params_.n_chords() : 0; }
  void set_design(const VecX& design) override { design_ = design; }
  VecX reset(std::mt19937_64& rng) override;
  Transition step(const VecX& action) override;
  void save_state(BinaryWriter& w) const override;
  void load_state(BinaryReader& r) override;

  const ReachingEnv& env() const { return env_; }

 private:
  ManipulatorParams params_;
  ReachingEnv env_;
  VecX design_;
  bool designable_;
};

void write_shape(BinaryWriter& w, const ShapeSolution& s);
ShapeSolution read_shape(BinaryReader& r);

// One JSON object per line: t, action, command, d, reward, collision, success,
// tip, tensions, solver_failure.
std::string trace_record(int t, const StepResult& step);

}  // namespace origami
