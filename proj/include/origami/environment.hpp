#pragma once

#include <limits>
#include <random>

#include "origami/common.hpp"
#include "origami/serialize.hpp"

namespace origami {

struct Transition {
  VecX observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  bool success = false;
  bool collision = false;
  bool failure = false;
  double distance = std::numeric_limits<double>::quiet_NaN();
};

// Minimal episodic interface the trainer drives. Environments that expose a
// design vector get a fresh one before every reset.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_size() const = 0;
  virtual int action_size() const = 0;
  virtual int design_size() const { return 0; }
  virtual void set_design(const VecX&) {}
  virtual VecX reset(std::mt19937_64& rng) = 0;
  virtual Transition step(const VecX& action) = 0;
  // Mid-episode state, so a run can resume exactly.
  virtual void save_state(BinaryWriter& w) const = 0;
  virtual void load_state(BinaryReader& r) = 0;
};

// One state, two arms: a positive first action component pulls the arm paying
// `good_reward`, anything else pays `bad_reward`. Episodes last one step.
class BanditEnv : public Environment {
 public:
  BanditEnv(double good_reward = 1.0, double bad_reward = 0.0)
      : good_(good_reward), bad_(bad_reward) {}
  int observation_size() const override { return 1; }
  int action_size() const override { return 1; }
  VecX reset(std::mt19937_64&) override { return VecX::Ones(1); }
  Transition step(const VecX& action) override;
  void save_state(BinaryWriter&) const override {}
  void load_state(BinaryReader&) override {}

 private:
  double good_, bad_;
};

// Point mass in the unit square steered by velocity commands toward a random
// goal. Observation [position | goal - position].
class PointMassEnv : public Environment {
 public:
  struct Options {
    double max_speed = 0.1;
    double success_radius = 0.05;
    int horizon = 50;
    double success_bonus = 1.0;
  };
  PointMassEnv() = default;
  explicit PointMassEnv(const Options& o) : opt_(o) {}
  int observation_size() const override { return 4; }
  int action_size() const override { return 2; }
  VecX reset(std::mt19937_64& rng) override;
  Transition step(const VecX& action) override;
  void save_state(BinaryWriter& w) const override;
  void load_state(BinaryReader& r) override;

 private:
  VecX observation() const;
  Options opt_;
  Eigen::Vector2d pos_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d goal_ = Eigen::Vector2d::Zero();
  int t_ = 0;
};

}  // namespace origami
