#include "origami/environment.hpp"

#include <algorithm>

namespace origami {

Transition BanditEnv::step(const VecX& action) {
  if (action.size() != 1) throw Error(ErrorKind::kDimensionMismatch, "bandit takes 1 action");
  Transition t;
  t.observation = VecX::Ones(1);
  t.success = action[0] > 0.0;
  t.reward = t.success ? good_ : bad_;
  t.terminated = true;
  return t;
}

VecX PointMassEnv::observation() const {
  VecX o(4);
  o << pos_, goal_ - pos_;
  return o;
}

VecX PointMassEnv::reset(std::mt19937_64& rng) {
  auto u = [&] { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; };
  pos_ = Eigen::Vector2d(u(), u());
  goal_ = Eigen::Vector2d(u(), u());
  t_ = 0;
  return observation();
}

Transition PointMassEnv::step(const VecX& action) {
  if (action.size() != 2) throw Error(ErrorKind::kDimensionMismatch, "point mass takes 2 actions");
  const Eigen::Vector2d a = Eigen::Vector2d(action[0], action[1])
                                .cwiseMax(-1.0)
                                .cwiseMin(1.0);
  pos_ = (pos_ + opt_.max_speed * a).cwiseMax(-1.0).cwiseMin(1.0);
  ++t_;
  Transition t;
  t.distance = (goal_ - pos_).norm();
  t.success = t.distance < opt_.success_radius;
  t.reward = -t.distance + (t.success ? opt_.success_bonus : 0.0);
  t.terminated = t.success;
  t.truncated = !t.terminated && t_ >= opt_.horizon;
  t.observation = observation();
  return t;
}

void PointMassEnv::save_state(BinaryWriter& w) const {
  w.f64(pos_[0]);
  w.f64(pos_[1]);
  w.f64(goal_[0]);
  w.f64(goal_[1]);
  w.i64(t_);
}

void PointMassEnv::load_state(BinaryReader& r) {
  pos_[0] = r.f64();
  pos_[1] = r.f64();
  goal_[0] = r.f64();
  goal_[1] = r.f64();
  t_ = static_cast<int>(r.i64());
}

}  // namespace origami
