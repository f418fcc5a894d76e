#include "origami/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/LU>

namespace origami {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr double kPi = std::numbers::pi;

// 1 - sin(x)/x, accurate near zero.
double one_minus_sinc(double x) {
  if (x < 0.1) {
    const double x2 = x * x;
    return x2 * (1.0 / 6.0 -
                 x2 * (1.0 / 120.0 -
                       x2 * (1.0 / 5040.0 -
                             x2 * (1.0 / 362880.0 - x2 / 39916800.0))));
  }
  return 1.0 - std::sin(x) / x;
}

// (sin x - x cos x) / x^3, i.e. d/dx(1 - sinc) divided by x.
double sinc_slope_over_x(double x) {
  if (x < 0.1) {
    const double x2 = x * x;
    return 1.0 / 3.0 -
           x2 * (1.0 / 30.0 -
                 x2 * (1.0 / 840.0 - x2 * (1.0 / 45360.0 - x2 / 3991680.0)));
  }
  return (std::sin(x) - x * std::cos(x)) / (x * x * x);
}

// d/dx of sinc_slope_over_x, divided by x.
double sinc_slope_over_x_prime_over_x(double x) {
  if (x < 0.1) {
    const double x2 = x * x;
    return -1.0 / 15.0 +
           x2 * (1.0 / 210.0 - x2 * (1.0 / 7560.0 - x2 / 498960.0));
  }
  const double p = sinc_slope_over_x(x);
  return std::sin(x) / (x * x * x) - 3.0 * p / (x * x);
}

// Half-angle x = gamma / 2 for a relative shortening `om` = 1 - chord/b_ini.
double half_bend_angle(double om) {
  if (om <= 0.0) return 0.0;
  double lo = 0.0;
  double hi = kPi / 2.0;
  double x = std::min(std::sqrt(6.0 * om), hi);
  for (int it = 0; it < 100; ++it) {
    const double f = one_minus_sinc(x) - om;
    if (f == 0.0) break;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double step = f / (x * sinc_slope_over_x(x));
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-17 * std::max(1.0, x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

Mat3 orthonormalized(const Mat3& r) {
  return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

ModulePose perturbed(const ModulePose& base, const Vec3& omega,
                     const Vec3& shift) {
  ModulePose out = base;
  const double angle = omega.norm();
  if (angle > 0.0) {
    out.rotation =
        Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix() *
        base.rotation;
  }
  out.translation += shift;
  return out;
}

// Angle between a and b, and the gradients of sigma^2 / 2 with respect to both.
double angle_with_gradients(const Vec3& a, const Vec3& b, Vec3* grad_a,
                            Vec3* grad_b) {
  const double na = a.norm();
  const double nb = b.norm();
  const Vec3 ua = a / na;
  const Vec3 ub = b / nb;
  const double s = ua.cross(ub).norm();
  const double c = ua.dot(ub);
  const double sigma = std::atan2(s, c);
  const double ratio =
      s < 1e-8 ? 1.0 + sigma * sigma / 6.0 : sigma / s;
  if (grad_a) *grad_a = -ratio * (ub - c * ua) / na;
  if (grad_b) *grad_b = -ratio * (ua - c * ub) / nb;
  return sigma;
}

}  // namespace

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kOutOfRange: return "OutOfRange";
    case ErrorKind::kNoConvergence: return "NoConvergence";
    case ErrorKind::kPlateInversion: return "PlateInversion";
    case ErrorKind::kPoseInfeasible: return "PoseInfeasible";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kCheckpoint: return "CheckpointError";
    case ErrorKind::kIo: return "IoError";
  }
  return "Error";
}

double ManipulatorParams::plate_side() const {
  return plate_circumradius * std::sqrt(3.0);
}

double ManipulatorParams::b_ini() const {
  const double side = plate_side();
  return std::sqrt(vertical_link_length * vertical_link_length + side * side);
}

double ManipulatorParams::max_displacement() const {
  return n_modules * b_ini() * (1.0 - chord_floor_factor);
}

void ManipulatorParams::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorKind::kInvalidArgument, "manipulator." + field + " " + why);
  };
  if (n_modules < 1) fail("n_modules", "must be >= 1");
  if (!(plate_circumradius > 0.0)) fail("plate_circumradius", "must be > 0");
  if (!(vertical_link_length > 0.0)) fail("vertical_link_length", "must be > 0");
  if (!(spherical_stiffness >= 0.0)) fail("spherical_stiffness", "must be >= 0");
  if (!(force_limit > 0.0)) fail("force_limit", "must be > 0");
  if (!(stiffness_min > 0.0)) fail("stiffness_min", "must be > 0");
  if (!(stiffness_min < stiffness_max)) {
    fail("stiffness_max", "must exceed stiffness_min");
  }
  if (!(chord_floor_factor > 2.0 / kPi && chord_floor_factor < 1.0)) {
    fail("chord_floor_factor", "must lie in (2/pi, 1)");
  }
}

int diagonal_bottom_vertex(Chirality chirality, int i) {
  return chirality == Chirality::kNextBottom ? (i + 1) % 3 : i;
}

int diagonal_top_vertex(Chirality chirality, int i) {
  return chirality == Chirality::kNextBottom ? i : (i + 1) % 3;
}

PlateGeometry initial_geometry(const ManipulatorParams& params) {
  PlateGeometry geo;
  const double r = params.plate_circumradius;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * kPi * i / 3.0;
    geo.bottom[i] = Vec3(r * std::cos(a), r * std::sin(a), 0.0);
    geo.top_rest[i] = geo.bottom[i] + Vec3(0.0, 0.0, params.vertical_link_length);
  }
  geo.side = params.plate_side();
  geo.b_ini = params.b_ini();
  return geo;
}

Mat3 third_turn() {
  return Eigen::AngleAxisd(2.0 * kPi / 3.0, Vec3::UnitZ()).toRotationMatrix();
}

ModulePose ModulePose::rest(const ManipulatorParams& params) {
  ModulePose pose;
  pose.translation = Vec3(0.0, 0.0, params.vertical_link_length);
  return pose;
}

ModulePose ModulePose::compose(const ModulePose& child) const {
  ModulePose out;
  out.rotation = rotation * child.rotation;
  out.translation = rotation * child.translation + translation;
  return out;
}

double bend_angle_to_chord(double gamma, double b_ini) {
  const double x = 0.5 * gamma;
  return b_ini * (1.0 - one_minus_sinc(x));
}

double chord_to_bend_angle(double chord, double b_ini) {
  const double lower = 2.0 / kPi * b_ini;
  const double slop = 1e-12 * b_ini;
  if (!(chord >= lower - slop && chord <= b_ini + slop)) {
    throw Error(ErrorKind::kOutOfRange,
                "chord " + std::to_string(chord) + " outside [" +
                    std::to_string(lower) + ", " + std::to_string(b_ini) + "]");
  }
  if (chord <= lower) return kPi;
  return 2.0 * half_bend_angle((b_ini - chord) / b_ini);
}

// ---------------------------------------------------------------------------

ModuleModel::ModuleModel(const ManipulatorParams& params)
    : params_(params), geometry_(initial_geometry(params)) {
  params_.validate();
  for (int i = 0; i < 3; ++i) {
    diag_bottom_[i] = diagonal_bottom_vertex(params_.chirality, i);
    diag_top_[i] = diagonal_top_vertex(params_.chirality, i);
  }
  for (int i = 0; i < 3; ++i) {
    rest_dir_[i] = (geometry_.top_rest[i] - geometry_.bottom[i]).normalized();
    rest_dir_[3 + i] =
        (geometry_.top_rest[diag_top_[i]] - geometry_.bottom[diag_bottom_[i]])
            .normalized();
  }
}

ModuleModel::BendTerm ModuleModel::bend_term(double chord) const {
  const double b_ini = geometry_.b_ini;
  const double om = std::max(0.0, (b_ini - chord) / b_ini);
  const double x = half_bend_angle(om);
  const double p = sinc_slope_over_x(x);
  BendTerm t;
  t.value = 2.0 * x * x;
  t.first = -4.0 / (b_ini * p);
  t.second = -4.0 * sinc_slope_over_x_prime_over_x(x) / (b_ini * b_ini * p * p * p);
  return t;
}

namespace {

struct ConstraintSystem {
  Vec6 residual;   // half squared-length mismatch
  double max_error;  // worst distance mismatch, mm
};

}  // namespace

ModulePose ModuleModel::newton(const Vec3& chords, const ModulePose& init,
                               const PoseSolverOptions& options,
                               bool* converged) const {
  const auto& P = geometry_.bottom;
  const double lv = params_.vertical_link_length;

  auto evaluate = [&](const ModulePose& pose, Mat6* jac) {
    ConstraintSystem sys;
    sys.max_error = 0.0;
    for (int row = 0; row < 6; ++row) {
      const int link = row % 3;
      const bool diagonal = row >= 3;
      const int top = diagonal ? diag_top_[link] : link;
      const int bottom = diagonal ? diag_bottom_[link] : link;
      const double target = diagonal ? chords[link] : lv;
      const Vec3 rp = pose.rotation * P[top];
      const Vec3 e = rp + pose.translation - P[bottom];
      const double len = e.norm();
      sys.residual[row] = 0.5 * (e.squaredNorm() - target * target);
      sys.max_error = std::max(sys.max_error, std::abs(len - target));
      if (jac) {
        jac->block<1, 3>(row, 0) = rp.cross(e).transpose();
        jac->block<1, 3>(row, 3) = e.transpose();
      }
    }
    return sys;
  };

  ModulePose pose = init;
  pose.rotation = orthonormalized(pose.rotation);
  *converged = false;
  Mat6 jac;
  ConstraintSystem sys = evaluate(pose, &jac);
  for (int it = 0; it < options.max_iterations; ++it) {
    if (!std::isfinite(sys.max_error)) return pose;
    if (sys.max_error <= options.tolerance) {
      *converged = true;
      return pose;
    }
    Eigen::FullPivLU<Mat6> lu(jac);
    if (!lu.isInvertible()) return pose;
    const Vec6 step = -lu.solve(sys.residual);
    const double norm0 = sys.residual.norm();
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      ModulePose trial =
          perturbed(pose, alpha * step.head<3>(), alpha * step.tail<3>());
      trial.rotation = orthonormalized(trial.rotation);
      Mat6 trial_jac;
      ConstraintSystem trial_sys = evaluate(trial, &trial_jac);
      if (trial_sys.residual.norm() < norm0 ||
          trial_sys.max_error <= options.tolerance) {
        pose = trial;
        sys = trial_sys;
        jac = trial_jac;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Stalled at the rounding floor; accept if close enough.
      *converged = sys.max_error <= 100.0 * options.tolerance;
      return pose;
    }
  }
  *converged = sys.max_error <= options.tolerance;
  return pose;
}

ModulePose ModuleModel::solve_pose(const Vec3& chords, const ModulePose& init,
                                   const PoseSolverOptions& options) const {
  bool converged = false;
  ModulePose pose = newton(chords, init, options, &converged);
  if (converged && pose.translation.z() > 0.0) return pose;
  if (!options.multi_start) {
    throw Error(converged ? ErrorKind::kPlateInversion : ErrorKind::kNoConvergence,
                "module pose solve failed");
  }

  const double a = 0.3;
  const double dz = 0.2 * params_.vertical_link_length;
  const std::array<std::pair<Vec3, Vec3>, 8> kicks = {{
      {Vec3(a, 0, 0), Vec3::Zero()},
      {Vec3(-a, 0, 0), Vec3::Zero()},
      {Vec3(0, a, 0), Vec3::Zero()},
      {Vec3(0, -a, 0), Vec3::Zero()},
      {Vec3(0, 0, a), Vec3::Zero()},
      {Vec3(0, 0, -a), Vec3::Zero()},
      {Vec3::Zero(), Vec3(0, 0, dz)},
      {Vec3::Zero(), Vec3(0, 0, -dz)},
  }};

  std::vector<ModulePose> starts;
  starts.push_back(ModulePose::rest(params_));
  for (const auto& [omega, shift] : kicks) starts.push_back(perturbed(init, omega, shift));

  bool any_converged = converged;
  bool found = false;
  ModulePose best;
  double best_dist = 0.0;
  for (const ModulePose& start : starts) {
    bool ok = false;
    ModulePose candidate = newton(chords, start, options, &ok);
    if (!ok) continue;
    any_converged = true;
    if (candidate.translation.z() <= 0.0) continue;
    const double dist =
        (candidate.translation - init.translation).norm() +
        params_.vertical_link_length * (candidate.rotation - init.rotation).norm();
    if (!found || dist < best_dist) {
      best = candidate;
      best_dist = dist;
      found = true;
    }
  }
  if (!found) {
    throw Error(any_converged ? ErrorKind::kPlateInversion : ErrorKind::kNoConvergence,
                "module pose solve failed for chords (" + std::to_string(chords[0]) +
                    ", " + std::to_string(chords[1]) + ", " +
                    std::to_string(chords[2]) + ")");
  }
  return best;
}

AngleSet ModuleModel::angles(const ModulePose& pose, const Vec3& chords) const {
  const auto& P = geometry_.bottom;
  AngleSet out;
  for (int i = 0; i < 3; ++i) out.gamma[i] = chord_to_bend_angle(chords[i], geometry_.b_ini);
  for (int link = 0; link < 6; ++link) {
    const int i = link % 3;
    const bool diagonal = link >= 3;
    const int top = diagonal ? diag_top_[i] : i;
    const int bottom = diagonal ? diag_bottom_[i] : i;
    const Vec3 v = pose.apply(P[top]) - P[bottom];
    const Vec3& u0 = rest_dir_[link];
    const int base = diagonal ? 6 : 0;
    out.sigma[base + i] = angle_with_gradients(v, u0, nullptr, nullptr);
    out.sigma[base + 3 + i] =
        angle_with_gradients(v, pose.rotation * u0, nullptr, nullptr);
  }
  return out;
}

double ModuleModel::spherical_energy_and_gradient(const ModulePose& pose,
                                                  const Vec3& chords,
                                                  Vec3* db_gradient) const {
  const auto& P = geometry_.bottom;
  const double k = params_.spherical_stiffness;
  double half_sum = 0.0;
  Vec6 gx = Vec6::Zero();
  for (int link = 0; link < 6; ++link) {
    const int i = link % 3;
    const bool diagonal = link >= 3;
    const int top = diagonal ? diag_top_[i] : i;
    const int bottom = diagonal ? diag_bottom_[i] : i;
    const Vec3 rp = pose.rotation * P[top];
    const Vec3 v = rp + pose.translation - P[bottom];
    const Vec3& u0 = rest_dir_[link];
    const Vec3 ru = pose.rotation * u0;

    Vec3 ga, gb;
    const double s_bottom = angle_with_gradients(v, u0, &ga, nullptr);
    half_sum += 0.5 * s_bottom * s_bottom;
    gx.head<3>() += rp.cross(ga);
    gx.tail<3>() += ga;

    const double s_top = angle_with_gradients(v, ru, &ga, &gb);
    half_sum += 0.5 * s_top * s_top;
    gx.head<3>() += rp.cross(ga) + ru.cross(gb);
    gx.tail<3>() += ga;
  }

  if (db_gradient) {
    Mat6 jac;
    for (int row = 0; row < 6; ++row) {
      const int link = row % 3;
      const bool diagonal = row >= 3;
      const int top = diagonal ? diag_top_[link] : link;
      const int bottom = diagonal ? diag_bottom_[link] : link;
      const Vec3 rp = pose.rotation * P[top];
      const Vec3 e = rp + pose.translation - P[bottom];
      jac.block<1, 3>(row, 0) = rp.cross(e).transpose();
      jac.block<1, 3>(row, 3) = e.transpose();
    }
    const Vec6 y = jac.transpose().fullPivLu().solve(gx);
    for (int i = 0; i < 3; ++i) (*db_gradient)[i] = k * y[3 + i] * chords[i];
  }
  return k * half_sum;
}

ModuleModel::Evaluation ModuleModel::evaluate(const Vec3& chords,
                                              const Vec3& stiffness,
                                              const ModulePose& init,
                                              bool with_gradient) const {
  Evaluation ev;
  for (int i = 0; i < 3; ++i) {
    if (!(chords[i] <= geometry_.b_ini * (1.0 + 1e-12))) {
      throw Error(ErrorKind::kOutOfRange, "chord longer than its straight length");
    }
  }
  ev.pose = solve_pose(chords, init);
  for (int i = 0; i < 3; ++i) {
    const BendTerm t = bend_term(chords[i]);
    ev.vsj_energy += stiffness[i] * t.value;
    if (with_gradient) ev.gradient[i] = stiffness[i] * t.first;
  }
  ev.spherical_energy = spherical_energy_and_gradient(
      ev.pose, chords, with_gradient ? &ev.spherical_gradient : nullptr);
  ev.energy = ev.vsj_energy + ev.spherical_energy;
  if (with_gradient) ev.gradient += ev.spherical_gradient;
  return ev;
}

Mat3 ModuleModel::hessian(const Vec3& chords, const Vec3& stiffness,
                          const Evaluation& at) const {
  Mat3 h = Mat3::Zero();
  for (int i = 0; i < 3; ++i) h(i, i) = stiffness[i] * bend_term(chords[i]).second;
  if (params_.spherical_stiffness == 0.0) return h;
  const double step = 1e-5 * geometry_.b_ini;
  Mat3 hs;
  for (int i = 0; i < 3; ++i) {
    Vec3 plus = chords;
    Vec3 minus = chords;
    plus[i] += step;
    minus[i] -= step;
    Vec3 gp, gm;
    spherical_energy_and_gradient(solve_pose(plus, at.pose), plus, &gp);
    spherical_energy_and_gradient(solve_pose(minus, at.pose), minus, &gm);
    hs.col(i) = (gp - gm) / (2.0 * step);
  }
  return h + 0.5 * (hs + hs.transpose());
}

// ---------------------------------------------------------------------------

ModulePose solve_module_pose(const Vec3& chords, const ManipulatorParams& params,
                             const ModulePose& init,
                             const PoseSolverOptions& options) {
  const double lo = params.chord_min();
  const double hi = params.b_ini();
  for (int i = 0; i < 3; ++i) {
    if (!(chords[i] >= lo * (1.0 - 1e-12) && chords[i] <= hi * (1.0 + 1e-12))) {
      throw Error(ErrorKind::kOutOfRange, "chord outside the shape box");
    }
  }
  return ModuleModel(params).solve_pose(chords, init, options);
}

AngleSet joint_angles(const ModulePose& pose, const Vec3& chords,
                      const ManipulatorParams& params) {
  return ModuleModel(params).angles(pose, chords);
}

ModuleEnergy module_energy(const Vec3& chords, const Vec3& stiffness,
                           const ManipulatorParams& params) {
  return module_energy(chords, stiffness, params, ModulePose::rest(params));
}

ModuleEnergy module_energy(const Vec3& chords, const Vec3& stiffness,
                           const ManipulatorParams& params,
                           const ModulePose& init) {
  const ModuleModel model(params);
  const auto ev = model.evaluate(chords, stiffness, init, false);
  ModuleEnergy out;
  out.energy = ev.energy;
  out.vsj_energy = ev.vsj_energy;
  out.spherical_energy = ev.spherical_energy;
  out.pose = ev.pose;
  out.angles = model.angles(ev.pose, chords);
  return out;
}

StackResult stack_and_tip(const std::vector<ModulePose>& local_poses) {
  StackResult out;
  ModulePose frame;
  for (const ModulePose& local : local_poses) {
    frame = frame.compose(local);
    out.world_poses.push_back(frame);
  }
  out.tip = frame.translation;
  return out;
}

StackResult stack_and_tip(const VecX& chords, const ManipulatorParams& params) {
  if (chords.size() != params.n_chords()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "shape vector has " + std::to_string(chords.size()) +
                    " entries, expected " + std::to_string(params.n_chords()));
  }
  const ModuleModel model(params);
  std::vector<ModulePose> poses;
  const ModulePose rest = ModulePose::rest(params);
  for (int j = 0; j < params.n_modules; ++j) {
    poses.push_back(model.solve_pose(chords.segment<3>(3 * j), rest));
  }
  return stack_and_tip(poses);
}

}  // namespace origami
