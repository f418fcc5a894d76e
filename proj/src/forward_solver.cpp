#include "origami/forward_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace origami {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Decision vector z = [chords (n) | v (3)], where v_i >= max(0, c_i) carries
// the exact-penalty term. Constraint k reads a_k . z >= beta_k:
//   [0, n)        chord_k >= lower
//   [n, 2n)       -chord_k >= -upper
//   2n + i        v_i >= 0
//   2n + 3 + i    v_i - sum_j b_i^j >= -(N b_ini - d_i)
class ConstraintSet {
 public:
  ConstraintSet(int n, double lower, double upper, const Vec3& tendon_length)
      : n_(n), lower_(lower), upper_(upper), length_(tendon_length) {}

  int size() const { return 2 * n_ + 6; }
  int dim() const { return n_ + 3; }

  VecX row(int k) const {
    VecX a = VecX::Zero(dim());
    if (k < n_) {
      a[k] = 1.0;
    } else if (k < 2 * n_) {
      a[k - n_] = -1.0;
    } else if (k < 2 * n_ + 3) {
      a[n_ + (k - 2 * n_)] = 1.0;
    } else {
      const int side = k - 2 * n_ - 3;
      a[n_ + side] = 1.0;
      for (int q = side; q < n_; q += 3) a[q] = -1.0;
    }
    return a;
  }

  double residual(int k, const VecX& z) const {
    if (k < n_) return z[k] - lower_;
    if (k < 2 * n_) return upper_ - z[k - n_];
    if (k < 2 * n_ + 3) return z[n_ + (k - 2 * n_)];
    const int side = k - 2 * n_ - 3;
    return z[n_ + side] - excess(z, side);
  }

  // c_i = sum_j b_i^j - (N b_ini - d_i); positive when the tendon is over-pulled.
  double excess(const VecX& z, int side) const {
    double sum = 0.0;
    for (int q = side; q < n_; q += 3) sum += z[q];
    return sum - length_[side];
  }

  bool is_excess(int k) const { return k >= 2 * n_ + 3; }
  bool is_nonneg(int k) const { return k >= 2 * n_ && k < 2 * n_ + 3; }
  int side_of(int k) const { return is_excess(k) ? k - 2 * n_ - 3 : k - 2 * n_; }

  // Puts z exactly on every constraint in `active`.
  void snap(VecX& z, const std::vector<int>& active) const {
    for (int q = 0; q < n_; ++q) z[q] = std::clamp(z[q], lower_, upper_);
    for (int k : active) {
      if (k < n_) z[k] = lower_;
      else if (k < 2 * n_) z[k - n_] = upper_;
    }
    for (int k : active) {
      if (is_excess(k)) z[n_ + side_of(k)] = excess(z, side_of(k));
    }
    for (int k : active) {
      if (is_nonneg(k)) z[n_ + side_of(k)] = 0.0;
    }
    for (int i = 0; i < 3; ++i) z[n_ + i] = std::max(z[n_ + i], 0.0);
  }

 private:
  int n_;
  double lower_;
  double upper_;
  Vec3 length_;
};

bool independent(const MatX& rows) {
  if (rows.rows() == 0) return true;
  Eigen::ColPivHouseholderQR<MatX> qr(rows.transpose());
  qr.setThreshold(1e-10);
  return qr.rank() == rows.rows();
}

MatX stack_rows(const ConstraintSet& cs, const std::vector<int>& active) {
  MatX a(active.size(), cs.dim());
  for (size_t r = 0; r < active.size(); ++r) a.row(r) = cs.row(active[r]).transpose();
  return a;
}

struct Iterate {
  VecX z;
  std::vector<ModuleModel::Evaluation> evals;
  double value = kInf;
};

}  // namespace

VecX rest_shape(const ManipulatorParams& params) {
  return VecX::Constant(params.n_chords(), params.b_ini());
}

void validate_command(const TendonCommand& d, const ManipulatorParams&) {
  for (int i = 0; i < 3; ++i) {
    if (!(d[i] >= 0.0) || !std::isfinite(d[i])) {
      throw Error(ErrorKind::kOutOfRange,
                  "tendon displacement d" + std::to_string(i + 1) +
                      " must be a finite value >= 0");
    }
  }
}

void validate_stiffness(const VecX& stiffness, const ManipulatorParams& params) {
  if (stiffness.size() != params.n_chords()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "stiffness vector has " + std::to_string(stiffness.size()) +
                    " entries but 3N = " + std::to_string(params.n_chords()));
  }
  const double slop = 1e-9;
  for (int q = 0; q < stiffness.size(); ++q) {
    if (!(stiffness[q] >= params.stiffness_min - slop &&
          stiffness[q] <= params.stiffness_max + slop)) {
      throw Error(ErrorKind::kOutOfRange,
                  "stiffness[" + std::to_string(q) + "] = " +
                      std::to_string(stiffness[q]) + " outside [" +
                      std::to_string(params.stiffness_min) + ", " +
                      std::to_string(params.stiffness_max) + "]");
    }
  }
}

void validate_shape(const VecX& chords, const ManipulatorParams& params) {
  if (chords.size() != params.n_chords()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "shape vector has " + std::to_string(chords.size()) +
                    " entries but 3N = " + std::to_string(params.n_chords()));
  }
  const double lo = params.chord_min() * (1.0 - 1e-12);
  const double hi = params.b_ini() * (1.0 + 1e-12);
  for (int q = 0; q < chords.size(); ++q) {
    if (!(chords[q] >= lo && chords[q] <= hi)) {
      throw Error(ErrorKind::kOutOfRange,
                  "chord[" + std::to_string(q) + "] outside the shape box");
    }
  }
}

Vec3 tendon_slack(const VecX& chords, const TendonCommand& d,
                  const ManipulatorParams& params) {
  if (chords.size() != params.n_chords()) {
    throw Error(ErrorKind::kDimensionMismatch, "shape vector length != 3N");
  }
  Vec3 slack;
  for (int i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int q = i; q < chords.size(); q += 3) sum += chords[q];
    slack[i] = (params.n_modules * params.b_ini() - sum) - d[i];
  }
  return slack;
}

ForwardSolver::ForwardSolver(const ManipulatorParams& params,
                             ForwardSolverOptions options)
    : model_(params), options_(options) {}

double ForwardSolver::penalized_objective(const VecX& chords,
                                          const TendonCommand& d,
                                          const VecX& stiffness) const {
  const auto& p = params();
  double energy = 0.0;
  const ModulePose rest = ModulePose::rest(p);
  for (int j = 0; j < p.n_modules; ++j) {
    energy += model_
                  .evaluate(chords.segment<3>(3 * j), stiffness.segment<3>(3 * j),
                            rest, false)
                  .energy;
  }
  const Vec3 slack = tendon_slack(chords, d, p);
  double penalty = 0.0;
  for (int i = 0; i < 3; ++i) penalty += std::max(0.0, -slack[i]);
  return energy + p.force_limit * penalty;
}

ShapeSolution ForwardSolver::solve(const TendonCommand& d, const VecX& stiffness,
                                   const ShapeSolution* warm) const {
  validate_command(d, params());
  validate_stiffness(stiffness, params());
  if (warm && warm->chords.size() != params().n_chords()) {
    throw Error(ErrorKind::kDimensionMismatch, "warm start has the wrong size");
  }
  return solve_unchecked(d, stiffness, warm, true);
}

ShapeSolution ForwardSolver::solve_unchecked(const TendonCommand& d,
                                             const VecX& stiffness,
                                             const ShapeSolution* warm,
                                             bool with_tensions) const {
  const ManipulatorParams& p = params();
  const int modules = p.n_modules;
  const int n = p.n_chords();
  const int nz = n + 3;
  const double lower = p.chord_min();
  const double upper = p.b_ini();
  const double fl = p.force_limit;
  Vec3 length;
  for (int i = 0; i < 3; ++i) length[i] = modules * upper - d[i];
  const ConstraintSet cs(n, lower, upper, length);

  auto evaluate = [&](const VecX& z, const std::vector<ModuleModel::Evaluation>* seeds,
                      Iterate* out) {
    out->z = z;
    out->evals.resize(modules);
    double value = 0.0;
    for (int j = 0; j < modules; ++j) {
      const ModulePose seed =
          seeds ? (*seeds)[j].pose : ModulePose::rest(p);
      out->evals[j] = model_.evaluate(z.segment<3>(3 * j),
                                      stiffness.segment<3>(3 * j), seed, true);
      value += out->evals[j].energy;
    }
    out->value = value + fl * z.tail<3>().sum();
  };

  // Starting point.
  Iterate cur;
  {
    VecX z(nz);
    z.head(n) = warm ? warm->chords : rest_shape(p);
    for (int q = 0; q < n; ++q) z[q] = std::clamp(z[q], lower, upper);
    for (int i = 0; i < 3; ++i) z[n + i] = std::max(0.0, cs.excess(z, i));
    std::vector<ModuleModel::Evaluation> seeds;
    if (warm && static_cast<int>(warm->local_poses.size()) == modules) {
      seeds.resize(modules);
      for (int j = 0; j < modules; ++j) seeds[j].pose = warm->local_poses[j];
    }
    try {
      evaluate(z, seeds.empty() ? nullptr : &seeds, &cur);
    } catch (const Error&) {
      z.head(n) = rest_shape(p);
      for (int i = 0; i < 3; ++i) z[n + i] = std::max(0.0, cs.excess(z, i));
      evaluate(z, nullptr, &cur);
    }
  }

  // Working set: constraints active at the start, kept linearly independent.
  std::vector<int> work;
  {
    const double tol = 1e-12 * upper;
    std::vector<int> order;
    for (int k = 0; k < 2 * n; ++k) order.push_back(k);
    for (int i = 0; i < 3; ++i) order.push_back(2 * n + i);
    for (int i = 0; i < 3; ++i) order.push_back(2 * n + 3 + i);
    for (int k : order) {
      if (std::abs(cs.residual(k, cur.z)) > tol) continue;
      std::vector<int> trial = work;
      trial.push_back(k);
      if (independent(stack_rows(cs, trial))) work = std::move(trial);
    }
    VecX z = cur.z;
    cs.snap(z, work);
    if (z != cur.z) evaluate(z, &cur.evals, &cur);
  }

  VecX grad(nz);
  MatX hess = MatX::Zero(nz, nz);
  bool stale = true;
  bool converged = false;
  double stationarity = kInf;
  VecX multipliers;
  int iter = 0;

  for (; iter < options_.max_iterations; ++iter) {
    if (stale) {
      hess.setZero();
      for (int j = 0; j < modules; ++j) {
        grad.segment<3>(3 * j) = cur.evals[j].gradient;
        hess.block<3, 3>(3 * j, 3 * j) = model_.hessian(
            cur.z.segment<3>(3 * j), stiffness.segment<3>(3 * j), cur.evals[j]);
      }
      grad.tail<3>().setConstant(fl);
      stale = false;
    }

    const int m = static_cast<int>(work.size());
    const MatX aw = stack_rows(cs, work);
    Eigen::HouseholderQR<MatX> qr(aw.transpose());
    const MatX q = qr.householderQ() * MatX::Identity(nz, nz);
    const MatX z_basis = q.rightCols(nz - m);

    VecX step = VecX::Zero(nz);
    bool stationary = true;
    if (nz - m > 0) {
      const VecX gz = z_basis.transpose() * grad;
      stationarity = gz.lpNorm<Eigen::Infinity>();
      if (stationarity > options_.stationarity_tolerance) {
        const MatX hz = z_basis.transpose() * hess * z_basis;
        Eigen::SelfAdjointEigenSolver<MatX> eig(hz);
        VecX lam = eig.eigenvalues();
        const double floor = 1e-9 * std::max(1.0, lam.cwiseAbs().maxCoeff());
        for (int r = 0; r < lam.size(); ++r) lam[r] = std::max(lam[r], floor);
        const MatX& v = eig.eigenvectors();
        step = -z_basis * (v * (v.transpose() * gz).cwiseQuotient(lam));
        stationary = step.head(n).lpNorm<Eigen::Infinity>() <= options_.step_tolerance &&
                     step.tail<3>().lpNorm<Eigen::Infinity>() <= options_.step_tolerance;
      }
    } else {
      stationarity = 0.0;
    }

    if (!stationary) {
      // Ratio test against inactive constraints.
      double alpha_max = kInf;
      int blocking = -1;
      for (int k = 0; k < cs.size(); ++k) {
        if (std::find(work.begin(), work.end(), k) != work.end()) continue;
        const double slope = cs.row(k).dot(step);
        if (slope >= -1e-14 * step.norm()) continue;
        const double a = std::max(0.0, cs.residual(k, cur.z)) / -slope;
        if (a < alpha_max) {
          alpha_max = a;
          blocking = k;
        }
      }

      const double directional = grad.dot(step);
      double alpha = std::min(1.0, alpha_max);
      bool hit_block = alpha_max <= 1.0;
      bool accepted = false;
      Iterate trial;
      for (int ls = 0; ls < 60; ++ls) {
        VecX z = cur.z + alpha * step;
        std::vector<int> snap_set = work;
        if (hit_block) snap_set.push_back(blocking);
        cs.snap(z, snap_set);
        try {
          evaluate(z, &cur.evals, &trial);
        } catch (const Error&) {
          trial.value = kInf;
        }
        const double noise = 1e-14 * std::max(1.0, std::abs(cur.value));
        if (trial.value <= cur.value + 1e-4 * alpha * directional + noise) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
        hit_block = false;
        if (alpha * step.lpNorm<Eigen::Infinity>() < 1e-16 * upper) break;
      }

      if (accepted) {
        const double moved = (trial.z - cur.z).lpNorm<Eigen::Infinity>();
        cur = std::move(trial);
        stale = true;
        if (hit_block) {
          std::vector<int> grown = work;
          grown.push_back(blocking);
          if (independent(stack_rows(cs, grown))) work = std::move(grown);
          continue;
        }
        if (moved > options_.step_tolerance) continue;
      }
      // Line search stalled at the rounding floor: treat as stationary.
    }

    // Multipliers: aw^T lambda = grad.
    multipliers = VecX::Zero(m);
    if (m > 0) {
      const MatX r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
      const VecX qtg = (q.leftCols(m).transpose() * grad);
      multipliers = r.topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(qtg);
    }
    int drop = -1;
    double most_negative = -1e-10;
    for (int r = 0; r < m; ++r) {
      if (multipliers[r] < most_negative) {
        most_negative = multipliers[r];
        drop = r;
      }
    }
    if (drop < 0) {
      converged = stationarity <= 1e-7 || m == nz;
      break;
    }
    work.erase(work.begin() + drop);
  }

  ShapeSolution sol;
  sol.chords = cur.z.head(n);
  sol.module_energy.resize(modules);
  sol.energy = 0.0;
  for (int j = 0; j < modules; ++j) {
    sol.module_energy[j] = cur.evals[j].energy;
    sol.energy += cur.evals[j].energy;
    sol.local_poses.push_back(cur.evals[j].pose);
  }
  const StackResult stack = stack_and_tip(sol.local_poses);
  sol.world_poses = stack.world_poses;
  sol.tip = stack.tip;
  sol.slacks = tendon_slack(sol.chords, d, p);
  double penalty = 0.0;
  for (int i = 0; i < 3; ++i) penalty += std::max(0.0, -sol.slacks[i]);
  sol.objective = sol.energy + fl * penalty;
  for (size_t r = 0; r < work.size(); ++r) {
    if (cs.is_excess(work[r])) {
      sol.multipliers[cs.side_of(work[r])] = std::clamp(multipliers.size() > 0 ? multipliers[r] : 0.0, 0.0, fl);
    }
  }
  sol.converged = converged;
  sol.iterations = iter;
  sol.stationarity = stationarity;

  if (!converged) {
    throw Error(ErrorKind::kNoConvergence,
                "forward solve stalled (reduced gradient " +
                    std::to_string(stationarity) + " after " +
                    std::to_string(iter) + " iterations)");
  }

  if (!with_tensions) return sol;
  if (options_.tension_mode == TensionMode::kMultiplier) {
    sol.tensions = sol.multipliers;
    return sol;
  }
  const double h = options_.tension_step;
  for (int i = 0; i < 3; ++i) {
    TendonCommand up = d;
    up[i] += h;
    const double f_up = solve_unchecked(up, stiffness, &sol, false).objective;
    double slope;
    if (d[i] > 0.0) {
      TendonCommand down = d;
      down[i] -= h;
      const double f_down = solve_unchecked(down, stiffness, &sol, false).objective;
      slope = (f_up - f_down) / (2.0 * h);
    } else {
      // At d_i = 0 the optimal objective has a kink; the tendon holds no load.
      TendonCommand down = d;
      down[i] -= h;
      const double f_down = solve_unchecked(down, stiffness, &sol, false).objective;
      slope = (sol.objective - f_down) / h;
    }
    sol.tensions[i] = std::clamp(slope, 0.0, fl);
  }
  return sol;
}

ShapeSolution solve_forward(const TendonCommand& d, const VecX& stiffness,
                            const ManipulatorParams& params,
                            const ShapeSolution* warm,
                            const ForwardSolverOptions& options) {
  return ForwardSolver(params, options).solve(d, stiffness, warm);
}

std::vector<ShapeSolution> solve_trajectory(
    const std::vector<TendonCommand>& commands, const VecX& stiffness,
    const ManipulatorParams& params, const ForwardSolverOptions& options) {
  const ForwardSolver solver(params, options);
  std::vector<ShapeSolution> out;
  out.reserve(commands.size());
  for (size_t t = 0; t < commands.size(); ++t) {
    try {
      out.push_back(solver.solve(commands[t], stiffness, t ? &out.back() : nullptr));
    } catch (const Error& e) {
      throw Error(e.kind(), "trajectory step " + std::to_string(t) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace origami
