#include "origami/policy.hpp"

#include <cmath>

#include <Eigen/QR>

namespace origami {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);

using ConstMap = Eigen::Map<const MatX>;
using Map = Eigen::Map<MatX>;

double normal(std::mt19937_64& rng) {
  // Box-Muller on raw 53-bit uniforms keeps draws identical across standard
  // libraries.
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

MatX orthogonal(int rows, int cols, double gain, std::mt19937_64& rng) {
  const bool tall = rows >= cols;
  const int r = tall ? rows : cols;
  const int c = tall ? cols : rows;
  MatX a(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<MatX> qr(a);
  MatX q = qr.householderQ() * MatX::Identity(r, c);
  const MatX rr = qr.matrixQR().topLeftCorner(c, c);
  for (int j = 0; j < c; ++j) {
    if (rr(j, j) < 0.0) q.col(j) *= -1.0;
  }
  MatX w = tall ? q : MatX(q.transpose());
  return gain * w;
}

}  // namespace

double log_prob(const ActionDistribution& dist, const VecX& action) {
  if (action.size() != dist.mean.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "action size != distribution size");
  }
  double lp = 0.0;
  for (int i = 0; i < action.size(); ++i) {
    const double z = (action[i] - dist.mean[i]) / dist.std[i];
    lp += -0.5 * z * z - std::log(dist.std[i]) - kHalfLog2Pi;
  }
  return lp;
}

double entropy(const ActionDistribution& dist) {
  double h = 0.0;
  for (int i = 0; i < dist.std.size(); ++i) h += 0.5 + kHalfLog2Pi + std::log(dist.std[i]);
  return h;
}

VecX sample_action(const ActionDistribution& dist, std::mt19937_64& rng) {
  VecX a(dist.mean.size());
  for (int i = 0; i < a.size(); ++i) a[i] = dist.mean[i] + dist.std[i] * normal(rng);
  return a;
}

ActorCritic::ActorCritic(int obs_dim, int act_dim, int hidden)
    : obs_dim_(obs_dim), act_dim_(act_dim), hidden_(hidden) {
  if (obs_dim < 1 || act_dim < 1 || hidden < 1) {
    throw Error(ErrorKind::kInvalidArgument, "network sizes must be positive");
  }
  int off = 0;
  auto take = [&](int n) {
    const int at = off;
    off += n;
    return at;
  };
  auto net = [&](int out) {
    Net n;
    n.w1 = take(hidden * obs_dim);
    n.b1 = take(hidden);
    n.w2 = take(hidden * hidden);
    n.b2 = take(hidden);
    n.w3 = take(out * hidden);
    n.b3 = take(out);
    n.out = out;
    return n;
  };
  policy_net_ = net(act_dim);
  const int log_std = take(act_dim);
  value_net_ = net(1);
  layout_ = {policy_net_.w1, policy_net_.b1, policy_net_.w2, policy_net_.b2,
             policy_net_.w3, policy_net_.b3, log_std,        value_net_.w1,
             value_net_.b1,  value_net_.w2,  value_net_.b2,  value_net_.w3,
             value_net_.b3,  off};
  theta_ = VecX::Zero(off);
}

void ActorCritic::set_parameters(const VecX& theta) {
  if (theta.size() != theta_.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "parameter vector has " + std::to_string(theta.size()) +
                    " entries, network needs " + std::to_string(theta_.size()));
  }
  theta_ = theta;
  clamp_log_std();
}

void ActorCritic::clamp_log_std() {
  auto ls = theta_.segment(layout_.log_std, act_dim_);
  ls = ls.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

void ActorCritic::initialize(std::mt19937_64& rng) {
  theta_.setZero();
  auto put = [&](int at, const MatX& w) {
    Map(theta_.data() + at, w.rows(), w.cols()) = w;
  };
  const double g = std::sqrt(2.0);
  for (const Net* n : {&policy_net_, &value_net_}) {
    put(n->w1, orthogonal(hidden_, obs_dim_, g, rng));
    put(n->w2, orthogonal(hidden_, hidden_, g, rng));
    put(n->w3, orthogonal(n->out, hidden_, n == &policy_net_ ? 0.01 : 1.0, rng));
  }
}

void ActorCritic::forward(const Net& net, const MatX& x, Cache* c) const {
  const double* t = theta_.data();
  ConstMap w1(t + net.w1, hidden_, obs_dim_);
  ConstMap w2(t + net.w2, hidden_, hidden_);
  ConstMap w3(t + net.w3, net.out, hidden_);
  Eigen::Map<const VecX> b1(t + net.b1, hidden_), b2(t + net.b2, hidden_),
      b3(t + net.b3, net.out);
  c->z1.noalias() = w1 * x;
  c->z1.colwise() += b1;
  c->h1 = c->z1.cwiseMax(0.0);
  c->z2.noalias() = w2 * c->h1;
  c->z2.colwise() += b2;
  c->h2 = c->z2.cwiseMax(0.0);
  c->out.noalias() = w3 * c->h2;
  c->out.colwise() += b3;
}

void ActorCritic::backward(const Net& net, const MatX& x, const Cache& c,
                           const MatX& dout, VecX* grad) const {
  const double* t = theta_.data();
  double* g = grad->data();
  ConstMap w2(t + net.w2, hidden_, hidden_);
  ConstMap w3(t + net.w3, net.out, hidden_);
  Map(g + net.w3, net.out, hidden_).noalias() += dout * c.h2.transpose();
  Eigen::Map<VecX>(g + net.b3, net.out) += dout.rowwise().sum();
  MatX dh2 = w3.transpose() * dout;
  dh2 = dh2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
  Map(g + net.w2, hidden_, hidden_).noalias() += dh2 * c.h1.transpose();
  Eigen::Map<VecX>(g + net.b2, hidden_) += dh2.rowwise().sum();
  MatX dh1 = w2.transpose() * dh2;
  dh1 = dh1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
  Map(g + net.w1, hidden_, obs_dim_).noalias() += dh1 * x.transpose();
  Eigen::Map<VecX>(g + net.b1, hidden_) += dh1.rowwise().sum();
}

ActionDistribution ActorCritic::policy(const VecX& obs) const {
  if (obs.size() != obs_dim_) {
    throw Error(ErrorKind::kDimensionMismatch,
                "observation has " + std::to_string(obs.size()) +
                    " entries, network expects " + std::to_string(obs_dim_));
  }
  Cache c;
  forward(policy_net_, obs, &c);
  ActionDistribution d;
  d.mean = c.out.col(0);
  d.std = theta_.segment(layout_.log_std, act_dim_)
              .cwiseMax(kLogStdMin)
              .cwiseMin(kLogStdMax)
              .array()
              .exp()
              .matrix();
  return d;
}

double ActorCritic::value(const VecX& obs) const {
  if (obs.size() != obs_dim_) {
    throw Error(ErrorKind::kDimensionMismatch, "observation size mismatch");
  }
  Cache c;
  forward(value_net_, obs, &c);
  return c.out(0, 0);
}

LossReport ActorCritic::loss(const Minibatch& mb, const LossSpec& spec,
                             VecX* grad) const {
  const int n = static_cast<int>(mb.obs.cols());
  if (mb.obs.rows() != obs_dim_ || mb.actions.rows() != act_dim_ ||
      mb.actions.cols() != n || mb.log_prob_old.size() != n ||
      mb.advantages.size() != n || mb.returns.size() != n || mb.values_old.size() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "minibatch fields disagree in size");
  }
  if (n == 0) return {};
  if (grad) grad->setZero(theta_.size());

  Cache pc, vc;
  forward(policy_net_, mb.obs, &pc);
  forward(value_net_, mb.obs, &vc);

  const VecX raw_ls = theta_.segment(layout_.log_std, act_dim_);
  VecX log_std = raw_ls.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  const VecX inv_std = (-log_std).array().exp().matrix();

  LossReport rep;
  const double inv_n = 1.0 / n;
  MatX dmean(act_dim_, n);
  VecX dlog_std = VecX::Zero(act_dim_);
  MatX dvalue(1, n);
  double ent = 0.0;
  for (int i = 0; i < act_dim_; ++i) ent += 0.5 + kHalfLog2Pi + log_std[i];

  for (int k = 0; k < n; ++k) {
    double lp = 0.0;
    for (int i = 0; i < act_dim_; ++i) {
      const double z = (mb.actions(i, k) - pc.out(i, k)) * inv_std[i];
      lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
    }
    const double log_ratio = lp - mb.log_prob_old[k];
    const double ratio = std::exp(log_ratio);
    const double a = mb.advantages[k];
    const double clipped = std::clamp(ratio, 1.0 - spec.clip, 1.0 + spec.clip);
    const double unclipped_term = ratio * a;
    const double clipped_term = clipped * a;
    rep.policy_loss -= std::min(unclipped_term, clipped_term) * inv_n;
    rep.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
    if (std::abs(ratio - 1.0) > spec.clip) rep.clip_fraction += inv_n;
    rep.max_ratio_deviation = std::max(rep.max_ratio_deviation, std::abs(ratio - 1.0));

    // d(-min(.))/d lp; zero when the clipped branch is selected and flat.
    const bool flat = (a >= 0.0 && ratio > 1.0 + spec.clip) ||
                      (a < 0.0 && ratio < 1.0 - spec.clip);
    const double dlp = flat ? 0.0 : -unclipped_term * inv_n;
    for (int i = 0; i < act_dim_; ++i) {
      const double z = (mb.actions(i, k) - pc.out(i, k)) * inv_std[i];
      dmean(i, k) = dlp * z * inv_std[i];
      dlog_std[i] += dlp * (z * z - 1.0);
    }

    const double v = vc.out(0, k);
    const double ret = mb.returns[k];
    const double err = v - ret;
    double sq = err * err;
    double dv = 2.0 * err;
    if (spec.value_clip > 0.0) {
      const double delta = v - mb.values_old[k];
      const double vclip = mb.values_old[k] + std::clamp(delta, -spec.value_clip, spec.value_clip);
      const double sq_clip = (vclip - ret) * (vclip - ret);
      if (sq_clip > sq) {
        sq = sq_clip;
        dv = std::abs(delta) < spec.value_clip ? 2.0 * (vclip - ret) : 0.0;
      }
    }
    rep.value_loss += sq * inv_n;
    dvalue(0, k) = spec.value_coef * dv * inv_n;
  }
  rep.entropy = ent;
  rep.loss = rep.policy_loss + spec.value_coef * rep.value_loss - spec.entropy_coef * ent;

  if (grad) {
    backward(policy_net_, mb.obs, pc, dmean, grad);
    backward(value_net_, mb.obs, vc, dvalue, grad);
    for (int i = 0; i < act_dim_; ++i) {
      const bool inside = raw_ls[i] > kLogStdMin && raw_ls[i] < kLogStdMax;
      (*grad)[layout_.log_std + i] =
          inside ? dlog_std[i] - spec.entropy_coef : 0.0;
    }
  }
  return rep;
}

}  // namespace origami
