#include "origami/design.hpp"

#include <cmath>

namespace origami {

namespace {

double standard_normal(std::mt19937_64& rng) {
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

DesignDistribution::DesignDistribution(int dim, const DesignConfig& config)
    : config_(config) {
  if (dim < 1) throw Error(ErrorKind::kInvalidArgument, "design dimension must be >= 1");
  if (!(config.sigma_floor > 0.0) || !(config.s_max > config.s_min)) {
    throw Error(ErrorKind::kInvalidArgument, "invalid design distribution bounds");
  }
  mu_ = VecX::Constant(dim, config.mu_init);
  sigma_ = VecX::Constant(dim, config.sigma_init);
  project();
}

void DesignDistribution::set(const VecX& mu, const VecX& sigma) {
  if (mu.size() != sigma.size() || mu.size() < 1) {
    throw Error(ErrorKind::kDimensionMismatch, "mu and sigma differ in length");
  }
  mu_ = mu;
  sigma_ = sigma;
  project();
}

void DesignDistribution::project() {
  const double sigma_cap = 0.5 * (config_.s_max - config_.s_min);
  mu_ = mu_.cwiseMax(config_.s_min).cwiseMin(config_.s_max);
  sigma_ = sigma_.cwiseMax(config_.sigma_floor).cwiseMin(std::max(sigma_cap, config_.sigma_floor));
}

DesignSample DesignDistribution::sample(std::mt19937_64& rng) const {
  DesignSample s;
  s.raw.resize(dim());
  for (int i = 0; i < dim(); ++i) s.raw[i] = mu_[i] + sigma_[i] * standard_normal(rng);
  s.value = s.raw.cwiseMax(config_.s_min).cwiseMin(config_.s_max);
  return s;
}

DesignGradient DesignDistribution::grad_log_prob(const VecX& raw) const {
  if (raw.size() != dim()) throw Error(ErrorKind::kDimensionMismatch, "design size");
  DesignGradient g;
  const VecX diff = raw - mu_;
  const VecX s2 = sigma_.cwiseProduct(sigma_);
  g.mu = diff.cwiseQuotient(s2);
  g.sigma = (diff.cwiseProduct(diff) - s2).cwiseQuotient(s2.cwiseProduct(sigma_));
  return g;
}

double DesignDistribution::log_density(const VecX& raw) const {
  double lp = 0.0;
  for (int i = 0; i < dim(); ++i) {
    const double z = (raw[i] - mu_[i]) / sigma_[i];
    lp += -0.5 * z * z - std::log(sigma_[i]) - 0.5 * std::log(2.0 * M_PI);
  }
  return lp;
}

DesignGradient DesignDistribution::update(const std::vector<DesignSample>& batch,
                                          const std::vector<double>& returns) {
  if (batch.empty() || batch.size() != returns.size()) {
    throw Error(ErrorKind::kInvalidArgument, "design batch empty or size mismatch");
  }
  double baseline = 0.0;
  for (double r : returns) baseline += r;
  baseline /= returns.size();
  DesignGradient step{VecX::Zero(dim()), VecX::Zero(dim())};
  for (size_t k = 0; k < batch.size(); ++k) {
    const DesignGradient g = grad_log_prob(batch[k].raw);
    step.mu += (returns[k] - baseline) * g.mu;
    step.sigma += (returns[k] - baseline) * g.sigma;
  }
  step.mu *= config_.lr_mu / batch.size();
  step.sigma *= config_.lr_sigma / batch.size();
  mu_ += step.mu;
  sigma_ += step.sigma;
  project();
  return step;
}

VecX DesignDistribution::mode() const {
  return mu_.cwiseMax(config_.s_min).cwiseMin(config_.s_max);
}

}  // namespace origami
