#pragma once

#include <random>
#include <vector>

#include "origami/common.hpp"

namespace origami {

struct DesignConfig {
  double mu_init = 1.45;
  double sigma_init = 0.35;
  double sigma_floor = 0.02;
  double lr_mu = 0.01;
  double lr_sigma = 0.005;
  double s_min = 0.4;
  double s_max = 2.5;
};

// A design draw: `raw` is the Gaussian sample, `value` its projection onto the
// stiffness bounds. Gradients always use `raw`.
struct DesignSample {
  VecX raw;
  VecX value;
};

struct DesignGradient {
  VecX mu;
  VecX sigma;
};

// Independent Gaussian per stiffness entry.
class DesignDistribution {
 public:
  DesignDistribution() = default;
  DesignDistribution(int dim, const DesignConfig& config);

  int dim() const { return static_cast<int>(mu_.size()); }
  const VecX& mu() const { return mu_; }
  const VecX& sigma() const { return sigma_; }
  const DesignConfig& config() const { return config_; }
  // Clips into the invariant region.
  void set(const VecX& mu, const VecX& sigma);

  DesignSample sample(std::mt19937_64& rng) const;
  DesignGradient grad_log_prob(const VecX& raw) const;
  double log_density(const VecX& raw) const;

  // One ascent step with the batch-mean baseline. Returns the step applied
  // to (mu, sigma) before clipping.
  DesignGradient update(const std::vector<DesignSample>& batch,
                        const std::vector<double>& returns);

  // mu clipped to the stiffness bounds.
  VecX mode() const;

 private:
  void project();

  DesignConfig config_;
  VecX mu_;
  VecX sigma_;
};

}  // namespace origami
