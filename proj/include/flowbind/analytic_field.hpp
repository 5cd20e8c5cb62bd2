#pragma once

#include <memory>
#include <vector>

#include "flowbind/field.hpp"

namespace flowbind {

struct MixtureComponent {
  Coords mean;          // N×3 coordinate mean
  Matrix latent_mean;   // N×d_z
  double weight = 1.0;  // unnormalised prior weight
};

struct MixtureNoise {
  double sigma_x = 1.0;  // per-coordinate jitter
  double tau_x = 0.0;    // std of a global shift shared by all residues
  double sigma_z = 1.0;  // per-latent jitter
  double c_d = 0.0;      // translation noise of the source
};

// Exact conditional expectation E[x1 - x0 | x_t] (and the latent analogue)
// when the data is a mixture of Gaussians
//   x1 = m_k + tau g 1^T + sigma e,   z1 = l_k + sigma_z e'
// and the source is x0 = n + d 1^T with n standard normal, d ~ N(0, c_d^2 I).
// Each component contributes the Gaussian regression
//   m_k + A_par rbar 1 + A_perp (r - rbar 1),   r = x_t - t m_k,
// with A = (t s1 - (1-t) s0) / (t^2 s1 + (1-t)^2 s0) evaluated on the mean
// mode (s1 = sigma^2 + N tau^2, s0 = 1 + N c_d^2) and on the orthogonal
// modes (s1 = sigma^2, s0 = 1). Components are weighted by their posterior.
class AnalyticMixtureField final : public VelocityField {
 public:
  AnalyticMixtureField(std::vector<MixtureComponent> components, MixtureNoise noise);

  Velocity forward(const NoisyState& noisy, const TargetContext& ctx) const override;
  int latent_dim() const override { return latent_dim_; }
  std::string kind() const override { return "analytic_mixture"; }

  // Posterior component probabilities at a noisy state.
  std::vector<double> responsibilities(const NoisyState& noisy) const;

  const std::vector<MixtureComponent>& components() const { return components_; }
  const MixtureNoise& noise() const { return noise_; }

 private:
  struct Branch {
    double a_par, a_perp, lam_par, lam_perp;
  };
  Branch coord_terms(double t, double n) const;
  std::vector<double> log_weights(const NoisyState& noisy) const;

  std::vector<MixtureComponent> components_;
  MixtureNoise noise_;
  int latent_dim_;
};

// Optimal velocity for data N(mu, sigma^2 I) on the coordinates with a
// standard-normal source. Latents are standard normal in the data as well,
// so their flow map is the identity.
std::shared_ptr<AnalyticMixtureField> analytic_gaussian_field(const Coords& mu, double sigma,
                                                              int latent_dim = kDefaultLatentDim);

// Closed-form scalar pieces for 1-D Gaussian data N(mu, sigma^2) with a
// standard-normal source.
double gaussian_velocity_1d(double x_t, double t, double mu, double sigma);
double gaussian_marginal_score_1d(double x_t, double t, double mu, double sigma);

}  // namespace flowbind
