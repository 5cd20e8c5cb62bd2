#include "flowbind/analytic_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace flowbind {

AnalyticMixtureField::AnalyticMixtureField(std::vector<MixtureComponent> components, MixtureNoise noise)
    : components_(std::move(components)), noise_(noise) {
  if (components_.empty()) throw ArgumentError("AnalyticMixtureField: no components");
  if (!(noise_.sigma_x > 0.0) || !(noise_.sigma_z > 0.0) || noise_.tau_x < 0.0 || noise_.c_d < 0.0)
    throw ArgumentError("AnalyticMixtureField: invalid noise parameters");
  const auto n = components_.front().mean.rows();
  latent_dim_ = static_cast<int>(components_.front().latent_mean.cols());
  if (n < 1 || latent_dim_ < 1) throw ArgumentError("AnalyticMixtureField: empty component");
  for (const auto& c : components_) {
    if (c.mean.rows() != n || c.latent_mean.rows() != n || c.latent_mean.cols() != latent_dim_)
      throw ArgumentError("AnalyticMixtureField: component shapes differ");
    if (!(c.weight > 0.0)) throw ArgumentError("AnalyticMixtureField: weights must be positive");
  }
}

AnalyticMixtureField::Branch AnalyticMixtureField::coord_terms(double t, double n) const {
  const double s2 = noise_.sigma_x * noise_.sigma_x;
  const double s1_par = s2 + n * noise_.tau_x * noise_.tau_x;
  const double s0_par = 1.0 + n * noise_.c_d * noise_.c_d;
  const double u = 1.0 - t;
  Branch b;
  b.lam_par = t * t * s1_par + u * u * s0_par;
  b.lam_perp = t * t * s2 + u * u;
  b.a_par = (t * s1_par - u * s0_par) / b.lam_par;
  b.a_perp = (t * s2 - u) / b.lam_perp;
  return b;
}

std::vector<double> AnalyticMixtureField::log_weights(const NoisyState& noisy) const {
  const double t = noisy.t_x;
  const double tz = noisy.t_z;
  const Coords& x = noisy.state.coords;
  const Matrix& z = noisy.state.latents;
  const double n = static_cast<double>(x.rows());
  const Branch b = coord_terms(t, n);
  const double sz2 = noise_.sigma_z * noise_.sigma_z;
  const double lam_z = tz * tz * sz2 + (1.0 - tz) * (1.0 - tz);

  std::vector<double> lw(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const MixtureComponent& c = components_[k];
    const Coords r = x - t * c.mean;
    const Eigen::RowVector3d rbar = r.colwise().mean();
    const double par = n * rbar.squaredNorm();
    const double perp = (r.rowwise() - rbar).squaredNorm();
    const double lz = (z - tz * c.latent_mean).squaredNorm();
    lw[k] = std::log(c.weight) - 0.5 * (par / b.lam_par + perp / b.lam_perp + lz / lam_z);
  }
  return lw;
}

std::vector<double> AnalyticMixtureField::responsibilities(const NoisyState& noisy) const {
  std::vector<double> lw = log_weights(noisy);
  const double m = *std::max_element(lw.begin(), lw.end());
  double total = 0.0;
  for (double& w : lw) {
    w = std::exp(w - m);
    total += w;
  }
  for (double& w : lw) w /= total;
  return lw;
}

Velocity AnalyticMixtureField::forward(const NoisyState& noisy, const TargetContext&) const {
  const Coords& x = noisy.state.coords;
  const Matrix& z = noisy.state.latents;
  if (x.rows() != components_.front().mean.rows() || z.cols() != latent_dim_ || z.rows() != x.rows())
    throw ArgumentError("AnalyticMixtureField: state shape does not match the components");
  if (!x.allFinite() || !z.allFinite()) throw NumericError("AnalyticMixtureField: non-finite input state");
  const double t = noisy.t_x;
  const double tz = noisy.t_z;
  const Branch b = coord_terms(t, static_cast<double>(x.rows()));
  const double sz2 = noise_.sigma_z * noise_.sigma_z;
  const double a_z = (tz * sz2 - (1.0 - tz)) / (tz * tz * sz2 + (1.0 - tz) * (1.0 - tz));

  const std::vector<double> w = responsibilities(noisy);
  Velocity v{Coords::Zero(x.rows(), 3), Matrix::Zero(z.rows(), z.cols())};
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (w[k] == 0.0) continue;
    const MixtureComponent& c = components_[k];
    const Coords r = x - t * c.mean;
    const Eigen::RowVector3d rbar = r.colwise().mean();
    Coords vk = c.mean + b.a_perp * r;
    vk.rowwise() += (b.a_par - b.a_perp) * rbar;
    v.v_x += w[k] * vk;
    v.v_z += w[k] * (c.latent_mean + a_z * (z - tz * c.latent_mean));
  }
  return v;
}

std::shared_ptr<AnalyticMixtureField> analytic_gaussian_field(const Coords& mu, double sigma, int latent_dim) {
  if (!(sigma > 0.0)) throw ArgumentError("analytic_gaussian_field: sigma must be positive");
  MixtureComponent c{mu, Matrix::Zero(mu.rows(), latent_dim), 1.0};
  return std::make_shared<AnalyticMixtureField>(std::vector<MixtureComponent>{c},
                                                MixtureNoise{sigma, 0.0, 1.0, 0.0});
}

double gaussian_velocity_1d(double x_t, double t, double mu, double sigma) {
  const double s2 = sigma * sigma;
  const double u = 1.0 - t;
  return mu + (t * s2 - u) / (t * t * s2 + u * u) * (x_t - t * mu);
}

double gaussian_marginal_score_1d(double x_t, double t, double mu, double sigma) {
  const double var = t * t * sigma * sigma + (1.0 - t) * (1.0 - t);
  return -(x_t - t * mu) / var;
}

}  // namespace flowbind
