#pragma once

#include <span>
#include <vector>

#include "flowbind/types.hpp"

namespace flowbind {

inline constexpr int kLabelAlphabet = 4;
inline constexpr int kGeometryFeatures = 2;

// Per-residue local geometry of an alpha-carbon trace: cosine of the bond
// angle and sine of the dihedral. Undefined ends copy the nearest value.
Matrix local_geometry(const Coords& coords);

struct Encoding {
  Matrix mean;       // N×d_z
  Matrix log_scale;  // N×d_z
};

struct Decoding {
  Matrix geometry;  // N×2 Gaussian means (unit variance)
  Matrix logits;    // N×4
};

// Linear Gaussian encoder over [one-hot label, local geometry] and a linear
// decoder from latents to geometry means and label logits.
class ToyCodec {
 public:
  explicit ToyCodec(int latent_dim = kDefaultLatentDim);

  static ToyCodec random(int latent_dim, std::uint64_t seed);
  // Encodes [one-hot, geometry] into the first six latent coordinates with a
  // tiny posterior scale and decodes them back unchanged.
  static ToyCodec identity(int latent_dim = kDefaultLatentDim);

  int latent_dim() const { return latent_dim_; }
  static int input_width() { return kLabelAlphabet + kGeometryFeatures; }

  Encoding encode(const Matrix& geometry, std::span<const int> labels) const;
  Decoding decode(const Matrix& latents) const;
  std::vector<int> decode_labels(const Matrix& latents) const;

  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  // Offsets into the flat parameter vector.
  struct Layout {
    std::size_t enc_w, enc_b, enc_ls_w, enc_ls_b, dec_g_w, dec_g_b, dec_l_w, dec_l_b, total;
  };
  Layout layout() const;

 private:
  int latent_dim_;
  std::vector<double> params_;
};

struct ElboTerms {
  double elbo = 0.0;            // reconstruction - beta * kl
  double reconstruction = 0.0;  // log-likelihood, summed over residues
  double kl = 0.0;              // summed over residues and latent dims
};

struct CodecItem {
  Matrix geometry;
  std::vector<int> labels;
};

// Analytic KL(N(mean, exp(log_scale)^2) || N(0, I)), summed.
double gaussian_kl(const Matrix& mean, const Matrix& log_scale);

// Single-sample reparameterised estimate averaged over the batch; the noise
// for item i comes from key.child(i). `grad` receives d(-elbo)/d(params).
ElboTerms elbo_loss(const ToyCodec& codec, std::span<const CodecItem> batch, double beta, StreamKey key,
                    std::vector<double>* grad = nullptr);

struct RoundTrip {
  BinderState state;  // coordinates unchanged, latents = posterior means
  std::vector<int> labels;
  double geometry_error = 0.0;  // mean squared reconstruction error
  double label_accuracy = 0.0;
  ElboTerms terms;  // evaluated at the posterior mean (no sampling)
};

RoundTrip codec_roundtrip(const ToyCodec& codec, const BinderState& state, std::span<const int> labels);

struct CodecTrainConfig {
  int steps = 500;
  int batch = 16;
  double lr = 1e-2;
  double beta = 1e-3;
  std::uint64_t seed = 0;
};

std::vector<double> train_codec(ToyCodec& codec, std::span<const CodecItem> data, const CodecTrainConfig& cfg);

}  // namespace flowbind
