#include "flowbind/codec.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "flowbind/autodiff.hpp"
#include "flowbind/train.hpp"

namespace flowbind {

Matrix local_geometry(const Coords& x) {
  const Eigen::Index n = x.rows();
  Matrix g = Matrix::Zero(n, kGeometryFeatures);
  if (n < 3) return g;
  auto fill_ends = [&](int col, Eigen::Index first, Eigen::Index last) {
    if (first > last) return;
    for (Eigen::Index i = 0; i < first; ++i) g(i, col) = g(first, col);
    for (Eigen::Index i = last + 1; i < n; ++i) g(i, col) = g(last, col);
  };
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const Eigen::RowVector3d a = x.row(i - 1) - x.row(i);
    const Eigen::RowVector3d b = x.row(i + 1) - x.row(i);
    const double den = a.norm() * b.norm();
    g(i, 0) = den > 0.0 ? a.dot(b) / den : 0.0;
  }
  fill_ends(0, 1, n - 2);
  for (Eigen::Index i = 1; i + 2 < n; ++i) {
    const Eigen::Vector3d b1 = (x.row(i) - x.row(i - 1)).transpose();
    const Eigen::Vector3d b2 = (x.row(i + 1) - x.row(i)).transpose();
    const Eigen::Vector3d b3 = (x.row(i + 2) - x.row(i + 1)).transpose();
    const Eigen::Vector3d n1 = b1.cross(b2);
    const Eigen::Vector3d n2 = b2.cross(b3);
    const double y = b2.norm() * b1.dot(n2);
    const double xx = n1.dot(n2);
    g(i, 1) = (y == 0.0 && xx == 0.0) ? 0.0 : std::sin(std::atan2(y, xx));
  }
  fill_ends(1, 1, n - 3);
  return g;
}

ToyCodec::ToyCodec(int latent_dim) : latent_dim_(latent_dim) {
  if (latent_dim < 1) throw ArgumentError("ToyCodec: latent width must be positive");
  params_.assign(layout().total, 0.0);
}

ToyCodec::Layout ToyCodec::layout() const {
  const std::size_t dz = static_cast<std::size_t>(latent_dim_);
  const std::size_t din = static_cast<std::size_t>(input_width());
  Layout l{};
  std::size_t o = 0;
  l.enc_w = o, o += din * dz;
  l.enc_b = o, o += dz;
  l.enc_ls_w = o, o += din * dz;
  l.enc_ls_b = o, o += dz;
  l.dec_g_w = o, o += dz * kGeometryFeatures;
  l.dec_g_b = o, o += kGeometryFeatures;
  l.dec_l_w = o, o += dz * kLabelAlphabet;
  l.dec_l_b = o, o += kLabelAlphabet;
  l.total = o;
  return l;
}

ToyCodec ToyCodec::random(int latent_dim, std::uint64_t seed) {
  ToyCodec c(latent_dim);
  Random rng(StreamKey{seed}.child("codec-init"));
  const Layout l = c.layout();
  for (std::size_t i = l.enc_w; i < l.enc_b; ++i) c.params_[i] = 0.5 * rng.normal();
  for (std::size_t i = l.enc_ls_b; i < l.enc_ls_b + static_cast<std::size_t>(latent_dim); ++i) c.params_[i] = -1.0;
  for (std::size_t i = l.dec_g_w; i < l.dec_g_b; ++i) c.params_[i] = 0.3 * rng.normal();
  for (std::size_t i = l.dec_l_w; i < l.dec_l_b; ++i) c.params_[i] = 0.3 * rng.normal();
  return c;
}

ToyCodec ToyCodec::identity(int latent_dim) {
  if (latent_dim < input_width())
    throw ArgumentError("ToyCodec::identity needs at least " + std::to_string(input_width()) + " latent dims");
  ToyCodec c(latent_dim);
  const Layout l = c.layout();
  const std::size_t dz = static_cast<std::size_t>(latent_dim);
  for (std::size_t k = 0; k < static_cast<std::size_t>(input_width()); ++k) c.params_[l.enc_w + k * dz + k] = 1.0;
  for (std::size_t k = 0; k < dz; ++k) c.params_[l.enc_ls_b + k] = -20.0;
  for (std::size_t j = 0; j < kGeometryFeatures; ++j)
    c.params_[l.dec_g_w + (kLabelAlphabet + j) * kGeometryFeatures + j] = 1.0;
  for (std::size_t k = 0; k < kLabelAlphabet; ++k) c.params_[l.dec_l_w + k * kLabelAlphabet + k] = 10.0;
  return c;
}

namespace {

Matrix block(std::span<const double> p, std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(p.data() + offset, rows, cols);
}

Matrix encoder_input(const Matrix& geometry, std::span<const int> labels) {
  if (geometry.cols() != kGeometryFeatures || static_cast<std::size_t>(geometry.rows()) != labels.size())
    throw ArgumentError("ToyCodec: geometry and labels disagree in shape");
  Matrix f = Matrix::Zero(geometry.rows(), ToyCodec::input_width());
  for (Eigen::Index i = 0; i < geometry.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= kLabelAlphabet) throw ArgumentError("ToyCodec: label out of range");
    f(i, l) = 1.0;
  }
  f.rightCols(kGeometryFeatures) = geometry;
  return f;
}

}  // namespace

Encoding ToyCodec::encode(const Matrix& geometry, std::span<const int> labels) const {
  const Layout l = layout();
  const Matrix f = encoder_input(geometry, labels);
  const Eigen::Index dz = latent_dim_;
  Encoding e;
  e.mean = f * block(params_, l.enc_w, input_width(), dz);
  e.mean.rowwise() += block(params_, l.enc_b, 1, dz).row(0);
  e.log_scale = f * block(params_, l.enc_ls_w, input_width(), dz);
  e.log_scale.rowwise() += block(params_, l.enc_ls_b, 1, dz).row(0);
  return e;
}

Decoding ToyCodec::decode(const Matrix& z) const {
  if (z.cols() != latent_dim_) throw ArgumentError("ToyCodec: latent width mismatch");
  const Layout l = layout();
  Decoding d;
  d.geometry = z * block(params_, l.dec_g_w, latent_dim_, kGeometryFeatures);
  d.geometry.rowwise() += block(params_, l.dec_g_b, 1, kGeometryFeatures).row(0);
  d.logits = z * block(params_, l.dec_l_w, latent_dim_, kLabelAlphabet);
  d.logits.rowwise() += block(params_, l.dec_l_b, 1, kLabelAlphabet).row(0);
  return d;
}

std::vector<int> ToyCodec::decode_labels(const Matrix& z) const {
  const Matrix logits = decode(z).logits;
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index k;
    logits.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

double gaussian_kl(const Matrix& mean, const Matrix& log_scale) {
  if (mean.rows() != log_scale.rows() || mean.cols() != log_scale.cols())
    throw ArgumentError("gaussian_kl: shape mismatch");
  return 0.5 * (mean.array().square() + (2.0 * log_scale.array()).exp() - 1.0 - 2.0 * log_scale.array()).sum();
}

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double label_loglik(const Matrix& logits, std::span<const int> labels) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    s += logits(i, labels[static_cast<std::size_t>(i)]) - m - std::log((logits.row(i).array() - m).exp().sum());
  }
  return s;
}

}  // namespace

ElboTerms elbo_loss(const ToyCodec& codec, std::span<const CodecItem> batch, double beta, StreamKey key,
                    std::vector<double>* grad) {
  if (batch.empty()) throw ArgumentError("elbo_loss: empty batch");
  if (beta < 0.0) throw ArgumentError("elbo_loss: beta must be non-negative");
  const int dz = codec.latent_dim();
  Eigen::Index rows = 0;
  for (const auto& it : batch) rows += it.geometry.rows();
  Matrix f(rows, ToyCodec::input_width());
  Matrix g(rows, kGeometryFeatures);
  Matrix eps(rows, dz);
  std::vector<int> labels;
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto n = batch[i].geometry.rows();
    f.middleRows(r, n) = encoder_input(batch[i].geometry, batch[i].labels);
    g.middleRows(r, n) = batch[i].geometry;
    Random rng(key.child(static_cast<std::uint64_t>(i)));
    Matrix e(n, dz);
    rng.fill_normal(e);
    eps.middleRows(r, n) = e;
    labels.insert(labels.end(), batch[i].labels.begin(), batch[i].labels.end());
    r += n;
  }

  const auto l = codec.layout();
  const auto p = codec.parameters();
  std::vector<Matrix> sinks;
  const std::size_t offsets[8] = {l.enc_w, l.enc_b, l.enc_ls_w, l.enc_ls_b, l.dec_g_w, l.dec_g_b, l.dec_l_w, l.dec_l_b};
  const Eigen::Index shape[8][2] = {{ToyCodec::input_width(), dz}, {1, dz}, {ToyCodec::input_width(), dz}, {1, dz},
                                    {dz, kGeometryFeatures},        {1, kGeometryFeatures},
                                    {dz, kLabelAlphabet},           {1, kLabelAlphabet}};
  for (int k = 0; k < 8; ++k) sinks.push_back(Matrix::Zero(shape[k][0], shape[k][1]));

  ad::Tape t;
  std::vector<ad::Var> w;
  for (int k = 0; k < 8; ++k)
    w.push_back(t.parameter(block(p, offsets[k], shape[k][0], shape[k][1]), grad ? &sinks[static_cast<std::size_t>(k)] : nullptr));
  const ad::Var in = t.constant(f);
  const ad::Var mean = t.add_row(t.matmul(in, w[0]), w[1]);
  const ad::Var ls = t.add_row(t.matmul(in, w[2]), w[3]);
  const ad::Var z = t.add(mean, t.mul(t.exp(ls), t.constant(eps)));
  const ad::Var gm = t.add_row(t.matmul(z, w[4]), w[5]);
  const ad::Var logits = t.add_row(t.matmul(z, w[6]), w[7]);

  const ad::Var sq = t.sum_squares(t.sub(gm, t.constant(g)));
  const ad::Var lab = t.sum(t.log_softmax_pick(logits, labels));
  const ad::Var kl_part = t.add(t.add(t.sum_squares(mean), t.sum(t.exp(t.scale(ls, 2.0)))), t.scale(t.sum(ls), -2.0));
  // -elbo up to constants: 0.5 sq - lab + beta * 0.5 kl_part
  const ad::Var neg = t.add(t.sub(t.scale(sq, 0.5), lab), t.scale(kl_part, 0.5 * beta));
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const ad::Var loss = t.scale(neg, inv_b);

  const double count = static_cast<double>(rows);
  ElboTerms out;
  out.reconstruction = (-0.5 * t.scalar(sq) - count * kGeometryFeatures * kHalfLog2Pi + t.scalar(lab)) * inv_b;
  out.kl = 0.5 * (t.scalar(kl_part) - count * dz) * inv_b;
  out.elbo = out.reconstruction - beta * out.kl;
  if (!std::isfinite(out.elbo)) throw NumericError("elbo_loss: non-finite value");
  if (grad) {
    t.backward(loss);
    grad->assign(p.size(), 0.0);
    for (int k = 0; k < 8; ++k)
      Eigen::Map<Matrix>(grad->data() + offsets[k], shape[k][0], shape[k][1]) = sinks[static_cast<std::size_t>(k)];
  }
  return out;
}

RoundTrip codec_roundtrip(const ToyCodec& codec, const BinderState& state, std::span<const int> labels) {
  if (labels.size() != state.size()) throw ArgumentError("codec_roundtrip: label count does not match residues");
  const Matrix geometry = local_geometry(state.coords);
  const Encoding e = codec.encode(geometry, labels);
  const Decoding d = codec.decode(e.mean);
  RoundTrip out;
  out.state.coords = state.coords;
  out.state.latents = e.mean;
  out.labels = codec.decode_labels(e.mean);
  const double n = static_cast<double>(state.size());
  out.geometry_error = (d.geometry - geometry).squaredNorm() / (n * kGeometryFeatures);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += out.labels[i] == labels[i] ? 1 : 0;
  out.label_accuracy = static_cast<double>(hits) / n;
  out.terms.reconstruction = -0.5 * (d.geometry - geometry).squaredNorm() - n * kGeometryFeatures * kHalfLog2Pi +
                             label_loglik(d.logits, labels);
  out.terms.kl = gaussian_kl(e.mean, e.log_scale);
  out.terms.elbo = out.terms.reconstruction - out.terms.kl;
  return out;
}

std::vector<double> train_codec(ToyCodec& codec, std::span<const CodecItem> data, const CodecTrainConfig& cfg) {
  if (data.empty()) throw ArgumentError("train_codec: empty dataset");
  if (cfg.batch < 1 || cfg.steps < 0) throw ArgumentError("train_codec: invalid configuration");
  Adam opt(codec.parameters().size());
  std::vector<double> trace;
  const StreamKey root{cfg.seed};
  std::vector<double> grad;
  for (int s = 0; s < cfg.steps; ++s) {
    Random pick(root.derive("codec-batch", static_cast<std::uint64_t>(s)));
    std::vector<CodecItem> batch;
    for (int b = 0; b < cfg.batch; ++b) batch.push_back(data[pick.index(data.size())]);
    const ElboTerms t = elbo_loss(codec, batch, cfg.beta, root.derive("codec-eps", static_cast<std::uint64_t>(s)), &grad);
    trace.push_back(-t.elbo);
    opt.step(codec.parameters(), grad, cfg.lr);
  }
  return trace;
}

}  // namespace flowbind
