#include "flowbind/mlp_field.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace flowbind {

int MlpArchitecture::input_width() const {
  return 3 + latent_dim + (binder_com_feature ? 3 : 0) + (target_summary ? 6 : 0) + (num_classes + 1) +
         kPositionFeatures + kTimeFeatures;
}

MlpField::MlpField(const MlpArchitecture& arch) : arch_(arch) {
  if (arch.latent_dim < 1 || arch.hidden < 1 || arch.layers < 1 || arch.num_classes < 0)
    throw ArgumentError("MlpField: invalid architecture");
  layout();
}

MlpField::MlpField(const MlpArchitecture& arch, std::vector<double> parameters) : MlpField(arch) {
  if (parameters.size() != params_.size())
    throw ArgumentError("MlpField: expected " + std::to_string(params_.size()) + " parameters, got " +
                        std::to_string(parameters.size()));
  params_ = std::move(parameters);
}

void MlpField::layout() {
  std::size_t offset = 0;
  auto take = [&](Eigen::Index r, Eigen::Index c) {
    Block b{offset, r, c};
    offset += static_cast<std::size_t>(r * c);
    blocks_.push_back(b);
    return b;
  };
  const Eigen::Index din = arch_.input_width();
  const Eigen::Index h = arch_.hidden;
  const Eigen::Index dout = arch_.output_width();
  Eigen::Index width = din;
  for (int l = 0; l < arch_.layers; ++l) {
    Layer layer;
    layer.w = take(width, h);
    layer.b = take(1, h);
    layer.film_w = take(kTimeFeatures, h);
    layer.film_b = take(1, h);
    layers_.push_back(layer);
    width = h;
  }
  out_w_ = take(h, dout);
  out_b_ = take(1, dout);
  skip_w_ = take(din, dout);
  skip_b_ = take(1, dout);
  params_.assign(offset, 0.0);
}

MlpField MlpField::random(const MlpArchitecture& arch, std::uint64_t seed, double output_scale) {
  MlpField f(arch);
  Random rng(StreamKey{seed}.child("mlp-init"));
  auto fill = [&](const Block& b, double std) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(b.rows * b.cols); ++k)
      f.params_[b.offset + k] = std * rng.normal();
  };
  for (const Layer& l : f.layers_) {
    fill(l.w, 1.0 / std::sqrt(static_cast<double>(l.w.rows)));
    fill(l.film_w, 0.1 / std::sqrt(static_cast<double>(kTimeFeatures)));
    for (Eigen::Index j = 0; j < l.film_b.cols; ++j) f.params_[l.film_b.offset + static_cast<std::size_t>(j)] = 1.0;
  }
  fill(f.out_w_, output_scale / std::sqrt(static_cast<double>(arch.hidden)));
  fill(f.skip_w_, output_scale / std::sqrt(static_cast<double>(arch.input_width())));
  return f;
}

Matrix MlpField::block(const Block& b) const {
  return Eigen::Map<const Matrix>(params_.data() + b.offset, b.rows, b.cols);
}

Eigen::RowVectorXd MlpField::time_features(double t_x, double t_z) {
  Eigen::RowVectorXd f(kTimeFeatures);
  const double freqs[4] = {1.0, 2.0, 4.0, 8.0};
  for (int k = 0; k < 4; ++k) {
    const double a = freqs[k] * std::numbers::pi;
    f(k) = std::sin(a * t_x);
    f(4 + k) = std::cos(a * t_x);
    f(8 + k) = std::sin(a * t_z);
    f(12 + k) = std::cos(a * t_z);
  }
  return f;
}

Matrix MlpField::features(const NoisyState& noisy, const TargetContext& ctx) const {
  const BinderState& s = noisy.state;
  if (s.latent_dim() != arch_.latent_dim)
    throw ArgumentError("MlpField: latent width " + std::to_string(s.latent_dim()) + " does not match " +
                        std::to_string(arch_.latent_dim));
  if (noisy.t_x < 0.0 || noisy.t_x > 1.0 || noisy.t_z < 0.0 || noisy.t_z > 1.0)
    throw ArgumentError("MlpField: times must lie in [0, 1]");
  if (!s.coords.allFinite() || !s.latents.allFinite()) throw NumericError("MlpField: non-finite input state");

  const Eigen::Index n = s.coords.rows();
  Matrix f(n, arch_.input_width());
  Eigen::Index c = 0;
  f.middleCols(c, 3) = s.coords;
  c += 3;
  f.middleCols(c, arch_.latent_dim) = s.latents;
  c += arch_.latent_dim;
  if (arch_.binder_com_feature) {
    f.middleCols(c, 3).rowwise() = centroid(s.coords).transpose();
    c += 3;
  }
  if (arch_.target_summary) {
    Vec3 hot = Vec3::Zero();
    Vec3 mean = Vec3::Zero();
    if (ctx.size() > 0) {
      if (!ctx.points.allFinite()) throw NumericError("MlpField: non-finite target coordinates");
      if (ctx.hotspot_count() > 0) hot = ctx.hotspot_centroid();
      TargetContext all = ctx;
      all.hotspot.assign(ctx.size(), 1);
      mean = all.hotspot_centroid();
    }
    f.middleCols(c, 3).rowwise() = hot.transpose();
    f.middleCols(c + 3, 3).rowwise() = mean.transpose();
    c += 6;
  }
  f.middleCols(c, arch_.num_classes + 1).setZero();
  const int cls = ctx.class_label && *ctx.class_label >= 0 && *ctx.class_label < arch_.num_classes
                      ? *ctx.class_label
                      : arch_.num_classes;
  f.col(c + cls).setOnes();
  c += arch_.num_classes + 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = static_cast<double>(i) / static_cast<double>(n);
    f(i, c) = std::sin(std::numbers::pi * p);
    f(i, c + 1) = std::cos(std::numbers::pi * p);
    f(i, c + 2) = std::sin(2.0 * std::numbers::pi * p);
    f(i, c + 3) = std::cos(2.0 * std::numbers::pi * p);
  }
  c += kPositionFeatures;
  f.middleCols(c, kTimeFeatures).rowwise() = time_features(noisy.t_x, noisy.t_z);
  return f;
}

ad::Var MlpField::run(ad::Tape& tape, const Matrix& feats, const Matrix& tfeats, std::vector<Matrix>* sinks) const {
  auto param = [&](const Block& b) {
    Matrix* sink = nullptr;
    if (sinks) {
      for (std::size_t i = 0; i < blocks_.size(); ++i)
        if (blocks_[i].offset == b.offset) sink = &(*sinks)[i];
    }
    return tape.parameter(block(b), sink);
  };
  const ad::Var x = tape.constant(feats);
  const ad::Var tf = tape.constant(tfeats);
  ad::Var h = x;
  for (const Layer& l : layers_) {
    const ad::Var a = tape.add_row(tape.matmul(h, param(l.w)), param(l.b));
    const ad::Var gate = tape.add_row(tape.matmul(tf, param(l.film_w)), param(l.film_b));
    h = tape.mul(tape.silu(a), gate);
  }
  const ad::Var out = tape.add_row(tape.matmul(h, param(out_w_)), param(out_b_));
  const ad::Var skip = tape.add_row(tape.matmul(x, param(skip_w_)), param(skip_b_));
  return tape.add(out, skip);
}

Velocity MlpField::forward(const NoisyState& noisy, const TargetContext& ctx) const {
  const Matrix feats = features(noisy, ctx);
  const Matrix tfeats = feats.rightCols(kTimeFeatures);
  ad::Tape tape;
  const ad::Var out = run(tape, feats, tfeats, nullptr);
  const Matrix& o = tape.value(out);
  Velocity v;
  v.v_x = o.leftCols(3);
  v.v_z = o.rightCols(arch_.latent_dim);
  return v;
}

double MlpField::squared_error(std::span<const FieldExample> batch, std::vector<double>* grad) const {
  if (batch.empty()) throw ArgumentError("squared_error: empty batch");
  Eigen::Index rows = 0;
  for (const auto& ex : batch) rows += ex.input.state.coords.rows();
  Matrix feats(rows, arch_.input_width());
  Matrix target(rows, arch_.output_width());
  Eigen::Index r = 0;
  static const TargetContext kEmpty{};
  for (const auto& ex : batch) {
    const Eigen::Index n = ex.input.state.coords.rows();
    feats.middleRows(r, n) = features(ex.input, ex.context ? *ex.context : kEmpty);
    target.block(r, 0, n, 3) = ex.target.v_x;
    target.block(r, 3, n, arch_.latent_dim) = ex.target.v_z;
    r += n;
  }
  const Matrix tfeats = feats.rightCols(kTimeFeatures);

  std::vector<Matrix> sinks;
  if (grad) {
    for (const Block& b : blocks_) sinks.push_back(Matrix::Zero(b.rows, b.cols));
  }
  ad::Tape tape;
  const ad::Var out = run(tape, feats, tfeats, grad ? &sinks : nullptr);
  const ad::Var err = tape.sub(out, tape.constant(target));
  const ad::Var loss = tape.scale(tape.sum_squares(err), 1.0 / static_cast<double>(batch.size()));
  if (grad) {
    tape.backward(loss);
    grad->assign(params_.size(), 0.0);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      Eigen::Map<Matrix>(grad->data() + blocks_[i].offset, blocks_[i].rows, blocks_[i].cols) = sinks[i];
  }
  return tape.scalar(loss);
}

}  // namespace flowbind
