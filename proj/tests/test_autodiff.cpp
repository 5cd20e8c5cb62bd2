#include <doctest.h>

#include <cmath>
#include <functional>

#include "flowbind/autodiff.hpp"
#include "flowbind/flow.hpp"
#include "flowbind/mlp_field.hpp"
#include "flowbind/toytask.hpp"
#include "helpers.hpp"

using namespace flowbind;
using namespace testutil;

namespace {

using Build = std::function<ad::Var(ad::Tape&, ad::Var)>;

// Gradient of a scalar expression of one parameter matrix, from the tape and
// from central differences.
void check_gradient(const Matrix& x0, const Build& build, double tol = 1e-6) {
  Matrix grad = Matrix::Zero(x0.rows(), x0.cols());
  {
    ad::Tape tape;
    const ad::Var x = tape.parameter(x0, &grad);
    tape.backward(build(tape, x));
  }
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < x0.rows(); ++i)
    for (Eigen::Index j = 0; j < x0.cols(); ++j) {
      Matrix p = x0, m = x0;
      p(i, j) += h;
      m(i, j) -= h;
      ad::Tape tp, tm;
      const double fp = tp.scalar(build(tp, tp.constant(p)));
      const double fm = tm.scalar(build(tm, tm.constant(m)));
      const double fd = (fp - fm) / (2 * h);
      CHECK(std::abs(grad(i, j) - fd) <= tol * std::max(1.0, std::abs(fd)));
    }
}

}  // namespace

TEST_CASE("tape primitives against finite differences") {
  Random rng(StreamKey{61});
  Matrix x(3, 4), w(4, 2), row(1, 4);
  rng.fill_normal(x);
  rng.fill_normal(w);
  rng.fill_normal(row);

  SUBCASE("matmul / sum_squares") {
    check_gradient(x, [&](ad::Tape& t, ad::Var v) { return t.sum_squares(t.matmul(v, t.constant(w))); });
    check_gradient(w, [&](ad::Tape& t, ad::Var v) { return t.sum_squares(t.matmul(t.constant(x), v)); });
  }
  SUBCASE("add_row, silu, tanh, exp") {
    check_gradient(row, [&](ad::Tape& t, ad::Var v) { return t.sum(t.silu(t.add_row(t.constant(x), v))); });
    check_gradient(x, [&](ad::Tape& t, ad::Var v) { return t.sum(t.tanh(t.scale(v, 0.7))); });
    check_gradient(x, [&](ad::Tape& t, ad::Var v) { return t.sum(t.exp(t.scale(v, 0.3))); });
  }
  SUBCASE("mul, sub, add and row_sum") {
    check_gradient(x, [&](ad::Tape& t, ad::Var v) {
      const ad::Var c = t.constant(x.array().sin().matrix());
      return t.sum_squares(t.row_sum(t.sub(t.mul(v, v), t.add(v, c))));
    });
  }
  SUBCASE("log_softmax_pick") {
    const std::vector<int> picks = {1, 3, 0};
    check_gradient(x, [&](ad::Tape& t, ad::Var v) { return t.sum(t.log_softmax_pick(v, picks)); });
  }
  SUBCASE("a variable used twice accumulates") {
    check_gradient(x, [&](ad::Tape& t, ad::Var v) { return t.sum(t.mul(t.silu(v), t.tanh(v))); });
  }
}

TEST_CASE("tape values") {
  ad::Tape t;
  Matrix a(1, 2);
  a << 1.0, -2.0;
  const ad::Var v = t.constant(a);
  CHECK(t.scalar(t.sum_squares(v)) == doctest::Approx(5.0));
  CHECK(t.value(t.silu(v))(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  const ad::Var lp = t.log_softmax_pick(v, {0});
  CHECK(t.scalar(lp) == doctest::Approx(1.0 - std::log(std::exp(1.0) + std::exp(-2.0))));
  CHECK_THROWS_AS(t.backward(v), std::invalid_argument);
  CHECK_THROWS_AS(t.add_row(v, t.constant(Matrix::Zero(1, 3))), std::invalid_argument);
}

namespace {

double loss_at(MlpField& f, const std::vector<double>& p, std::span<const TrainingItem> items, StreamKey key, double c_d) {
  std::copy(p.begin(), p.end(), f.parameters().begin());
  return cfm_loss(f, items, key, c_d, false).loss;
}

}  // namespace

TEST_CASE("flow matching loss gradient matches central differences") {
  const TaskSpec spec = ablation_task();
  const auto data = gen_toy_binder_dataset(StreamKey{62}, spec, 6);
  const auto items = training_items(data);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    MlpArchitecture arch;
    arch.latent_dim = spec.latent_dim;
    arch.hidden = 6;
    arch.layers = 2;
    MlpField f = MlpField::random(arch, seed, 0.5);
    const std::vector<double> p0(f.parameters().begin(), f.parameters().end());
    const LossResult r = cfm_loss(f, items, StreamKey{seed}, 0.2);
    REQUIRE(r.grad.size() == p0.size());
    Random pick(StreamKey{seed}.child("pick"));
    double worst = 0.0;
    for (int k = 0; k < 60; ++k) {
      const std::size_t i = pick.index(p0.size());
      const double h = 1e-5 * std::max(1.0, std::abs(p0[i]));
      std::vector<double> pp = p0, pm = p0;
      pp[i] += h;
      pm[i] -= h;
      const double fd = (loss_at(f, pp, items, StreamKey{seed}, 0.2) - loss_at(f, pm, items, StreamKey{seed}, 0.2)) / (2 * h);
      const double err = std::abs(fd - r.grad[i]) / std::max(1e-3, std::abs(fd) + std::abs(r.grad[i]));
      worst = std::max(worst, err);
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("mlp parameter count and features") {
  MlpArchitecture arch;
  arch.hidden = 5;
  arch.layers = 3;
  const MlpField f(arch);
  // Each layer: W, b and a time-conditioned scale (W_t, b_t).
  const std::size_t in = static_cast<std::size_t>(arch.input_width());
  std::size_t expect = 0, prev = in;
  for (int l = 0; l < 3; ++l) {
    expect += prev * 5 + 5 + kTimeFeatures * 5 + 5;
    prev = 5;
  }
  const std::size_t out = static_cast<std::size_t>(arch.output_width());
  expect += 5 * out + out + in * out + out;
  CHECK(f.num_parameters() == expect);
  CHECK_THROWS(MlpField(arch, std::vector<double>(3, 0.0)));
}
