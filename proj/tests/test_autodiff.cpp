#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <utility>
#include <vector>

#include "hetnav/autodiff.hpp"
#include "hetnav/rng.hpp"

using namespace hetnav;
using ad::Tape;
using ad::Tensor;

namespace {

Tensor random_tensor(int rows, int cols, RngStream& rng) {
  Tensor t(rows, cols);
  for (double& x : t.data) x = rng.uniform(-1.0, 1.0);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

/// Central finite difference of a scalar-valued rebuild around one input
/// coordinate.
template <typename Rebuild>
double fd_coord(Tensor& input, std::size_t flat, Rebuild rebuild,
                double h = 1e-6) {
  const double saved = input.data[flat];
  input.data[flat] = saved + h;
  const double up = rebuild(input);
  input.data[flat] = saved - h;
  const double down = rebuild(input);
  input.data[flat] = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("matmul forward agrees with a plain triple loop") {
  RngStream rng(1);
  const Tensor a = random_tensor(7, 5, rng);
  const Tensor b = random_tensor(5, 9, rng);
  Tape tape;
  const ad::NodeId y = tape.matmul(tape.input(a), tape.input(b));
  const Tensor& out = tape.value(y);
  REQUIRE(out.rows == 7);
  REQUIRE(out.cols == 9);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 9; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += a.at(i, k) * b.at(k, j);
      CHECK(std::abs(out.at(i, j) - acc) <= 1e-12);
    }
  }
}

TEST_CASE("affine broadcasts the bias over rows") {
  Tensor x(2, 3);
  x.data = {1, 2, 3, 4, 5, 6};
  Tensor w(3, 2);
  w.data = {1, 0, 0, 1, 1, 1};
  Tensor b(1, 2);
  b.data = {10, 20};
  Tape tape;
  const ad::NodeId y =
      tape.affine(tape.input(x), tape.input(w), tape.input(b));
  const Tensor& out = tape.value(y);
  CHECK(out.at(0, 0) == doctest::Approx(1 + 3 + 10));
  CHECK(out.at(0, 1) == doctest::Approx(2 + 3 + 20));
  CHECK(out.at(1, 0) == doctest::Approx(4 + 6 + 10));
  CHECK(out.at(1, 1) == doctest::Approx(5 + 6 + 20));
}

TEST_CASE("elementwise and reduction forwards match hand arithmetic") {
  Tensor x(2, 2);
  x.data = {-1.0, 2.0, 0.0, -3.0};
  Tensor y(2, 2);
  y.data = {4.0, -5.0, 6.0, 7.0};
  Tape tape;
  const ad::NodeId nx = tape.input(x);
  const ad::NodeId ny = tape.input(y);

  const Tensor& relu = tape.value(tape.relu(nx));
  CHECK(relu.data == std::vector<double>{0.0, 2.0, 0.0, 0.0});

  const Tensor& sum = tape.value(tape.add(nx, ny));
  CHECK(sum.data == std::vector<double>{3.0, -3.0, 6.0, 4.0});

  const Tensor& diff = tape.value(tape.sub(nx, ny));
  CHECK(diff.data == std::vector<double>{-5.0, 7.0, -6.0, -10.0});

  const Tensor& prod = tape.value(tape.mul(nx, ny));
  CHECK(prod.data == std::vector<double>{-4.0, -10.0, 0.0, -21.0});

  const Tensor& scaled = tape.value(tape.scale(nx, -2.0));
  CHECK(scaled.data == std::vector<double>{2.0, -4.0, 0.0, 6.0});

  const Tensor& rows = tape.value(tape.sum_rows(nx));
  REQUIRE(rows.rows == 1);
  CHECK(rows.data == std::vector<double>{-1.0, -1.0});

  const Tensor& all = tape.value(tape.sum_all(nx));
  REQUIRE(all.rows == 1);
  REQUIRE(all.cols == 1);
  CHECK(all.data[0] == -2.0);
}

TEST_CASE("gather, segment sum and row scale rearrange rows as documented") {
  Tensor x(3, 2);
  x.data = {1, 2, 3, 4, 5, 6};
  Tape tape;
  const ad::NodeId nx = tape.input(x);

  const Tensor& picked = tape.value(tape.row_gather(nx, {2, 0, 2}));
  REQUIRE(picked.rows == 3);
  CHECK(picked.data == std::vector<double>{5, 6, 1, 2, 5, 6});

  const Tensor& pooled = tape.value(tape.segment_sum(nx, {1, 0, 1}, 2));
  REQUIRE(pooled.rows == 2);
  CHECK(pooled.data == std::vector<double>{3, 4, 6, 8});

  // Segments may be empty; empty rows pool to zero.
  const Tensor& sparse = tape.value(tape.segment_sum(nx, {2, 2, 0}, 3));
  CHECK(sparse.data == std::vector<double>{5, 6, 0, 0, 4, 6});

  const Tensor& weighted = tape.value(tape.row_scale(nx, {2.0, 0.5, -1.0}));
  CHECK(weighted.data == std::vector<double>{2, 4, 1.5, 2, -5, -6});

  const Tensor& stacked =
      tape.value(tape.concat_rows({nx, tape.row_gather(nx, {0})}));
  REQUIRE(stacked.rows == 4);
  CHECK(stacked.data == std::vector<double>{1, 2, 3, 4, 5, 6, 1, 2});
}

TEST_CASE("shape mismatches are rejected at graph build time") {
  Tape tape;
  const ad::NodeId a = tape.input(Tensor(2, 3));
  const ad::NodeId b = tape.input(Tensor(2, 3));
  const ad::NodeId c = tape.input(Tensor(3, 2));
  CHECK_THROWS_AS(tape.matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(tape.add(a, c), std::invalid_argument);
  CHECK_THROWS_AS(tape.row_gather(a, {0, 5}), std::invalid_argument);
  CHECK_THROWS_AS(tape.segment_sum(a, {0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(tape.segment_sum(a, {0, 3}, 2), std::invalid_argument);
  CHECK_THROWS_AS(tape.row_scale(a, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(tape.gradients(a, {a}), std::invalid_argument);
}

TEST_CASE("gradient of a graph using every op matches finite differences") {
  RngStream rng(2);
  Tensor x0 = random_tensor(4, 3, rng);
  const Tensor w = random_tensor(3, 3, rng);
  const Tensor b = random_tensor(1, 3, rng);
  const Tensor y0 = random_tensor(4, 3, rng);

  // One graph touching every op, shared by the analytic and FD passes.
  const auto build = [&](Tape& tape, const Tensor& xin) {
    const ad::NodeId x = tape.input(xin);
    const ad::NodeId h1 = tape.affine(x, tape.input(w), tape.input(b));
    const ad::NodeId h2 = tape.relu(h1);
    const ad::NodeId h3 = tape.mul(h2, tape.input(y0));
    const ad::NodeId h4 = tape.add(h3, tape.scale(x, 0.5));
    const ad::NodeId h5 = tape.sub(h4, tape.input(y0));
    const ad::NodeId h6 = tape.matmul(h5, tape.input(w));
    const ad::NodeId h7 = tape.row_gather(h6, {0, 2, 2, 3});
    const ad::NodeId h8 = tape.segment_sum(h7, {0, 1, 0, 1}, 2);
    const ad::NodeId h9 = tape.row_scale(h8, {1.5, -0.5});
    const ad::NodeId h10 = tape.concat_rows({h9, tape.sum_rows(h6)});
    return std::pair{x, tape.sum_all(h10)};
  };

  Tape tape;
  const auto [x, loss] = build(tape, x0);
  const Tensor grad = tape.gradients(loss, {x})[0];

  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double fd = fd_coord(x0, i, [&](Tensor& t) {
      Tape probe;
      const auto [_, l] = build(probe, t);
      return probe.value(l).data[0];
    });
    CHECK(std::abs(grad.data[i] - fd) <=
          1e-5 * std::max(1.0, std::abs(fd)) + 1e-8);
  }
}

TEST_CASE("relu backpropagates a zero subgradient at exactly zero") {
  Tensor x(1, 3);
  x.data = {-2.0, 0.0, 2.0};
  Tape tape;
  const ad::NodeId nx = tape.input(x);
  const ad::NodeId loss = tape.sum_all(tape.relu(nx));
  const Tensor grad = tape.gradients(loss, {nx})[0];
  CHECK(grad.data == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("three-layer mlp gradients match finite differences") {
  RngStream rng(3);
  Tensor x = random_tensor(5, 6, rng);
  Tensor w0 = random_tensor(6, 8, rng);
  Tensor b0 = random_tensor(1, 8, rng);
  Tensor w1 = random_tensor(8, 8, rng);
  Tensor b1 = random_tensor(1, 8, rng);
  Tensor w2 = random_tensor(8, 1, rng);
  Tensor b2 = random_tensor(1, 1, rng);

  const auto loss_value = [&]() {
    Tape tape;
    const ad::NodeId h0 =
        tape.relu(tape.affine(tape.input(x), tape.input(w0), tape.input(b0)));
    const ad::NodeId h1 =
        tape.relu(tape.affine(h0, tape.input(w1), tape.input(b1)));
    const ad::NodeId out = tape.affine(h1, tape.input(w2), tape.input(b2));
    return tape.value(tape.sum_all(out)).data[0];
  };

  Tape tape;
  const ad::NodeId nx = tape.input(x);
  const ad::NodeId nw0 = tape.input(w0);
  const ad::NodeId nb0 = tape.input(b0);
  const ad::NodeId nw1 = tape.input(w1);
  const ad::NodeId nb1 = tape.input(b1);
  const ad::NodeId nw2 = tape.input(w2);
  const ad::NodeId nb2 = tape.input(b2);
  const ad::NodeId h0 = tape.relu(tape.affine(nx, nw0, nb0));
  const ad::NodeId h1 = tape.relu(tape.affine(h0, nw1, nb1));
  const ad::NodeId loss = tape.sum_all(tape.affine(h1, nw2, nb2));
  const auto grads = tape.gradients(loss, {nx, nw0, nb0, nw1, nb1, nw2, nb2});

  Tensor* const targets[] = {&x, &w0, &b0, &w1, &b1, &w2, &b2};
  RngStream pick(17);
  int checked = 0;
  for (int trial = 0; trial < 70; ++trial) {
    const std::size_t which = pick.uniform_int(std::size(targets));
    Tensor& t = *targets[which];
    const std::size_t flat = pick.uniform_int(t.size());
    const double fd =
        fd_coord(t, flat, [&](Tensor&) { return loss_value(); });
    const double an = grads[which].data[flat];
    CHECK(std::abs(an - fd) <= 1e-4 * std::max(1.0, std::abs(fd)) + 1e-7);
    ++checked;
  }
  CHECK(checked == 70);
}

TEST_CASE("gradients are exact for linear graphs") {
  RngStream rng(4);
  const Tensor x = random_tensor(3, 4, rng);
  Tape tape;
  const ad::NodeId nx = tape.input(x);
  const ad::NodeId loss = tape.sum_all(tape.scale(nx, 3.0));
  const Tensor grad = tape.gradients(loss, {nx})[0];
  for (double g : grad.data) CHECK(g == 3.0);
}

TEST_CASE("gradients for unrelated nodes come back zero") {
  Tape tape;
  const ad::NodeId a = tape.input(Tensor(2, 2));
  const ad::NodeId b = tape.input(Tensor(2, 2));
  const ad::NodeId loss = tape.sum_all(a);
  const Tensor grad_b = tape.gradients(loss, {b})[0];
  REQUIRE(grad_b.same_shape(tape.value(b)));
  for (double g : grad_b.data) CHECK(g == 0.0);
}

TEST_CASE("adam leaves parameters alone under a zero gradient") {
  Tensor p(2, 2);
  p.data = {1.0, -2.0, 3.0, -4.0};
  const Tensor before = p;
  ad::AdamState adam;
  adam_step({&p}, {Tensor(2, 2)}, adam);
  CHECK(p.data == before.data);
  CHECK(adam.t == 1);
}

TEST_CASE("first adam step moves by roughly the learning rate") {
  Tensor p(1, 3);
  p.data = {0.5, 0.5, 0.5};
  Tensor g(1, 3);
  g.data = {0.4, -0.4, 1.7};
  ad::AdamState adam;
  adam.lr = 1e-3;
  adam_step({&p}, {g}, adam);
  // Bias correction makes the first step lr * g / (|g| + eps') = ~lr * sign.
  CHECK(p.data[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
  CHECK(p.data[1] == doctest::Approx(0.5 + 1e-3).epsilon(1e-6));
  CHECK(p.data[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
}

TEST_CASE("identical gradients produce identical adam updates") {
  Tensor p1(2, 2), p2(2, 2);
  p1.data = {1, 2, 3, 4};
  p2.data = {1, 2, 3, 4};
  Tensor g(2, 2);
  g.data = {0.3, -0.7, 0.1, 0.9};
  ad::AdamState adam;
  for (int step = 0; step < 5; ++step) adam_step({&p1, &p2}, {g, g}, adam);
  CHECK(p1.data == p2.data);
}

TEST_CASE("adam runs are bitwise reproducible") {
  const auto run = [] {
    RngStream rng(5);
    Tensor p = random_tensor(4, 4, rng);
    ad::AdamState adam;
    for (int step = 0; step < 20; ++step) {
      Tensor g = random_tensor(4, 4, rng);
      adam_step({&p}, {g}, adam);
    }
    return p;
  };
  const Tensor a = run();
  const Tensor b = run();
  CHECK(a.data == b.data);
}

TEST_CASE("adam rejects mismatched parameter lists") {
  Tensor p(2, 2);
  ad::AdamState adam;
  CHECK_THROWS_AS(adam_step({&p}, {}, adam), std::invalid_argument);
  adam_step({&p}, {Tensor(2, 2)}, adam);
  Tensor q(3, 3);
  CHECK_THROWS_AS(adam_step({&q}, {Tensor(3, 3)}, adam),
                  std::invalid_argument);
}
