#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "uavsec/nn.hpp"

using namespace uavsec::nn;

namespace {

// Plain-loop forward pass for an Mlp given its parameters.
std::vector<double> loop_forward(const std::vector<int>& dims, const std::vector<const Matrix*>& p,
                                 const std::vector<double>& x, Activation out) {
  std::vector<double> a = x;
  const std::size_t layers = dims.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& w = *p[2 * l];
    const Matrix& b = *p[2 * l + 1];
    std::vector<double> z(static_cast<std::size_t>(dims[l + 1]));
    for (int i = 0; i < dims[l + 1]; ++i) {
      double s = b(i, 0);
      for (int j = 0; j < dims[l]; ++j) s += w(i, j) * a[static_cast<std::size_t>(j)];
      const bool last = l + 1 == layers;
      if (!last) s = s > 0 ? s : 0;
      else if (out == Activation::Tanh) s = std::tanh(s);
      z[static_cast<std::size_t>(i)] = s;
    }
    a = std::move(z);
  }
  return a;
}

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0, scale);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

// loss = sum(weights .* net(x)); returns the worst relative error over
// every parameter, compared with central differences.
struct FdReport {
  double worst = 0;
  int checked = 0;
};

FdReport finite_difference_check(Network& net, const Matrix& x, const Matrix& weights, double h = 1e-5) {
  Network::Cache cache;
  net.forward(x, &cache);
  std::vector<Matrix> grads;
  net.backward(cache, weights, grads);
  auto loss = [&] { return (net.forward(x).array() * weights.array()).sum(); };
  FdReport rep;
  auto params = net.mutable_parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p.data()[i];
      p.data()[i] = orig + h;
      const double up = loss();
      p.data()[i] = orig - h;
      const double down = loss();
      p.data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[k].data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      rep.worst = std::max(rep.worst, std::abs(numeric - analytic) / denom);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace

TEST_CASE("zero network with tanh output gives zeros") {
  std::mt19937_64 rng(1);
  Mlp mlp({4, 5, 3}, Activation::Tanh, rng);
  for (Matrix* p : mlp.parameters()) p->setZero();
  const Matrix y = mlp.forward(Matrix::Constant(4, 2, 0.7));
  CHECK(y.isZero(0));
}

TEST_CASE("identity linear layer passes input through") {
  std::mt19937_64 rng(1);
  Mlp mlp({3, 3}, Activation::Linear, rng);
  mlp.parameters()[0]->setIdentity();
  mlp.parameters()[1]->setZero();
  Matrix x(3, 1);
  x << 1.5, -2, 0.25;
  CHECK(mlp.forward(x).isApprox(x));
}

TEST_CASE("forward matches a plain-loop oracle") {
  std::mt19937_64 rng(7);
  for (Activation act : {Activation::Tanh, Activation::Linear}) {
    const std::vector<int> dims{6, 9, 7, 3};
    Mlp mlp(dims, act, rng);
    for (Matrix* p : mlp.parameters()) *p = random_matrix(static_cast<int>(p->rows()), static_cast<int>(p->cols()), rng, 0.5);
    const Matrix x = random_matrix(6, 4, rng);
    const Matrix y = mlp.forward(x);
    const auto cp = static_cast<const Mlp&>(mlp).parameters();
    for (int c = 0; c < 4; ++c) {
      std::vector<double> col(6);
      for (int r = 0; r < 6; ++r) col[static_cast<std::size_t>(r)] = x(r, c);
      const auto want = loop_forward(dims, cp, col, act);
      for (int r = 0; r < 3; ++r) CHECK(std::abs(y(r, c) - want[static_cast<std::size_t>(r)]) < 1e-12);
    }
  }
}

TEST_CASE("shape errors are reported") {
  std::mt19937_64 rng(1);
  Mlp mlp({4, 3}, Activation::Linear, rng);
  CHECK_THROWS_AS(mlp.forward(Matrix::Zero(5, 1)), std::invalid_argument);
  Network net(NetworkSpec{{6}, 0, 2, {4}, 3, Activation::Tanh}, rng);
  CHECK_THROWS_AS(net.forward(Matrix::Zero(7, 1)), std::invalid_argument);
}

TEST_CASE("4-8-3 gradients match central differences") {
  std::mt19937_64 rng(21);
  for (Activation act : {Activation::Tanh, Activation::Linear}) {
    Network net(NetworkSpec{{}, 4, 0, {8}, 3, act}, rng);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix w = random_matrix(3, 5, rng);
    const FdReport r = finite_difference_check(net, x, w);
    CHECK(r.checked == 4 * 8 + 8 + 8 * 3 + 3);
    CHECK(r.worst < 1e-4);
  }
}

TEST_CASE("gradients through the expansion layer match central differences") {
  std::mt19937_64 rng(5);
  // actor: one 16-entry block, tanh head
  Network actor(NetworkSpec{{16}, 0, 2, {12, 8}, 3, Activation::Tanh}, rng);
  // critic: two blocks plus a 6-entry action tail, linear head
  Network critic(NetworkSpec{{16, 11}, 6, 2, {12, 8}, 1, Activation::Linear}, rng);
  const FdReport a = finite_difference_check(actor, random_matrix(16, 6, rng), random_matrix(3, 6, rng));
  const FdReport c = finite_difference_check(critic, random_matrix(33, 6, rng), random_matrix(1, 6, rng));
  CHECK(a.worst < 1e-4);
  CHECK(c.worst < 1e-4);
  CHECK(a.checked + c.checked >= 200);
}

TEST_CASE("input gradient matches central differences") {
  std::mt19937_64 rng(9);
  Network net(NetworkSpec{{7, 5}, 2, 2, {10}, 1, Activation::Linear}, rng);
  Matrix x = random_matrix(14, 3, rng);
  const Matrix w = random_matrix(1, 3, rng);
  Network::Cache cache;
  net.forward(x, &cache);
  std::vector<Matrix> grads;
  const Matrix gx = net.backward(cache, w, grads);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double up = (net.forward(x).array() * w.array()).sum();
    x.data()[i] = orig - h;
    const double down = (net.forward(x).array() * w.array()).sum();
    x.data()[i] = orig;
    CHECK(gx.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("expansion layer widens the last three scalars") {
  std::mt19937_64 rng(2);
  ExpansionLayer e(16, 2, rng);
  CHECK(e.output_dim() == 16 - 3 + 6);
  Matrix x = random_matrix(16, 2, rng);
  Matrix pre;
  const Matrix y = e.forward(x, &pre);
  CHECK(y.topRows(13).isApprox(x.topRows(13)));
  CHECK(pre.rows() == 6);
  CHECK((y.bottomRows(6).array() >= 0).all());
  NetworkSpec s{{16, 11}, 6, 2, {4}, 1, Activation::Linear};
  CHECK(s.input_dim() == 33);
  CHECK(s.expanded_dim() == 19 + 14 + 6);
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  std::mt19937_64 rng(3);
  Network net(NetworkSpec{{9}, 0, 2, {6, 4}, 3, Activation::Tanh}, rng);
  Network::Cache cache;
  net.forward(random_matrix(9, 4, rng), &cache);
  std::vector<Matrix> grads;
  const Matrix gx = net.backward(cache, Matrix::Zero(3, 4), grads);
  for (const auto& g : grads) CHECK(g.isZero(0));
  CHECK(gx.isZero(0));
}

TEST_CASE("batch gradient is the sum of per-sample gradients") {
  std::mt19937_64 rng(4);
  Network net(NetworkSpec{{8}, 0, 2, {6}, 2, Activation::Tanh}, rng);
  const Matrix x = random_matrix(8, 3, rng);
  const Matrix w = random_matrix(2, 3, rng);
  Network::Cache cache;
  net.forward(x, &cache);
  std::vector<Matrix> batch;
  net.backward(cache, w, batch);
  std::vector<Matrix> sum = net.zero_gradients();
  for (int c = 0; c < 3; ++c) {
    Network::Cache ci;
    net.forward(x.col(c), &ci);
    std::vector<Matrix> g;
    net.backward(ci, w.col(c), g);
    for (std::size_t k = 0; k < g.size(); ++k) sum[k] += g[k];
  }
  for (std::size_t k = 0; k < sum.size(); ++k) CHECK(sum[k].isApprox(batch[k], 1e-12));
}

TEST_CASE("stale caches are refused") {
  std::mt19937_64 rng(4);
  Network net(NetworkSpec{{8}, 0, 2, {6}, 2, Activation::Tanh}, rng);
  Network::Cache cache;
  net.forward(random_matrix(8, 2, rng), &cache);
  (*net.mutable_parameters()[0])(0, 0) += 0.1;
  std::vector<Matrix> g;
  CHECK_THROWS_AS(net.backward(cache, Matrix::Ones(2, 2), g), std::logic_error);
}

TEST_CASE("initialization is seeded and bounded") {
  std::mt19937_64 a(42), b(42);
  const Network na(NetworkSpec{{10}, 0, 2, {20, 5}, 3, Activation::Tanh}, a);
  const Network nb(NetworkSpec{{10}, 0, 2, {20, 5}, 3, Activation::Tanh}, b);
  const auto pa = na.parameters(), pb = nb.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) CHECK(*pa[k] == *pb[k]);

  std::mt19937_64 rng(1);
  const Matrix w = xavier_uniform(64, 32, 32, 64, rng);
  const double limit = std::sqrt(6.0 / 96.0);
  CHECK(w.maxCoeff() <= limit);
  CHECK(w.minCoeff() >= -limit);
  CHECK(w.maxCoeff() > 0.9 * limit);
  // mlp biases start at zero
  for (std::size_t k = 2; k < pa.size(); k += 2) CHECK(pa[k + 1]->isZero(0));
}

TEST_CASE("Adam leaves parameters alone on zero gradients") {
  Matrix p = Matrix::Constant(2, 2, 0.5);
  Adam opt({&p}, AdamConfig{});
  opt.step({&p}, {Matrix::Zero(2, 2)});
  CHECK(p == Matrix::Constant(2, 2, 0.5));
}

TEST_CASE("first Adam step moves by lr in the gradient sign") {
  Matrix p(1, 3);
  p << 1.0, -2.0, 0.5;
  const Matrix start = p;
  Matrix g(1, 3);
  g << 0.3, -7.0, 1e-3;
  Adam opt({&p}, AdamConfig{});
  opt.step({&p}, {g});
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
  for (int i = 0; i < 3; ++i) {
    const double want = 1e-3 * g(0, i) / (std::abs(g(0, i)) + 1e-8);
    CHECK(start(0, i) - p(0, i) == doctest::Approx(want).epsilon(1e-9));
  }
  CHECK(opt.steps() == 1);
  CHECK_THROWS(opt.step({&p}, {Matrix::Zero(2, 2)}));
}

TEST_CASE("Adam is deterministic") {
  auto run = [] {
    Matrix p = Matrix::Constant(1, 1, 3.0);
    Adam opt({&p}, AdamConfig{});
    for (int t = 0; t < 200; ++t) opt.step({&p}, {2.0 * p});
    return p(0, 0);
  };
  const double a = run(), b = run();
  CHECK(a == b);
  CHECK(a < 3.0);
}

TEST_CASE("soft update blends elementwise") {
  std::mt19937_64 rng(8);
  const NetworkSpec spec{{}, 1, 0, {1}, 1, Activation::Linear};
  Network online(spec, rng), target(spec, rng);
  for (Matrix* p : online.mutable_parameters()) p->setConstant(4.0);
  for (Matrix* p : target.mutable_parameters()) p->setConstant(2.0);
  Network t0 = target;
  soft_update(t0, online, 0.0);
  for (const Matrix* p : t0.parameters()) CHECK((*p)(0, 0) == 2.0);
  Network half = target;
  soft_update(half, online, 0.5);
  for (const Matrix* p : half.parameters()) CHECK((*p)(0, 0) == 3.0);
  Network full = target;
  soft_update(full, online, 1.0);
  for (const Matrix* p : full.parameters()) CHECK((*p)(0, 0) == 4.0);

  Network other(NetworkSpec{{}, 1, 0, {2}, 1, Activation::Linear}, rng);
  CHECK_THROWS_AS(soft_update(other, online, 0.5), std::invalid_argument);
}

TEST_CASE("weight files round-trip exactly") {
  std::mt19937_64 rng(13);
  const Network net(NetworkSpec{{16, 11}, 9, 2, {8, 4}, 1, Activation::Linear}, rng);
  testutil::TempDir tmp("nn");
  const std::string path = (tmp.path() / "w.txt").string();
  save_network(net, path);
  const Network back = load_network(path);
  CHECK(back.spec() == net.spec());
  const auto a = net.parameters(), b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(*a[k] == *b[k]);
  CHECK_THROWS(load_network((tmp.path() / "missing.txt").string()));
}
