#include <random>

#include <gtest/gtest.h>

#include "mmsi/nn.hpp"

namespace mmsi::nn {
namespace {

using Md = Matrix<double>;

Md random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Md m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Central-difference gradient of `f` with respect to every entry of `x`.
template <typename F>
Md numeric_gradient(Md& x, F&& f, double h = 1e-6) {
  Md g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = f();
    x.data()[i] = keep - h;
    const double down = f();
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

double rel_error(const Md& a, const Md& b) {
  const double denom = std::max(a.norm() + b.norm(), 1e-12);
  return (a - b).norm() / denom;
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const std::vector<int> widths = {5, 7, 4, 3};
  Mlp<double> net = Mlp<double>::init(widths, rng);
  Md x = random_matrix(5, 6, rng);
  const Md w = random_matrix(3, 6, rng);  // loss = sum(w .* y)
  auto loss = [&] { return net.forward(x).cwiseProduct(w).sum(); };

  typename Mlp<double>::Tape tape;
  net.forward(x, &tape);
  Mlp<double> grad = Mlp<double>::zeros(widths);
  const Md dx = net.backward(w, tape, grad);

  EXPECT_LT(rel_error(dx, numeric_gradient(x, loss)), 1e-6);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    EXPECT_LT(rel_error(grad.layers[l].weight, numeric_gradient(net.layers[l].weight, loss)), 1e-6) << l;
    EXPECT_LT(rel_error(grad.layers[l].bias, numeric_gradient(net.layers[l].bias, loss)), 1e-6) << l;
  }
}

TEST(Mlp, RejectsWrongInputWidth) {
  std::mt19937_64 rng(1);
  const Mlp<double> net = Mlp<double>::init(std::vector<int>{3, 2}, rng);
  EXPECT_THROW(net.forward(Md::Zero(4, 1)), std::invalid_argument);
  EXPECT_THROW(Mlp<double>::zeros(std::vector<int>{3}), std::invalid_argument);
}

TEST(Mlp, ColumnsAreIndependent) {
  std::mt19937_64 rng(2);
  const Mlp<double> net = Mlp<double>::init(std::vector<int>{4, 6, 2}, rng);
  const Md x = random_matrix(4, 5, rng);
  const Md y = net.forward(x);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_TRUE(y.col(j).isApprox(net.forward(x.col(j))));
}

struct LstmCase {
  Lstm<double> lstm;
  std::vector<Md> xs;
  std::vector<RowArray<double>> masks;
  Md w;
};

LstmCase make_lstm_case(std::mt19937_64& rng) {
  LstmCase c{Lstm<double>::init(3, 4, rng), {}, {}, random_matrix(4, 3, rng)};
  for (int t = 0; t < 3; ++t) c.xs.push_back(random_matrix(3, 3, rng));
  // Column 0 runs 3 steps, column 1 runs 1 step, column 2 runs 2 steps.
  const int lengths[] = {3, 1, 2};
  for (int t = 0; t < 3; ++t) {
    RowArray<double> m(3);
    for (int b = 0; b < 3; ++b) m(b) = t < lengths[b] ? 1.0 : 0.0;
    c.masks.push_back(m);
  }
  return c;
}

TEST(Lstm, BackwardMatchesFiniteDifferencesWithMasks) {
  std::mt19937_64 rng(4);
  LstmCase c = make_lstm_case(rng);
  auto loss = [&] { return c.lstm.forward(c.xs, c.masks).cwiseProduct(c.w).sum(); };
  typename Lstm<double>::Tape tape;
  c.lstm.forward(c.xs, c.masks, &tape);
  Lstm<double> grad = Lstm<double>::zeros(3, 4);
  const std::vector<Md> dxs = c.lstm.backward(c.w, tape, grad);

  EXPECT_LT(rel_error(grad.w_input, numeric_gradient(c.lstm.w_input, loss)), 1e-6);
  EXPECT_LT(rel_error(grad.w_hidden, numeric_gradient(c.lstm.w_hidden, loss)), 1e-6);
  EXPECT_LT(rel_error(grad.bias, numeric_gradient(c.lstm.bias, loss)), 1e-6);
  for (std::size_t t = 0; t < c.xs.size(); ++t) {
    EXPECT_LT(rel_error(dxs[t], numeric_gradient(c.xs[t], loss)), 1e-6) << t;
  }
}

TEST(Lstm, MaskedColumnEqualsShorterSequence) {
  std::mt19937_64 rng(5);
  LstmCase c = make_lstm_case(rng);
  const Md h = c.lstm.forward(c.xs, c.masks);
  // Column 1 only ran one step: same as a length-1 sequence on its own.
  const std::vector<Md> one = {c.xs[0].col(1)};
  const std::vector<RowArray<double>> m1 = {RowArray<double>::Ones(1)};
  EXPECT_TRUE(h.col(1).isApprox(c.lstm.forward(one, m1)));
  const std::vector<Md> two = {c.xs[0].col(2), c.xs[1].col(2)};
  const std::vector<RowArray<double>> m2 = {RowArray<double>::Ones(1), RowArray<double>::Ones(1)};
  EXPECT_TRUE(h.col(2).isApprox(c.lstm.forward(two, m2)));
}

TEST(Lstm, ZeroWeightsGiveKnownState) {
  // All gates sigmoid(0) = 0.5 and candidate tanh(0) = 0: the state stays zero.
  const Lstm<double> l = Lstm<double>::zeros(2, 3);
  const std::vector<Md> xs = {Md::Ones(2, 1)};
  const std::vector<RowArray<double>> m = {RowArray<double>::Ones(1)};
  EXPECT_TRUE(l.forward(xs, m).isZero());
}

TEST(Softmax, ColumnsSumToOneAndAreShiftInvariant) {
  std::mt19937_64 rng(6);
  const Md z = random_matrix(3, 5, rng) * 50;
  const Md p = softmax<double>(z);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(p.col(j).sum(), 1.0, 1e-12);
  EXPECT_TRUE(p.isApprox(softmax<double>((z.array() + 1000.0).matrix())));
  const Md two = (Md(2, 1) << 0.0, std::log(3.0)).finished();
  EXPECT_NEAR(softmax<double>(two)(1, 0), 0.75, 1e-12);
}

}  // namespace
}  // namespace mmsi::nn
