#pragma once

// Minimal dense-layer and LSTM building blocks with hand-written backward
// passes. Matrices hold one sample per column. Everything is templated on the
// scalar so gradient checks can run in double while training runs in float.

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mmsi::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowArray = Eigen::Array<T, 1, Eigen::Dynamic>;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
void fill_uniform(Matrix<T>& m, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(dist(rng));
  }
}

template <typename T>
struct Dense {
  Matrix<T> weight;  // out x in
  Matrix<T> bias;    // out x 1

  int in_width() const { return static_cast<int>(weight.cols()); }
  int out_width() const { return static_cast<int>(weight.rows()); }

  template <typename U>
  Dense<U> cast() const {
    return {weight.template cast<U>(), bias.template cast<U>()};
  }
};

// Affine layers with ReLU between consecutive layers and a linear output.
template <typename T>
struct Mlp {
  std::vector<Dense<T>> layers;

  struct Tape {
    std::vector<Matrix<T>> inputs;  // input to each layer
    std::vector<Matrix<T>> pre;     // pre-activation of each layer
  };

  static Mlp zeros(std::span<const int> widths) {
    if (widths.size() < 2) throw std::invalid_argument("an MLP needs at least two widths");
    Mlp m;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      m.layers.push_back({Matrix<T>::Zero(widths[l + 1], widths[l]), Matrix<T>::Zero(widths[l + 1], 1)});
    }
    return m;
  }

  static Mlp init(std::span<const int> widths, std::mt19937_64& rng) {
    Mlp m = zeros(widths);
    for (Dense<T>& d : m.layers) {
      fill_uniform(d.weight, d.in_width(), rng);
      fill_uniform(d.bias, d.in_width(), rng);
    }
    return m;
  }

  std::vector<int> widths() const {
    std::vector<int> w;
    if (layers.empty()) return w;
    w.push_back(layers.front().in_width());
    for (const Dense<T>& d : layers) w.push_back(d.out_width());
    return w;
  }
  int in_width() const { return layers.front().in_width(); }
  int out_width() const { return layers.back().out_width(); }

  Matrix<T> forward(const Matrix<T>& x, Tape* tape = nullptr) const {
    if (x.rows() != in_width()) {
      throw std::invalid_argument("MLP input has " + std::to_string(x.rows()) + " rows, expected " +
                                  std::to_string(in_width()));
    }
    if (tape != nullptr) {
      tape->inputs.clear();
      tape->pre.clear();
    }
    Matrix<T> a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Matrix<T> z = layers[l].weight * a;
      z.colwise() += layers[l].bias.col(0);
      if (tape != nullptr) {
        tape->inputs.push_back(std::move(a));
        tape->pre.push_back(z);
      }
      a = l + 1 < layers.size() ? Matrix<T>(z.cwiseMax(T(0))) : std::move(z);
    }
    return a;
  }

  // Accumulates parameter gradients into `grad`; returns d(loss)/d(input).
  Matrix<T> backward(const Matrix<T>& dy, const Tape& tape, Mlp& grad) const {
    Matrix<T> d = dy;
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (l + 1 < layers.size()) {
        d = (tape.pre[l].array() > T(0)).select(d, T(0));
      }
      grad.layers[l].weight.noalias() += d * tape.inputs[l].transpose();
      grad.layers[l].bias.col(0) += d.rowwise().sum();
      d = (layers[l].weight.transpose() * d).eval();
    }
    return d;
  }

  template <typename U>
  Mlp<U> cast() const {
    Mlp<U> out;
    for (const Dense<T>& d : layers) out.layers.push_back(d.template cast<U>());
    return out;
  }
};

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Single-layer LSTM, gate order (input, forget, cell, output). Columns that
// are inactive at a step keep their previous state, which is how shorter
// sequences in a batch are masked.
template <typename T>
struct Lstm {
  Matrix<T> w_input;   // 4H x I
  Matrix<T> w_hidden;  // 4H x H
  Matrix<T> bias;      // 4H x 1

  struct Tape {
    std::vector<Matrix<T>> x;      // per step input
    std::vector<Matrix<T>> h;      // h[0] = initial, h[t+1] after step t
    std::vector<Matrix<T>> c;
    std::vector<Matrix<T>> gates;  // activated gates, 4H x B
    std::vector<Matrix<T>> tanh_c; // tanh of the candidate new cell state
    std::vector<RowArray<T>> mask;
  };

  int input_width() const { return static_cast<int>(w_input.cols()); }
  int hidden_width() const { return static_cast<int>(w_hidden.cols()); }

  static Lstm zeros(int input, int hidden) {
    return {Matrix<T>::Zero(4 * hidden, input), Matrix<T>::Zero(4 * hidden, hidden),
            Matrix<T>::Zero(4 * hidden, 1)};
  }

  static Lstm init(int input, int hidden, std::mt19937_64& rng) {
    Lstm l = zeros(input, hidden);
    fill_uniform(l.w_input, hidden, rng);
    fill_uniform(l.w_hidden, hidden, rng);
    fill_uniform(l.bias, hidden, rng);
    return l;
  }

  // xs[t] is I x B; masks[t](b) is 1 when column b is active at step t.
  Matrix<T> forward(const std::vector<Matrix<T>>& xs, const std::vector<RowArray<T>>& masks,
                    Tape* tape = nullptr) const {
    const int hdim = hidden_width();
    const Eigen::Index batch = xs.empty() ? 0 : xs.front().cols();
    Matrix<T> h = Matrix<T>::Zero(hdim, batch);
    Matrix<T> c = Matrix<T>::Zero(hdim, batch);
    if (tape != nullptr) {
      *tape = Tape{};
      tape->h.push_back(h);
      tape->c.push_back(c);
    }
    for (std::size_t t = 0; t < xs.size(); ++t) {
      Matrix<T> z = w_input * xs[t];
      z.noalias() += w_hidden * h;
      z.colwise() += bias.col(0);
      Matrix<T> g(4 * hdim, batch);
      g.topRows(hdim) = z.topRows(hdim).unaryExpr([](T v) { return sigmoid(v); });
      g.middleRows(hdim, hdim) = z.middleRows(hdim, hdim).unaryExpr([](T v) { return sigmoid(v); });
      g.middleRows(2 * hdim, hdim) = z.middleRows(2 * hdim, hdim).array().tanh();
      g.bottomRows(hdim) = z.bottomRows(hdim).unaryExpr([](T v) { return sigmoid(v); });

      const auto i_g = g.topRows(hdim).array();
      const auto f_g = g.middleRows(hdim, hdim).array();
      const auto c_g = g.middleRows(2 * hdim, hdim).array();
      const auto o_g = g.bottomRows(hdim).array();
      Matrix<T> c_new = (f_g * c.array() + i_g * c_g).matrix();
      Matrix<T> tc = c_new.array().tanh().matrix();
      Matrix<T> h_new = (o_g * tc.array()).matrix();

      const RowArray<T>& m = masks[t];
      const RowArray<T> keep = T(1) - m;
      c = (c_new.array().rowwise() * m + c.array().rowwise() * keep).matrix();
      h = (h_new.array().rowwise() * m + h.array().rowwise() * keep).matrix();
      if (tape != nullptr) {
        tape->x.push_back(xs[t]);
        tape->gates.push_back(std::move(g));
        tape->tanh_c.push_back(std::move(tc));
        tape->mask.push_back(m);
        tape->h.push_back(h);
        tape->c.push_back(c);
      }
    }
    return h;
  }

  // Returns d(loss)/d(x_t) for every step; accumulates parameter gradients.
  std::vector<Matrix<T>> backward(const Matrix<T>& dh_final, const Tape& tape, Lstm& grad) const {
    const int hdim = hidden_width();
    const std::size_t steps = tape.x.size();
    std::vector<Matrix<T>> dxs(steps);
    Matrix<T> dh = dh_final;
    Matrix<T> dc = Matrix<T>::Zero(dh.rows(), dh.cols());
    for (std::size_t t = steps; t-- > 0;) {
      const Matrix<T>& g = tape.gates[t];
      const auto i_g = g.topRows(hdim).array();
      const auto f_g = g.middleRows(hdim, hdim).array();
      const auto c_g = g.middleRows(2 * hdim, hdim).array();
      const auto o_g = g.bottomRows(hdim).array();
      const auto tc = tape.tanh_c[t].array();
      const RowArray<T>& m = tape.mask[t];
      const RowArray<T> keep = T(1) - m;

      // Split the incoming gradient into the freshly computed path and the
      // carried-over path of inactive columns.
      const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> dh_new = dh.array().rowwise() * m;
      const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> dc_new =
          dc.array().rowwise() * m + dh_new * o_g * (T(1) - tc * tc);

      Matrix<T> dz(4 * hdim, dh.cols());
      dz.topRows(hdim) = (dc_new * c_g * i_g * (T(1) - i_g)).matrix();
      dz.middleRows(hdim, hdim) = (dc_new * tape.c[t].array() * f_g * (T(1) - f_g)).matrix();
      dz.middleRows(2 * hdim, hdim) = (dc_new * i_g * (T(1) - c_g * c_g)).matrix();
      dz.bottomRows(hdim) = (dh_new * tc * o_g * (T(1) - o_g)).matrix();

      grad.w_input.noalias() += dz * tape.x[t].transpose();
      grad.w_hidden.noalias() += dz * tape.h[t].transpose();
      grad.bias.col(0) += dz.rowwise().sum();
      dxs[t] = w_input.transpose() * dz;

      Matrix<T> dh_prev = w_hidden.transpose() * dz;
      dh_prev.array() += dh.array().rowwise() * keep;
      dc = (dc_new * f_g + dc.array().rowwise() * keep).matrix();
      dh = std::move(dh_prev);
    }
    return dxs;
  }

  template <typename U>
  Lstm<U> cast() const {
    return {w_input.template cast<U>(), w_hidden.template cast<U>(), bias.template cast<U>()};
  }
};

// Column-wise softmax.
template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const T mx = logits.col(j).maxCoeff();
    const auto e = (logits.col(j).array() - mx).exp();
    out.col(j) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace mmsi::nn
