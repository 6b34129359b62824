#pragma once

// LSTM cell and affine output layer with hand-written backward passes.
//
// Gate rows of W, U and b are stacked as [input, forget, candidate, output],
// each block H rows tall. The order is part of the checkpoint format.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>

#include "c2c/numerics.hpp"

namespace c2c {

enum class Gate : std::size_t { input = 0, forget = 1, candidate = 2, output = 3 };

struct LstmParams {
  Matrix W;  // 4H x D
  Matrix U;  // 4H x H
  Vector b;  // 4H

  LstmParams() = default;
  LstmParams(std::size_t input_dim, std::size_t hidden)
      : W(4 * hidden, input_dim), U(4 * hidden, hidden), b(4 * hidden, 0.0) {}

  std::size_t hidden() const noexcept { return U.cols(); }
  std::size_t input_dim() const noexcept { return W.cols(); }

  std::span<double> gate_bias(Gate g) noexcept {
    return std::span<double>(b).subspan(static_cast<std::size_t>(g) * hidden(), hidden());
  }

  void validate() const {
    const std::size_t h = U.cols();
    if (U.rows() != 4 * h || W.rows() != 4 * h || b.size() != 4 * h)
      throw ShapeError("LSTM parameters inconsistent: W" + W.dims() + " U" + U.dims() + " b(" +
                       std::to_string(b.size()) + ")");
  }

  void set_zero() {
    W.fill(0.0);
    U.fill(0.0);
    std::fill(b.begin(), b.end(), 0.0);
  }

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }

  friend bool operator==(const LstmState&, const LstmState&) = default;
};

struct DenseParams {
  Matrix W;  // V x H
  Vector b;  // V

  DenseParams() = default;
  DenseParams(std::size_t hidden, std::size_t outputs) : W(outputs, hidden), b(outputs, 0.0) {}

  std::size_t hidden() const noexcept { return W.cols(); }
  std::size_t outputs() const noexcept { return W.rows(); }

  void validate() const {
    if (b.size() != W.rows())
      throw ShapeError("dense parameters inconsistent: W" + W.dims() + " b(" +
                       std::to_string(b.size()) + ")");
  }

  void set_zero() {
    W.fill(0.0);
    std::fill(b.begin(), b.end(), 0.0);
  }

  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

inline constexpr double kSigmoidClamp = 500.0;

inline double sigmoid(double x) noexcept {
  x = std::clamp(x, -kSigmoidClamp, kSigmoidClamp);
  return 1.0 / (1.0 + std::exp(-x));
}

/// Input to one LSTM step: a dense vector or the index of a one-hot vector.
using LstmInput = std::variant<Vector, std::size_t>;

/// Everything lstm_step_backward needs from the forward step.
struct LstmStepCache {
  LstmInput x;
  LstmState prev;
  Vector i, f, g, o;  // post-activation gates
  Vector tanh_c;
  LstmState next;
};

namespace detail {

inline void check_input(const LstmParams& p, const LstmInput& x) {
  if (const auto* v = std::get_if<Vector>(&x)) {
    if (v->size() != p.input_dim())
      throw ShapeError("lstm_step: input has " + std::to_string(v->size()) +
                       " entries, expected " + std::to_string(p.input_dim()));
  } else if (std::get<std::size_t>(x) >= p.input_dim()) {
    throw ShapeError("lstm_step: one-hot index " + std::to_string(std::get<std::size_t>(x)) +
                     " out of range for input dim " + std::to_string(p.input_dim()));
  }
}

}  // namespace detail

/// One LSTM step, keeping the intermediates for the backward pass.
inline LstmStepCache lstm_step_cached(const LstmParams& p, LstmInput x, const LstmState& prev) {
  const std::size_t H = p.hidden();
  detail::check_input(p, x);
  if (prev.h.size() != H || prev.c.size() != H)
    throw ShapeError("lstm_step: state size does not match hidden size " + std::to_string(H));

  Vector z = p.b;
  if (const auto* v = std::get_if<Vector>(&x)) {
    kernels::gemv_acc(p.W, *v, z);
  } else {
    const std::size_t col = std::get<std::size_t>(x);
    for (std::size_t r = 0; r < z.size(); ++r) z[r] += p.W(r, col);
  }
  kernels::gemv_acc(p.U, prev.h, z);

  LstmStepCache cache{std::move(x), prev, Vector(H), Vector(H), Vector(H), Vector(H), Vector(H),
                      LstmState::zeros(H)};
  for (std::size_t k = 0; k < H; ++k) {
    cache.i[k] = sigmoid(z[k]);
    cache.f[k] = sigmoid(z[H + k]);
    cache.g[k] = std::tanh(z[2 * H + k]);
    cache.o[k] = sigmoid(z[3 * H + k]);
    const double c = cache.f[k] * prev.c[k] + cache.i[k] * cache.g[k];
    cache.next.c[k] = c;
    cache.tanh_c[k] = std::tanh(c);
    cache.next.h[k] = cache.o[k] * cache.tanh_c[k];
  }
  return cache;
}

inline LstmState lstm_step(const LstmParams& p, LstmInput x, const LstmState& prev) {
  return lstm_step_cached(p, std::move(x), prev).next;
}

/// Gradients flowing out of one LSTM step.
struct LstmStepGrads {
  Vector dx;  // empty for one-hot inputs
  LstmState dprev;
};

/// Backward pass of one step. Parameter gradients are accumulated into
/// `grads` (same shapes as `p`); input and previous-state gradients are
/// returned.
inline LstmStepGrads lstm_step_backward(const LstmParams& p, const LstmStepCache& cache,
                                        std::span<const double> dh_next,
                                        std::span<const double> dc_next, LstmParams& grads) {
  const std::size_t H = p.hidden();
  if (cache.i.size() != H || dh_next.size() != H || dc_next.size() != H)
    throw ContractViolation("lstm_step_backward: cache or upstream gradient does not match H=" +
                            std::to_string(H));
  if (grads.W.rows() != p.W.rows() || grads.W.cols() != p.W.cols() ||
      grads.U.cols() != p.U.cols() || grads.b.size() != p.b.size())
    throw ContractViolation("lstm_step_backward: gradient buffer shape mismatch");

  Vector dz(4 * H);
  LstmStepGrads out{Vector{}, LstmState::zeros(H)};
  for (std::size_t k = 0; k < H; ++k) {
    const double tc = cache.tanh_c[k];
    const double d_o = dh_next[k] * tc;
    const double dc = dc_next[k] + dh_next[k] * cache.o[k] * (1.0 - tc * tc);
    const double d_i = dc * cache.g[k];
    const double d_g = dc * cache.i[k];
    const double d_f = dc * cache.prev.c[k];
    out.dprev.c[k] = dc * cache.f[k];
    dz[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
    dz[H + k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
    dz[2 * H + k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
    dz[3 * H + k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
  }

  for (std::size_t r = 0; r < dz.size(); ++r) grads.b[r] += dz[r];
  if (const auto* x = std::get_if<Vector>(&cache.x)) {
    kernels::outer_acc(grads.W, dz, *x);
    out.dx.assign(p.input_dim(), 0.0);
    kernels::gemv_t_acc(p.W, dz, out.dx);
  } else {
    const std::size_t col = std::get<std::size_t>(cache.x);
    for (std::size_t r = 0; r < dz.size(); ++r) grads.W(r, col) += dz[r];
  }
  kernels::outer_acc(grads.U, dz, cache.prev.h);
  kernels::gemv_t_acc(p.U, dz, out.dprev.h);
  return out;
}

inline Vector dense_forward(const DenseParams& p, std::span<const double> h) {
  if (h.size() != p.hidden())
    throw ShapeError("dense_forward: input has " + std::to_string(h.size()) +
                     " entries, expected " + std::to_string(p.hidden()));
  Vector logits = p.b;
  kernels::gemv_acc(p.W, h, logits);
  return logits;
}

/// Accumulates parameter gradients and returns dL/dh.
inline Vector dense_backward(const DenseParams& p, std::span<const double> h,
                             std::span<const double> dlogits, DenseParams& grads) {
  if (dlogits.size() != p.outputs() || h.size() != p.hidden())
    throw ShapeError("dense_backward: shape mismatch");
  for (std::size_t r = 0; r < dlogits.size(); ++r) grads.b[r] += dlogits[r];
  kernels::outer_acc(grads.W, dlogits, h);
  Vector dh(p.hidden(), 0.0);
  kernels::gemv_t_acc(p.W, dlogits, dh);
  return dh;
}

// Initialization: Glorot-uniform weights, zero biases, forget bias 1.

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double unit_uniform(std::mt19937_64& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline void glorot_uniform(Matrix& m, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& w : m.data()) w = (2.0 * unit_uniform(rng) - 1.0) * limit;
}

inline LstmParams init_lstm(std::mt19937_64& rng, std::size_t input_dim, std::size_t hidden) {
  LstmParams p(input_dim, hidden);
  glorot_uniform(p.W, rng);
  glorot_uniform(p.U, rng);
  auto fb = p.gate_bias(Gate::forget);
  std::fill(fb.begin(), fb.end(), 1.0);
  return p;
}

inline LstmParams init_lstm(std::uint64_t seed, std::size_t input_dim, std::size_t hidden) {
  std::mt19937_64 rng(seed);
  return init_lstm(rng, input_dim, hidden);
}

inline DenseParams init_dense(std::mt19937_64& rng, std::size_t hidden, std::size_t outputs) {
  DenseParams p(hidden, outputs);
  glorot_uniform(p.W, rng);
  return p;
}

inline DenseParams init_dense(std::uint64_t seed, std::size_t hidden, std::size_t outputs) {
  std::mt19937_64 rng(seed);
  return init_dense(rng, hidden, outputs);
}

}  // namespace c2c
