#pragma once

// Sampled complex wave functions on uniform one-dimensional quadrature grids.
//
// Units are hbar = 1. The momentum representation uses the symmetric unitary
// convention
//
//     phi(p) = (2 pi)^(-1/2) \int psi(x) exp(-i p x) dx
//
// evaluated exactly as a discrete sum on the conjugate grid
// p_k = (k - n/2) * dp, dp = 2 pi / (n dx).

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "cvt/error.hpp"

namespace cvt {

using Index = Eigen::Index;

template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

constexpr bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

constexpr Index next_power_of_two(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

template <typename Scalar>
class GridSpecT {
 public:
  using scalar_type = Scalar;

  GridSpecT(Scalar x_min, Scalar dx, Index n) : x_min_(x_min), dx_(dx), n_(n) {
    if (n < 8 || !is_power_of_two(n)) {
      throw Error(ErrorCode::InvalidGrid, "point count must be a power of two >= 8, got " + std::to_string(n));
    }
    if (!(dx > Scalar(0)) || !std::isfinite(dx)) throw Error(ErrorCode::InvalidGrid, "spacing must be finite and positive");
    if (!std::isfinite(x_min) || !std::isfinite(x_max())) throw Error(ErrorCode::InvalidGrid, "grid extent must be finite");
  }

  /// Half-open range [x_min, x_max) split into n bins.
  static GridSpecT from_range(Scalar x_min, Scalar x_max, Index n) {
    if (!(x_max > x_min)) throw Error(ErrorCode::InvalidGrid, "empty grid range");
    return GridSpecT(x_min, (x_max - x_min) / Scalar(n), n);
  }

  /// Grid with x_{n/2} = 0, the layout used for every conjugate grid.
  static GridSpecT centered(Scalar dx, Index n) { return GridSpecT(-Scalar(n / 2) * dx, dx, n); }

  Scalar x_min() const { return x_min_; }
  Scalar dx() const { return dx_; }
  Index n() const { return n_; }
  Scalar x(Index i) const { return x_min_ + Scalar(i) * dx_; }
  Scalar x_max() const { return x(n_ - 1); }
  Scalar span() const { return Scalar(n_) * dx_; }
  Scalar dp() const { return Scalar(2) * std::numbers::pi_v<Scalar> / span(); }

  GridSpecT conjugate() const { return centered(dp(), n_); }

  RealVector<Scalar> points() const {
    return RealVector<Scalar>::LinSpaced(n_, Scalar(0), Scalar(n_ - 1)) * dx_ + RealVector<Scalar>::Constant(n_, x_min_);
  }

  /// Nearest bin index; may fall outside [0, n).
  Index nearest_index(Scalar x) const { return static_cast<Index>(std::llround((x - x_min_) / dx_)); }

  bool is_centered() const {
    return std::abs(x_min_ + Scalar(n_ / 2) * dx_) <= Scalar(1e-9) * dx_;
  }

  bool matches(const GridSpecT& other, Scalar rel_tol = Scalar(1e-12)) const {
    const Scalar scale = std::max(std::abs(dx_) * Scalar(n_), std::abs(x_min_));
    return n_ == other.n_ && std::abs(dx_ - other.dx_) <= rel_tol * dx_ &&
           std::abs(x_min_ - other.x_min_) <= rel_tol * scale;
  }

  template <typename Other>
  GridSpecT<Other> cast() const {
    return GridSpecT<Other>(Other(x_min_), Other(dx_), n_);
  }

  friend bool operator==(const GridSpecT& a, const GridSpecT& b) {
    return a.x_min_ == b.x_min_ && a.dx_ == b.dx_ && a.n_ == b.n_;
  }

 private:
  Scalar x_min_;
  Scalar dx_;
  Index n_;
};

template <typename Scalar>
void require_same_grid(const GridSpecT<Scalar>& a, const GridSpecT<Scalar>& b) {
  if (!a.matches(b)) throw Error(ErrorCode::GridMismatch, "operands live on different grids");
}

template <typename Scalar>
class SampledWaveFunctionT {
 public:
  using scalar_type = Scalar;
  using Grid = GridSpecT<Scalar>;
  using Amplitudes = ComplexVector<Scalar>;

  SampledWaveFunctionT(Grid grid, Amplitudes amplitudes) : grid_(grid), amplitudes_(std::move(amplitudes)) {
    if (amplitudes_.size() != grid_.n()) {
      throw Error(ErrorCode::InvalidArgument, "amplitude count does not match grid size");
    }
    if (!amplitudes_.allFinite()) throw Error(ErrorCode::InvalidArgument, "amplitudes must be finite");
  }

  /// Zero function on the grid.
  explicit SampledWaveFunctionT(Grid grid) : grid_(grid), amplitudes_(Amplitudes::Zero(grid.n())) {}

  template <typename F>
  static SampledWaveFunctionT sample(const Grid& grid, F&& f) {
    Amplitudes a(grid.n());
    for (Index i = 0; i < grid.n(); ++i) a[i] = std::complex<Scalar>(f(grid.x(i)));
    return SampledWaveFunctionT(grid, std::move(a));
  }

  const Grid& grid() const { return grid_; }
  const Amplitudes& amplitudes() const { return amplitudes_; }
  Index size() const { return grid_.n(); }
  std::complex<Scalar> operator[](Index i) const { return amplitudes_[i]; }

 private:
  Grid grid_;
  Amplitudes amplitudes_;
};

struct MomentSummary {
  double mean_x = 0;
  double std_x = 0;
  double support_length = 0;
  double mean_p = 0;
  double std_p = 0;
};

using GridSpec = GridSpecT<double>;
using SampledWaveFunction = SampledWaveFunctionT<double>;

namespace detail {

template <typename Scalar>
Eigen::FFT<Scalar>& fft_engine() {
  thread_local Eigen::FFT<Scalar> engine;
  return engine;
}

inline double sign_of_parity(Index j) { return (j & 1) ? -1.0 : 1.0; }

/// exp(-2 pi i t) with t reduced to [-1/2, 1/2] first.
template <typename Scalar>
std::complex<Scalar> turn(Scalar t) {
  t -= std::round(t);
  return std::polar(Scalar(1), -Scalar(2) * std::numbers::pi_v<Scalar> * t);
}

/// Unitary transform from a grid to its conjugate (forward: sign = -1).
template <typename Scalar>
ComplexVector<Scalar> conjugate_transform(const GridSpecT<Scalar>& from, const ComplexVector<Scalar>& a, bool forward) {
  const Index n = from.n();
  const Scalar r = from.x_min() / from.span();  // p_k x_0 / (2 pi) = (k - n/2) r
  std::vector<std::complex<Scalar>> in(static_cast<size_t>(n)), out(static_cast<size_t>(n));
  const Scalar pref = from.dx() / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
  auto& fft = fft_engine<Scalar>();
  if (forward) {
    for (Index j = 0; j < n; ++j) in[j] = a[j] * Scalar(sign_of_parity(j));
    fft.fwd(out.data(), in.data(), n);
    ComplexVector<Scalar> res(n);
    for (Index k = 0; k < n; ++k) res[k] = pref * turn(Scalar(k - n / 2) * r) * out[k];
    return res;
  }
  // Inverse: `from` is the position grid, `a` lives on from.conjugate().
  const Scalar pref_p = from.dp() / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
  for (Index k = 0; k < n; ++k) in[k] = a[k] * std::conj(turn(Scalar(k - n / 2) * r));
  fft.SetFlag(Eigen::FFT<Scalar>::Unscaled);
  fft.inv(out.data(), in.data(), n);
  fft.ClearFlag(Eigen::FFT<Scalar>::Unscaled);
  ComplexVector<Scalar> res(n);
  for (Index j = 0; j < n; ++j) res[j] = pref_p * Scalar(sign_of_parity(j)) * out[j];
  return res;
}

}  // namespace detail

template <typename Scalar>
Scalar squared_norm(const SampledWaveFunctionT<Scalar>& psi) {
  return psi.amplitudes().squaredNorm() * psi.grid().dx();
}

template <typename Scalar>
Scalar norm(const SampledWaveFunctionT<Scalar>& psi) {
  return std::sqrt(squared_norm(psi));
}

template <typename Scalar>
SampledWaveFunctionT<Scalar> normalize(const SampledWaveFunctionT<Scalar>& psi) {
  const Scalar n2 = squared_norm(psi);
  if (!(n2 >= Scalar(1e-300)) || !std::isfinite(n2)) {
    throw Error(ErrorCode::ZeroNorm, "wave function has (numerically) zero norm");
  }
  return SampledWaveFunctionT<Scalar>(psi.grid(), psi.amplitudes() / std::sqrt(n2));
}

template <typename Scalar>
std::complex<Scalar> inner_product(const SampledWaveFunctionT<Scalar>& psi, const SampledWaveFunctionT<Scalar>& chi) {
  require_same_grid(psi.grid(), chi.grid());
  return psi.amplitudes().dot(chi.amplitudes()) * psi.grid().dx();  // dot conjugates the left operand
}

/// ||a - b|| / ||b|| under the grid measure.
template <typename Scalar>
Scalar relative_l2(const SampledWaveFunctionT<Scalar>& a, const SampledWaveFunctionT<Scalar>& b) {
  require_same_grid(a.grid(), b.grid());
  return (a.amplitudes() - b.amplitudes()).norm() / b.amplitudes().norm();
}

template <typename Scalar>
SampledWaveFunctionT<Scalar> to_momentum(const SampledWaveFunctionT<Scalar>& psi) {
  return {psi.grid().conjugate(), detail::conjugate_transform(psi.grid(), psi.amplitudes(), true)};
}

/// Inverse of to_momentum; `position_grid` is the grid the function came from.
template <typename Scalar>
SampledWaveFunctionT<Scalar> to_position(const SampledWaveFunctionT<Scalar>& phi, const GridSpecT<Scalar>& position_grid) {
  require_same_grid(phi.grid(), position_grid.conjugate());
  return {position_grid, detail::conjugate_transform(position_grid, phi.amplitudes(), false)};
}

/// Inverse transform onto the centered position grid.
template <typename Scalar>
SampledWaveFunctionT<Scalar> to_position(const SampledWaveFunctionT<Scalar>& phi) {
  return to_position(phi, GridSpecT<Scalar>::centered(phi.grid().dp(), phi.grid().n()));
}

namespace detail {

template <typename Scalar>
void mean_and_std(const GridSpecT<Scalar>& grid, const RealVector<Scalar>& density, double& mean, double& sd) {
  const Scalar total = density.sum();
  Scalar m = 0;
  for (Index i = 0; i < grid.n(); ++i) m += grid.x(i) * density[i];
  m /= total;
  Scalar v = 0;
  for (Index i = 0; i < grid.n(); ++i) v += (grid.x(i) - m) * (grid.x(i) - m) * density[i];
  mean = double(m);
  sd = double(std::sqrt(v / total));
}

}  // namespace detail

/// Length of the smallest interval holding every sample above 1e-3 of the peak magnitude.
template <typename Scalar>
Scalar support_length(const SampledWaveFunctionT<Scalar>& psi, Scalar threshold = Scalar(1e-3)) {
  const RealVector<Scalar> mag = psi.amplitudes().cwiseAbs();
  const Scalar cut = threshold * mag.maxCoeff();
  Index first = -1, last = -1;
  for (Index i = 0; i < mag.size(); ++i) {
    if (mag[i] > cut) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) return Scalar(0);
  return Scalar(last - first + 1) * psi.grid().dx();
}

template <typename Scalar>
MomentSummary moments(const SampledWaveFunctionT<Scalar>& psi) {
  MomentSummary s;
  detail::mean_and_std(psi.grid(), RealVector<Scalar>(psi.amplitudes().cwiseAbs2()), s.mean_x, s.std_x);
  s.support_length = double(support_length(psi));
  const auto phi = to_momentum(psi);
  detail::mean_and_std(phi.grid(), RealVector<Scalar>(phi.amplitudes().cwiseAbs2()), s.mean_p, s.std_p);
  return s;
}

/// Translate by a whole number of bins; vacated bins are zero-filled.
template <typename Scalar>
SampledWaveFunctionT<Scalar> shift_x(const SampledWaveFunctionT<Scalar>& psi, Scalar s) {
  const auto& g = psi.grid();
  const Scalar bins = s / g.dx();
  const Index k = static_cast<Index>(std::llround(bins));
  if (std::abs(bins - Scalar(k)) > Scalar(1e-9)) {
    throw Error(ErrorCode::InvalidArgument, "x-shift is not a whole number of grid bins");
  }
  ComplexVector<Scalar> out = ComplexVector<Scalar>::Zero(g.n());
  for (Index i = 0; i < g.n(); ++i) {
    const Index src = i - k;
    if (src >= 0 && src < g.n()) out[i] = psi[src];
  }
  const Scalar before = psi.amplitudes().squaredNorm();
  const Scalar after = out.squaredNorm();
  if (before > Scalar(0) && (before - after) > Scalar(1e-4) * before) {
    throw Error(ErrorCode::ShiftOffGrid, "shift moves more than 1e-4 of the probability off the grid");
  }
  return {g, std::move(out)};
}

/// Multiply by exp(i q x): a momentum translation by q.
template <typename Scalar>
SampledWaveFunctionT<Scalar> shift_p(const SampledWaveFunctionT<Scalar>& psi, Scalar q) {
  const auto& g = psi.grid();
  ComplexVector<Scalar> out(g.n());
  for (Index i = 0; i < g.n(); ++i) out[i] = psi[i] * std::polar(Scalar(1), q * g.x(i));
  return {g, std::move(out)};
}

/// Places `psi` onto `target`. Aligned grids with equal spacing are copied bin
/// for bin; otherwise amplitudes are linearly interpolated. Samples outside the
/// source grid are zero.
template <typename Scalar>
SampledWaveFunctionT<Scalar> resample(const SampledWaveFunctionT<Scalar>& psi, const GridSpecT<Scalar>& target) {
  const auto& src = psi.grid();
  ComplexVector<Scalar> out = ComplexVector<Scalar>::Zero(target.n());
  const Scalar offset = (target.x_min() - src.x_min()) / src.dx();
  const bool aligned = std::abs(target.dx() - src.dx()) <= Scalar(1e-12) * src.dx() &&
                       std::abs(offset - std::round(offset)) <= Scalar(1e-9);
  if (aligned) {
    const Index shift = static_cast<Index>(std::llround(offset));
    for (Index i = 0; i < target.n(); ++i) {
      const Index j = i + shift;
      if (j >= 0 && j < src.n()) out[i] = psi[j];
    }
  } else {
    for (Index i = 0; i < target.n(); ++i) {
      const Scalar t = (target.x(i) - src.x_min()) / src.dx();
      const Index j = static_cast<Index>(std::floor(t));
      const Scalar f = t - Scalar(j);
      if (j >= 0 && j < src.n()) out[i] += (Scalar(1) - f) * psi[j];
      if (j + 1 >= 0 && j + 1 < src.n()) out[i] += f * psi[j + 1];
    }
  }
  return {target, std::move(out)};
}

}  // namespace cvt
