#pragma once

// Two-mode quadrature states, the balanced beam splitter, and the squeezed-light
// EPR source.
//
// Beam splitter port convention (single photons): |1> -> (|3> + |4>)/sqrt2,
// |2> -> (|4> - |3>)/sqrt2. On quadrature wave functions this is the coordinate
// substitution
//
//     Omega(x1, x2) -> Omega((x4 + x3)/sqrt2, (x4 - x3)/sqrt2),
//
// i.e. x3 = (x1 - x2)/sqrt2 and x4 = (x1 + x2)/sqrt2. Feeding the p-squeezed
// beam b into port 1 and the x-squeezed beam a into port 2 yields the
// correlated pair exp(-((x2 - x5)/(2 sa))^2) exp(-((x2 + x5)/(2 sb))^2).

#include <cmath>
#include <numbers>
#include <optional>

#include "cvt/grid.hpp"

namespace cvt {

template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// EPR source configuration. An empty sigma_a is the ideal narrow limit
/// (sigma_a -> 0); an empty sigma_b is the ideal wide limit (sigma_b -> inf).
template <typename Scalar>
struct SqueezingParamsT {
  std::optional<Scalar> sigma_a;
  std::optional<Scalar> sigma_b;

  SqueezingParamsT() = default;
  SqueezingParamsT(std::optional<Scalar> a, std::optional<Scalar> b) : sigma_a(a), sigma_b(b) {
    auto check = [](const std::optional<Scalar>& s) {
      if (s && (!(*s > Scalar(0)) || !std::isfinite(*s))) {
        throw Error(ErrorCode::InvalidArgument, "squeezing widths must be finite and positive");
      }
    };
    check(sigma_a);
    check(sigma_b);
  }

  static SqueezingParamsT ideal() { return {std::nullopt, std::nullopt}; }
  bool finite() const { return sigma_a.has_value() && sigma_b.has_value(); }
};

using SqueezingParams = SqueezingParamsT<double>;

template <typename Scalar>
class TwoModeStateT {
 public:
  using Grid = GridSpecT<Scalar>;
  using Amplitudes = ComplexMatrix<Scalar>;

  TwoModeStateT(Grid grid_a, Grid grid_b, Amplitudes amplitudes)
      : grid_a_(grid_a), grid_b_(grid_b), amplitudes_(std::move(amplitudes)) {
    if (amplitudes_.rows() != grid_a_.n() || amplitudes_.cols() != grid_b_.n()) {
      throw Error(ErrorCode::InvalidArgument, "amplitude matrix does not match the mode grids");
    }
    if (!amplitudes_.allFinite()) throw Error(ErrorCode::InvalidArgument, "amplitudes must be finite");
  }

  template <typename F>
  static TwoModeStateT sample(const Grid& ga, const Grid& gb, F&& f) {
    Amplitudes a(ga.n(), gb.n());
    for (Index j = 0; j < gb.n(); ++j)
      for (Index i = 0; i < ga.n(); ++i) a(i, j) = std::complex<Scalar>(f(ga.x(i), gb.x(j)));
    return TwoModeStateT(ga, gb, std::move(a));
  }

  const Grid& grid_a() const { return grid_a_; }
  const Grid& grid_b() const { return grid_b_; }
  const Amplitudes& amplitudes() const { return amplitudes_; }
  std::complex<Scalar> operator()(Index i, Index j) const { return amplitudes_(i, j); }

 private:
  Grid grid_a_;
  Grid grid_b_;
  Amplitudes amplitudes_;
};

using TwoModeState = TwoModeStateT<double>;

template <typename Scalar>
Scalar squared_norm(const TwoModeStateT<Scalar>& s) {
  return s.amplitudes().squaredNorm() * s.grid_a().dx() * s.grid_b().dx();
}

template <typename Scalar>
TwoModeStateT<Scalar> normalize(const TwoModeStateT<Scalar>& s) {
  const Scalar n2 = squared_norm(s);
  if (!(n2 >= Scalar(1e-300)) || !std::isfinite(n2)) throw Error(ErrorCode::ZeroNorm, "two-mode state has zero norm");
  return {s.grid_a(), s.grid_b(), s.amplitudes() / std::sqrt(n2)};
}

template <typename Scalar>
TwoModeStateT<Scalar> product_state(const SampledWaveFunctionT<Scalar>& first, const SampledWaveFunctionT<Scalar>& second) {
  return {first.grid(), second.grid(), first.amplitudes() * second.amplitudes().transpose()};
}

namespace detail {

/// Bilinear sample of a square-grid state at (u, w); zero outside the grid.
template <typename Scalar>
std::complex<Scalar> bilinear(const TwoModeStateT<Scalar>& s, Scalar u, Scalar w) {
  const auto& g = s.grid_a();
  const Scalar tu = (u - g.x_min()) / g.dx();
  const Scalar tw = (w - g.x_min()) / g.dx();
  const Index i = static_cast<Index>(std::floor(tu));
  const Index j = static_cast<Index>(std::floor(tw));
  const Scalar fu = tu - Scalar(i);
  const Scalar fw = tw - Scalar(j);
  auto at = [&](Index a, Index b) -> std::complex<Scalar> {
    if (a < 0 || b < 0 || a >= g.n() || b >= g.n()) return {};
    return s(a, b);
  };
  return (Scalar(1) - fu) * ((Scalar(1) - fw) * at(i, j) + fw * at(i, j + 1)) +
         fu * ((Scalar(1) - fw) * at(i + 1, j) + fw * at(i + 1, j + 1));
}

template <typename Scalar>
void require_square(const TwoModeStateT<Scalar>& s) {
  if (!s.grid_a().matches(s.grid_b())) {
    throw Error(ErrorCode::GridMismatch, "beam splitter needs identical grids on both modes");
  }
}

}  // namespace detail

/// Output amplitude at (x3, x4) is the input at ((x4 + x3)/sqrt2, (x4 - x3)/sqrt2),
/// resampled bilinearly.
template <typename Scalar>
TwoModeStateT<Scalar> beam_splitter(const TwoModeStateT<Scalar>& in) {
  detail::require_square(in);
  const auto& g = in.grid_a();
  const Scalar r = Scalar(1) / std::numbers::sqrt2_v<Scalar>;
  ComplexMatrix<Scalar> out(g.n(), g.n());
  for (Index j = 0; j < g.n(); ++j) {
    for (Index i = 0; i < g.n(); ++i) {
      const Scalar x3 = g.x(i), x4 = g.x(j);
      out(i, j) = detail::bilinear(in, (x4 + x3) * r, (x4 - x3) * r);
    }
  }
  return {g, g, std::move(out)};
}

/// Undoes beam_splitter: input amplitude at (x1, x2) is the output at
/// ((x1 - x2)/sqrt2, (x1 + x2)/sqrt2).
template <typename Scalar>
TwoModeStateT<Scalar> beam_splitter_inverse(const TwoModeStateT<Scalar>& out) {
  detail::require_square(out);
  const auto& g = out.grid_a();
  const Scalar r = Scalar(1) / std::numbers::sqrt2_v<Scalar>;
  ComplexMatrix<Scalar> in(g.n(), g.n());
  for (Index j = 0; j < g.n(); ++j) {
    for (Index i = 0; i < g.n(); ++i) {
      const Scalar x1 = g.x(i), x2 = g.x(j);
      in(i, j) = detail::bilinear(out, (x1 - x2) * r, (x1 + x2) * r);
    }
  }
  return {g, g, std::move(in)};
}

/// pi^(-1/4) sigma^(-1/2) exp(-x^2 / (2 sigma^2)), renormalized on the grid.
template <typename Scalar>
SampledWaveFunctionT<Scalar> squeezed_vacuum(Scalar sigma, const GridSpecT<Scalar>& grid) {
  if (!(sigma > Scalar(0)) || !std::isfinite(sigma)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  if (grid.span() < Scalar(12) * sigma) {
    throw Error(ErrorCode::GridTooNarrow, "grid span must cover at least 12 sigma");
  }
  const Scalar c = Scalar(1) / (std::pow(std::numbers::pi_v<Scalar>, Scalar(0.25)) * std::sqrt(sigma));
  return normalize(SampledWaveFunctionT<Scalar>::sample(grid, [&](Scalar x) { return c * std::exp(-x * x / (Scalar(2) * sigma * sigma)); }));
}

/// Closed-form EPR kernel of the squeezed-light source on grid x grid
/// (first index x2, second index x5).
template <typename Scalar>
TwoModeStateT<Scalar> epr_state(const SqueezingParamsT<Scalar>& params, const GridSpecT<Scalar>& grid) {
  if (!params.finite()) {
    throw Error(ErrorCode::SentinelNotMaterializable, "ideal squeezing limits have no grid representation");
  }
  const Scalar sa = *params.sigma_a, sb = *params.sigma_b;
  return normalize(TwoModeStateT<Scalar>::sample(grid, grid, [&](Scalar x2, Scalar x5) {
    const Scalar d = (x2 - x5) / (Scalar(2) * sa);
    const Scalar s = (x2 + x5) / (Scalar(2) * sb);
    return std::exp(-d * d - s * s);
  }));
}

/// The same source built physically: squeezed beams through the beam splitter.
template <typename Scalar>
TwoModeStateT<Scalar> epr_from_beam_splitter(const SqueezingParamsT<Scalar>& params, const GridSpecT<Scalar>& grid) {
  if (!params.finite()) {
    throw Error(ErrorCode::SentinelNotMaterializable, "ideal squeezing limits have no grid representation");
  }
  const auto beam_b = squeezed_vacuum(*params.sigma_b, grid);
  const auto beam_a = squeezed_vacuum(*params.sigma_a, grid);
  return normalize(beam_splitter(product_state(beam_b, beam_a)));
}

}  // namespace cvt
