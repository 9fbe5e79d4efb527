#pragma once

// The continuous-variable teleportation channel.
//
// With homodyne outcomes (x3, p4) and a squeezed-light source (sa, sb), the
// remote mode ends up (up to normalization and a global phase) in
//
//   psi_tel(x) = \int exp(-((x - v)/(2 sa))^2) exp(-((x + v - 2 sqrt2 x3)/(2 sb))^2)
//                     exp(i sqrt2 p4 (x - v)) psi(v) dv
//
// which reduces to a convolution when sb -> inf, to multiplication by
// exp(-((x - sqrt2 x3)/sb)^2) when sa -> 0, and to the identity when both
// limits hold.
//
// Two evaluation routes exist for kernels with a finite sa:
//   * quadrature: the trapezoid sum over the input grid, evaluated exactly via
//     zero-padded FFT linear convolution (or by the O(n^2) reference loop);
//   * spectral: the continuous Fourier transform of the convolution factor
//     applied to the band-limited interpolant of psi. Needed when the grid
//     cannot resolve the narrow Gaussian of a strongly squeezed source.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string_view>
#include <thread>
#include <variant>

#include "cvt/grid.hpp"
#include "cvt/optics.hpp"

namespace cvt {

template <typename Scalar>
struct MeasurementOutcomeT {
  Scalar x3 = 0;  // homodyne D_x on mode 3
  Scalar p4 = 0;  // homodyne D_p on mode 4

  friend bool operator==(const MeasurementOutcomeT&, const MeasurementOutcomeT&) = default;
};

template <typename Scalar>
struct IdealChannel {};
template <typename Scalar>
struct ConvolutionOnly {
  Scalar sigma_a;
};
template <typename Scalar>
struct MultiplicationOnly {
  Scalar sigma_b;
};
template <typename Scalar>
struct GeneralKernel {
  Scalar sigma_a;
  Scalar sigma_b;
};

template <typename Scalar>
using KernelRegimeT =
    std::variant<IdealChannel<Scalar>, ConvolutionOnly<Scalar>, MultiplicationOnly<Scalar>, GeneralKernel<Scalar>>;

using MeasurementOutcome = MeasurementOutcomeT<double>;
using KernelRegime = KernelRegimeT<double>;

enum class KernelMethod { Auto, Quadrature, DirectQuadrature, Spectral };

template <typename Scalar>
KernelRegimeT<Scalar> regime_for(const SqueezingParamsT<Scalar>& p) {
  if (p.sigma_a && p.sigma_b) return GeneralKernel<Scalar>{*p.sigma_a, *p.sigma_b};
  if (p.sigma_a) return ConvolutionOnly<Scalar>{*p.sigma_a};
  if (p.sigma_b) return MultiplicationOnly<Scalar>{*p.sigma_b};
  return IdealChannel<Scalar>{};
}

template <typename Scalar>
SqueezingParamsT<Scalar> params_for(const KernelRegimeT<Scalar>& r) {
  struct V {
    SqueezingParamsT<Scalar> operator()(IdealChannel<Scalar>) const { return SqueezingParamsT<Scalar>::ideal(); }
    SqueezingParamsT<Scalar> operator()(ConvolutionOnly<Scalar> c) const { return {c.sigma_a, std::nullopt}; }
    SqueezingParamsT<Scalar> operator()(MultiplicationOnly<Scalar> m) const { return {std::nullopt, m.sigma_b}; }
    SqueezingParamsT<Scalar> operator()(GeneralKernel<Scalar> g) const { return {g.sigma_a, g.sigma_b}; }
  };
  return std::visit(V{}, r);
}

template <typename Scalar>
std::string_view regime_name(const KernelRegimeT<Scalar>& r) {
  constexpr std::string_view names[] = {"Ideal", "ConvolutionOnly", "MultiplicationOnly", "General"};
  return names[r.index()];
}

/// The same physical event described in the momentum representation: the
/// convolution and multiplication factors trade places with reciprocal widths.
template <typename Scalar>
std::pair<KernelRegimeT<Scalar>, MeasurementOutcomeT<Scalar>> momentum_dual(const KernelRegimeT<Scalar>& r,
                                                                            const MeasurementOutcomeT<Scalar>& o) {
  const auto p = params_for(r);
  std::optional<Scalar> a, b;
  if (p.sigma_b) a = Scalar(1) / *p.sigma_b;
  if (p.sigma_a) b = Scalar(1) / *p.sigma_a;
  return {regime_for(SqueezingParamsT<Scalar>(a, b)), MeasurementOutcomeT<Scalar>{o.p4, -o.x3}};
}

/// Grid span the command-line runner demands before executing a scenario.
template <typename Scalar>
Scalar minimum_span(Scalar support, const SqueezingParamsT<Scalar>& params, const MeasurementOutcomeT<Scalar>& outcome) {
  if (!params.sigma_b) return Scalar(2) * support;
  return Scalar(2) * (support + std::numbers::sqrt2_v<Scalar> * std::abs(outcome.x3) + Scalar(6) * *params.sigma_b);
}

namespace detail {

/// Amplitudes times exp(log_scale); keeps products of tiny Gaussian factors
/// representable between stages.
template <typename Scalar>
struct ScaledAmplitudes {
  ComplexVector<Scalar> v;
  Scalar log_scale = 0;

  void rescale() {
    const Scalar m = v.size() ? v.cwiseAbs().maxCoeff() : Scalar(0);
    if (m > Scalar(0) && std::isfinite(m)) {
      v /= m;
      log_scale += std::log(m);
    }
  }
};

template <typename Scalar>
ComplexVector<Scalar> fft_forward(const ComplexVector<Scalar>& in) {
  ComplexVector<Scalar> out(in.size());
  fft_engine<Scalar>().fwd(out.data(), in.data(), in.size());
  return out;
}

template <typename Scalar>
ComplexVector<Scalar> fft_inverse(const ComplexVector<Scalar>& in) {
  ComplexVector<Scalar> out(in.size());
  fft_engine<Scalar>().inv(out.data(), in.data(), in.size());  // scaled by 1/n
  return out;
}

/// h_i = sum_{j=0}^{n-1} g[i - j + n - 1] f_j for g of length 2n - 1.
/// Exact linear convolution through a zero-padded FFT.
template <typename Scalar>
ComplexVector<Scalar> banded_convolution(const ComplexVector<Scalar>& g, const ComplexVector<Scalar>& f) {
  const Index n = f.size();
  const Index len = next_power_of_two(3 * n);
  ComplexVector<Scalar> gp = ComplexVector<Scalar>::Zero(len), fp = ComplexVector<Scalar>::Zero(len);
  gp.head(g.size()) = g;
  fp.head(n) = f;
  const ComplexVector<Scalar> prod = fft_forward(gp).cwiseProduct(fft_forward(fp));
  return fft_inverse(prod).segment(n - 1, n);
}

template <typename Scalar>
RealVector<Scalar> trapezoid_weights(Index n) {
  RealVector<Scalar> w = RealVector<Scalar>::Ones(n);
  w[0] = w[n - 1] = Scalar(0.5);
  return w;
}

/// exp(-((x - center)^2) * rate) sampled on the grid.
template <typename Scalar>
RealVector<Scalar> gaussian_factor(const GridSpecT<Scalar>& g, Scalar center, Scalar rate) {
  RealVector<Scalar> m(g.n());
  for (Index i = 0; i < g.n(); ++i) {
    const Scalar d = g.x(i) - center;
    m[i] = std::exp(-d * d * rate);
  }
  return m;
}

template <typename Scalar>
struct KernelCoefficients {
  Scalar a;       // 1 / (4 sa^2)
  Scalar b;       // 1 / (4 sb^2), zero for the convolution-only regime
  Scalar center;  // 2 sqrt2 x3 for the x + v dependence
  Scalar theta;   // sqrt2 p4
};

template <typename Scalar>
KernelCoefficients<Scalar> coefficients(Scalar sigma_a, std::optional<Scalar> sigma_b, const MeasurementOutcomeT<Scalar>& o) {
  const Scalar r2 = std::numbers::sqrt2_v<Scalar>;
  return {Scalar(1) / (Scalar(4) * sigma_a * sigma_a), sigma_b ? Scalar(1) / (Scalar(4) * *sigma_b * *sigma_b) : Scalar(0),
          Scalar(2) * r2 * o.x3, r2 * o.p4};
}

/// True when the trapezoid sum resolves the convolution factor: its aliased
/// spectral copies are negligible over the grid band.
template <typename Scalar>
bool quadrature_resolves(const GridSpecT<Scalar>& g, const KernelCoefficients<Scalar>& k) {
  if (k.a <= k.b) return true;
  const Scalar width = Scalar(1) / std::sqrt(k.a - k.b);
  const Scalar nyquist = std::numbers::pi_v<Scalar> / g.dx();
  return (nyquist - std::abs(k.theta)) * width >= Scalar(12);
}

/// O(n^2) trapezoid sum of the finite-squeezing kernel; the reference route.
template <typename Scalar>
ScaledAmplitudes<Scalar> kernel_direct(const SampledWaveFunctionT<Scalar>& psi, const KernelCoefficients<Scalar>& k) {
  const auto& g = psi.grid();
  const Index n = g.n();
  const auto w = trapezoid_weights<Scalar>(n);
  ScaledAmplitudes<Scalar> out{ComplexVector<Scalar>::Zero(n), 0};
  for (Index i = 0; i < n; ++i) {
    const Scalar x = g.x(i);
    std::complex<Scalar> acc = 0;
    for (Index j = 0; j < n; ++j) {
      const Scalar v = g.x(j);
      const Scalar d = x - v, s = x + v - k.center;
      acc += w[j] * std::exp(-k.a * d * d - k.b * s * s) * std::polar(Scalar(1), k.theta * d) * psi[j];
    }
    out.v[i] = acc * g.dx();
  }
  out.rescale();
  return out;
}

/// The same trapezoid sum, factored into Gaussian envelopes and one banded
/// convolution (difference kernel when a > b, sum kernel otherwise).
template <typename Scalar>
ScaledAmplitudes<Scalar> kernel_quadrature(const SampledWaveFunctionT<Scalar>& psi, const KernelCoefficients<Scalar>& k) {
  const auto& g = psi.grid();
  const Index n = g.n();
  const Scalar dx = g.dx();
  const Scalar half = k.center / Scalar(2);
  const auto w = trapezoid_weights<Scalar>(n);
  ScaledAmplitudes<Scalar> out;
  if (k.a > k.b) {
    // a d^2 + b s^2 = (a - b) d^2 + 2b (x - c/2)^2 + 2b (v - c/2)^2
    const RealVector<Scalar> env = gaussian_factor(g, half, Scalar(2) * k.b);
    ComplexVector<Scalar> kern(2 * n - 1);
    for (Index t = 0; t < 2 * n - 1; ++t) {
      const Scalar u = Scalar(t - (n - 1)) * dx;
      kern[t] = std::exp(-(k.a - k.b) * u * u) * std::polar(Scalar(1), k.theta * u);
    }
    out.v = psi.amplitudes().cwiseProduct(env.cwiseProduct(w).template cast<std::complex<Scalar>>());
    out.rescale();
    out.v = banded_convolution(kern, out.v);
    out.v = out.v.cwiseProduct(env.template cast<std::complex<Scalar>>()) * dx;
  } else {
    // a d^2 + b s^2 = (b - a) s^2 + 2a (x - c/2)^2 + 2a (v - c/2)^2
    const RealVector<Scalar> env = gaussian_factor(g, half, Scalar(2) * k.a);
    ComplexVector<Scalar> kern(2 * n - 1);
    for (Index t = 0; t < 2 * n - 1; ++t) {
      const Scalar s = Scalar(2) * g.x_min() + Scalar(t) * dx - k.center;  // x_i + v_j with i + j = t
      kern[t] = std::exp(-(k.b - k.a) * s * s);
    }
    ComplexVector<Scalar> f(n);
    for (Index j = 0; j < n; ++j) f[j] = psi[j] * w[j] * env[j] * std::polar(Scalar(1), -k.theta * g.x(j));
    // Reversing f turns the sum kernel kern[i + j] into a banded convolution.
    out.v = f.reverse();
    out.rescale();
    out.v = banded_convolution(kern, out.v);
    for (Index i = 0; i < n; ++i) out.v[i] *= env[i] * std::polar(Scalar(1), k.theta * g.x(i)) * dx;
  }
  out.rescale();
  return out;
}

/// First half of the spectral route: envelope, then spectrum. Independent of p4.
template <typename Scalar>
struct SpectralStage {
  RealVector<Scalar> env;
  ComplexVector<Scalar> spectrum;
  GridSpecT<Scalar> momentum_grid;
  Scalar log_scale;
};

template <typename Scalar>
SpectralStage<Scalar> spectral_prepare(const SampledWaveFunctionT<Scalar>& psi, const KernelCoefficients<Scalar>& k) {
  if (!(k.a > k.b)) {
    throw Error(ErrorCode::InvalidArgument, "spectral evaluation needs sigma_a < sigma_b");
  }
  const auto& g = psi.grid();
  const RealVector<Scalar> env =
      k.b > Scalar(0) ? gaussian_factor(g, k.center / Scalar(2), Scalar(2) * k.b) : RealVector<Scalar>::Ones(g.n());
  ScaledAmplitudes<Scalar> out{psi.amplitudes().cwiseProduct(env.template cast<std::complex<Scalar>>()), 0};
  out.rescale();
  auto spectrum = to_momentum(SampledWaveFunctionT<Scalar>(g, out.v));
  return {env, spectrum.amplitudes(), spectrum.grid(), out.log_scale};
}

/// Second half: continuous-spectrum filter around theta, back to x, envelope.
template <typename Scalar>
ScaledAmplitudes<Scalar> spectral_finish(const SpectralStage<Scalar>& st, const GridSpecT<Scalar>& g,
                                         const KernelCoefficients<Scalar>& k) {
  const auto& pg = st.momentum_grid;
  const Scalar rate = Scalar(1) / (Scalar(4) * (k.a - k.b));
  const Scalar gain = std::sqrt(std::numbers::pi_v<Scalar> / (k.a - k.b));
  ScaledAmplitudes<Scalar> out{ComplexVector<Scalar>(pg.n()), st.log_scale};
  for (Index i = 0; i < pg.n(); ++i) {
    const Scalar d = pg.x(i) - k.theta;
    out.v[i] = st.spectrum[i] * (gain * std::exp(-d * d * rate));
  }
  out.rescale();
  out.v = to_position(SampledWaveFunctionT<Scalar>(pg, out.v), g).amplitudes().cwiseProduct(st.env.template cast<std::complex<Scalar>>());
  out.rescale();
  return out;
}

/// Envelope, continuous-spectrum convolution, envelope. Requires a > b.
template <typename Scalar>
ScaledAmplitudes<Scalar> kernel_spectral(const SampledWaveFunctionT<Scalar>& psi, const KernelCoefficients<Scalar>& k) {
  return spectral_finish(spectral_prepare(psi, k), psi.grid(), k);
}

/// The exactly nonzero stretch of psi, padded by the reach of a convolution
/// factor exp(-rate d^2) down to the smallest normal number. Returns psi itself
/// when cropping would not shorten the grid.
template <typename Scalar>
SampledWaveFunctionT<Scalar> crop_to_support(const SampledWaveFunctionT<Scalar>& psi, Scalar rate) {
  const auto& g = psi.grid();
  const Index n = g.n();
  Index first = 0, last = n - 1;
  while (first < n && psi[first] == std::complex<Scalar>(0)) ++first;
  while (last > first && psi[last] == std::complex<Scalar>(0)) --last;
  if (first >= n) return psi;
  const Scalar reach = std::sqrt(-std::log(std::numeric_limits<Scalar>::min()) / rate);
  const Index margin = static_cast<Index>(std::ceil(reach / g.dx())) + 2;
  const Index need = last - first + 1 + 2 * margin;
  const Index m = next_power_of_two(need);
  if (m >= n) return psi;
  const Index start = std::clamp<Index>(first - margin - (m - need) / 2, 0, n - m);
  return SampledWaveFunctionT<Scalar>(GridSpecT<Scalar>(g.x(start), g.dx(), m), psi.amplitudes().segment(start, m));
}

template <typename Scalar>
KernelMethod resolve_method(KernelMethod requested, const GridSpecT<Scalar>& g, const KernelCoefficients<Scalar>& k) {
  if (requested != KernelMethod::Auto) return requested;
  return quadrature_resolves(g, k) ? KernelMethod::Quadrature : KernelMethod::Spectral;
}

template <typename Scalar>
ScaledAmplitudes<Scalar> apply_kernel(const SampledWaveFunctionT<Scalar>& psi, const KernelCoefficients<Scalar>& k,
                                      KernelMethod method) {
  switch (resolve_method(method, psi.grid(), k)) {
    case KernelMethod::DirectQuadrature: return kernel_direct(psi, k);
    case KernelMethod::Spectral: return kernel_spectral(psi, k);
    case KernelMethod::Quadrature:
    case KernelMethod::Auto: break;
  }
  return kernel_quadrature(psi, k);
}

/// Unnormalized channel action with an outcome-independent overall constant.
template <typename Scalar>
ScaledAmplitudes<Scalar> apply_channel(const SampledWaveFunctionT<Scalar>& psi, const KernelRegimeT<Scalar>& regime,
                                       const MeasurementOutcomeT<Scalar>& outcome, KernelMethod method) {
  if (!std::isfinite(outcome.x3) || !std::isfinite(outcome.p4)) {
    throw Error(ErrorCode::InvalidArgument, "measurement outcome must be finite");
  }
  struct V {
    const SampledWaveFunctionT<Scalar>& psi;
    const MeasurementOutcomeT<Scalar>& o;
    KernelMethod method;
    ScaledAmplitudes<Scalar> operator()(IdealChannel<Scalar>) const { return {psi.amplitudes(), 0}; }
    ScaledAmplitudes<Scalar> operator()(ConvolutionOnly<Scalar> c) const {
      return apply_kernel(psi, coefficients<Scalar>(c.sigma_a, std::nullopt, o), method);
    }
    ScaledAmplitudes<Scalar> operator()(MultiplicationOnly<Scalar> m) const {
      const Scalar rate = Scalar(1) / (m.sigma_b * m.sigma_b);
      const RealVector<Scalar> env = gaussian_factor(psi.grid(), std::numbers::sqrt2_v<Scalar> * o.x3, rate);
      ScaledAmplitudes<Scalar> out{psi.amplitudes().cwiseProduct(env.template cast<std::complex<Scalar>>()), 0};
      out.rescale();
      return out;
    }
    ScaledAmplitudes<Scalar> operator()(GeneralKernel<Scalar> g) const {
      return apply_kernel(psi, coefficients<Scalar>(g.sigma_a, g.sigma_b, o), method);
    }
  };
  return std::visit(V{psi, outcome, method}, regime);
}

}  // namespace detail

/// Which evaluation route `teleport` takes for this input and outcome.
template <typename Scalar>
KernelMethod method_for(const SampledWaveFunctionT<Scalar>& psi, const KernelRegimeT<Scalar>& regime,
                        const MeasurementOutcomeT<Scalar>& outcome, KernelMethod requested = KernelMethod::Auto) {
  const auto p = params_for(regime);
  if (!p.sigma_a) return KernelMethod::Auto;  // no convolution factor
  return detail::resolve_method(requested, psi.grid(), detail::coefficients(*p.sigma_a, p.sigma_b, outcome));
}

/// Normalized teleported wave function for one pair of homodyne outcomes.
template <typename Scalar>
SampledWaveFunctionT<Scalar> teleport(const SampledWaveFunctionT<Scalar>& psi, const KernelRegimeT<Scalar>& regime,
                                      const MeasurementOutcomeT<Scalar>& outcome,
                                      KernelMethod method = KernelMethod::Auto) {
  if (std::holds_alternative<IdealChannel<Scalar>>(regime)) return psi;
  auto out = detail::apply_channel(psi, regime, outcome, method);
  if (!out.v.allFinite()) throw Error(ErrorCode::ZeroNorm, "channel produced non-finite amplitudes");
  return normalize(SampledWaveFunctionT<Scalar>(psi.grid(), std::move(out.v)));
}

/// Teleportation carried out on a momentum-space wave function.
template <typename Scalar>
SampledWaveFunctionT<Scalar> teleport_momentum(const SampledWaveFunctionT<Scalar>& phi, const KernelRegimeT<Scalar>& regime,
                                               const MeasurementOutcomeT<Scalar>& outcome,
                                               KernelMethod method = KernelMethod::Auto) {
  const auto [dual_regime, dual_outcome] = momentum_dual(regime, outcome);
  return teleport(phi, dual_regime, dual_outcome, method);
}

// ---------------------------------------------------------------------------
// Brute-force oracle: the full three-mode state, no closed-form kernel.

template <typename Scalar>
struct OracleResult {
  SampledWaveFunctionT<Scalar> teleported;
  MeasurementOutcomeT<Scalar> outcome;  // snapped to the oracle lattice
};

inline constexpr Index kOracleMaxPoints = 64;

/// Builds psi(x1) phi(x2, x5), applies the beam splitter on modes (1, 2), the
/// conditional x-displacement of mode 5, the Fourier transform of mode 4 and
/// the momentum kick exp(i sqrt2 x5 p4), then conditions on the lattice point
/// nearest to the requested outcome.
///
/// Modes 1, 2 and 5 share the input lattice (spacing d, zero on the lattice);
/// modes 3 and 4 use spacing sqrt2 d so the 45 degree rotation maps lattice
/// points onto lattice points and the sqrt2 x3 displacement is a whole number
/// of bins. Nothing is interpolated.
template <typename Scalar>
OracleResult<Scalar> oracle_teleport(const SampledWaveFunctionT<Scalar>& psi, const SqueezingParamsT<Scalar>& params,
                                     const MeasurementOutcomeT<Scalar>& outcome) {
  const auto& g = psi.grid();
  const Index n = g.n();
  if (n > kOracleMaxPoints) throw Error(ErrorCode::OracleGridTooLarge, "oracle is limited to 64-point grids");
  if (!params.finite()) throw Error(ErrorCode::SentinelNotMaterializable, "oracle needs finite squeezing");
  if (!g.is_centered()) throw Error(ErrorCode::GridMismatch, "oracle lattice needs x = 0 at index n/2");

  const Scalar d = g.dx();
  const Scalar h = std::numbers::sqrt2_v<Scalar> * d;
  // Source modes (2, 5) live on a 4n lattice so every shifted index stays inside.
  const auto source_grid = GridSpecT<Scalar>::centered(d, 4 * n);
  const auto phi = epr_state(params, source_grid);
  const Index src_mid = 2 * n;

  // Mode 3: n points, mode 4: 2n points, both spacing h and centered.
  const Index n3 = n, n4 = 2 * n;
  const auto grid4 = GridSpecT<Scalar>::centered(h, n4);
  const Index a_snap = static_cast<Index>(std::llround(outcome.x3 / h));
  if (a_snap < -n3 / 2 || a_snap >= n3 / 2) throw Error(ErrorCode::InvalidArgument, "x3 outside the oracle lattice");
  const auto pgrid4 = grid4.conjugate();
  const Index p_index = pgrid4.nearest_index(outcome.p4);
  if (p_index < 0 || p_index >= n4) throw Error(ErrorCode::InvalidArgument, "p4 outside the oracle lattice");

  // Three-mode amplitudes after beam splitter and displacement, T[x3][x5](x4).
  std::vector<ComplexVector<Scalar>> lines(static_cast<size_t>(n3 * n));
  for (Index ia = 0; ia < n3; ++ia) {
    const Index a = ia - n3 / 2;
    for (Index ic = 0; ic < n; ++ic) {
      const Index c = ic - n / 2;
      ComplexVector<Scalar> line = ComplexVector<Scalar>::Zero(n4);
      for (Index ib = 0; ib < n4; ++ib) {
        const Index b = ib - n4 / 2;
        const Index k1 = a + b + n / 2;           // x1 = (x4 + x3)/sqrt2
        if (k1 < 0 || k1 >= n) continue;
        const Index k2 = (b - a) + src_mid;       // x2 = (x4 - x3)/sqrt2
        const Index k5 = (c - 2 * a) + src_mid;   // x5 - sqrt2 x3
        line[ib] = psi[k1] * phi(k2, k5);
      }
      lines[static_cast<size_t>(ia * n + ic)] = std::move(line);
    }
  }

  // Fourier transform every x4 line, then apply the momentum kick.
  const Index ia_snap = a_snap + n3 / 2;
  const Scalar p4 = pgrid4.x(p_index);
  ComplexVector<Scalar> out(n);
  for (Index ia = 0; ia < n3; ++ia) {
    for (Index ic = 0; ic < n; ++ic) {
      auto& line = lines[static_cast<size_t>(ia * n + ic)];
      line = to_momentum(SampledWaveFunctionT<Scalar>(grid4, line)).amplitudes();
      for (Index ip = 0; ip < n4; ++ip) {
        line[ip] *= std::polar(Scalar(1), std::numbers::sqrt2_v<Scalar> * g.x(ic) * pgrid4.x(ip));
      }
      if (ia == ia_snap) out[ic] = line[p_index];
    }
  }
  return {normalize(SampledWaveFunctionT<Scalar>(g, std::move(out))), {Scalar(a_snap) * h, p4}};
}

// ---------------------------------------------------------------------------
// Homodyne outcome statistics.

template <typename Scalar>
struct OutcomeMomentsT {
  Scalar mean_x3, var_x3;
  Scalar mean_p4, var_p4;
};

/// x3 = x1/sqrt2 + (xa - xb)/2 and p4 = p1/sqrt2 + (pb - pa)/2 with independent
/// source modes: Var xa = sa^2/2, Var pa = 1/(2 sa^2), and likewise for b.
/// Ideal limits contribute zero (or an unbounded variance on the other quadrature).
template <typename Scalar>
OutcomeMomentsT<Scalar> analytic_outcome_moments(const MomentSummary& input, const SqueezingParamsT<Scalar>& params) {
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  const Scalar r2 = std::numbers::sqrt2_v<Scalar>;
  const Scalar var_xa = params.sigma_a ? *params.sigma_a * *params.sigma_a / 2 : Scalar(0);
  const Scalar var_pa = params.sigma_a ? 1 / (2 * *params.sigma_a * *params.sigma_a) : inf;
  const Scalar var_xb = params.sigma_b ? *params.sigma_b * *params.sigma_b / 2 : inf;
  const Scalar var_pb = params.sigma_b ? 1 / (2 * *params.sigma_b * *params.sigma_b) : Scalar(0);
  return {Scalar(input.mean_x) / r2, Scalar(input.std_x * input.std_x) / 2 + (var_xa + var_xb) / 4,
          Scalar(input.mean_p) / r2, Scalar(input.std_p * input.std_p) / 2 + (var_pa + var_pb) / 4};
}

/// Joint density of (x3, p4) tabulated on cell centers. A quadrature that does
/// not influence the regime (x3 without a finite sb, p4 without a finite sa)
/// collapses to a single cell at zero.
template <typename Scalar>
struct OutcomeDistributionT {
  RealVector<Scalar> x3;
  RealVector<Scalar> p4;
  Scalar cell_x3 = 0;  // zero on a collapsed axis
  Scalar cell_p4 = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> density;  // rows x3, cols p4
  std::vector<Scalar> cumulative;                                 // column-major running mass

  Scalar cell_area() const { return (cell_x3 > 0 ? cell_x3 : Scalar(1)) * (cell_p4 > 0 ? cell_p4 : Scalar(1)); }
  Scalar total_mass() const { return density.sum() * cell_area(); }
};

using OutcomeDistribution = OutcomeDistributionT<double>;
using OutcomeMoments = OutcomeMomentsT<double>;

struct OutcomeGridOptions {
  Index cells_x3 = 128;
  Index cells_p4 = 128;
  double coverage = 6.0;  // half-range in analytic standard deviations
  unsigned threads = 0;   // 0: hardware concurrency
};

template <typename Scalar>
OutcomeDistributionT<Scalar> build_outcome_distribution(const SampledWaveFunctionT<Scalar>& psi,
                                                        const SqueezingParamsT<Scalar>& params,
                                                        const OutcomeGridOptions& opt = {}) {
  if (!params.sigma_a && !params.sigma_b) {
    throw Error(ErrorCode::IdealChannelOutcomeUnbounded, "ideal channel outcomes are uniformly spread over the real line");
  }
  const MomentSummary in = moments(psi);
  const auto am = analytic_outcome_moments<Scalar>(in, params);
  const auto regime = regime_for(params);

  if (params.sigma_a) {
    const Scalar width = Scalar(2) * *params.sigma_a;
    if (Scalar(in.support_length) + Scalar(8) * width > psi.grid().span()) {
      throw Error(ErrorCode::GridTooNarrow, "input grid cannot hold the blurred state");
    }
  }

  OutcomeDistributionT<Scalar> dist;
  auto axis = [&](bool active, Scalar mean, Scalar var, Index cells, RealVector<Scalar>& centers, Scalar& cell) {
    if (!active) {
      centers = RealVector<Scalar>::Zero(1);
      cell = 0;
      return;
    }
    const Scalar half = Scalar(opt.coverage) * std::sqrt(var);
    cell = Scalar(2) * half / Scalar(cells);
    centers.resize(cells);
    for (Index i = 0; i < cells; ++i) centers[i] = mean - half + (Scalar(i) + Scalar(0.5)) * cell;
  };
  axis(params.sigma_b.has_value(), am.mean_x3, am.var_x3, opt.cells_x3, dist.x3, dist.cell_x3);
  axis(params.sigma_a.has_value(), am.mean_p4, am.var_p4, opt.cells_p4, dist.p4, dist.cell_p4);

  // One evaluation route for every cell so the overall constant is shared.
  const Scalar max_p4 = dist.p4.cwiseAbs().maxCoeff();
  const KernelMethod method = method_for(psi, regime, MeasurementOutcomeT<Scalar>{0, max_p4});

  const Index n3 = dist.x3.size(), n4 = dist.p4.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> logp(n3, n4);
  auto log_norm = [](const detail::ScaledAmplitudes<Scalar>& out) {
    const Scalar n2 = out.v.squaredNorm();
    return n2 > Scalar(0) ? std::log(n2) + Scalar(2) * out.log_scale : -std::numeric_limits<Scalar>::infinity();
  };
  // A narrow convolution factor keeps the output on the stretch of grid the
  // input occupies; spectral rows also share the envelope and forward
  // transform across p4.
  const bool spectral = method == KernelMethod::Spectral && params.sigma_a;
  const auto coeffs = [&](const MeasurementOutcomeT<Scalar>& o) {
    return detail::coefficients<Scalar>(*params.sigma_a, params.sigma_b, o);
  };
  const bool narrow = params.sigma_a && coeffs({}).a > coeffs({}).b;
  const SampledWaveFunctionT<Scalar> cropped = narrow ? detail::crop_to_support(psi, coeffs({}).a - coeffs({}).b) : psi;
  auto row = [&](Index i) {
    if (spectral) {
      const auto stage = detail::spectral_prepare(cropped, coeffs({dist.x3[i], 0}));
      for (Index j = 0; j < n4; ++j) {
        logp(i, j) = log_norm(detail::spectral_finish(stage, cropped.grid(), coeffs({dist.x3[i], dist.p4[j]})));
      }
      return;
    }
    for (Index j = 0; j < n4; ++j) {
      logp(i, j) = log_norm(detail::apply_channel(cropped, regime, MeasurementOutcomeT<Scalar>{dist.x3[i], dist.p4[j]}, method));
    }
  };
  unsigned workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<Index>(workers, n3));
  if (workers <= 1) {
    for (Index i = 0; i < n3; ++i) row(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (Index i = w; i < n3; i += workers) row(i);
      });
    }
  }

  const Scalar top = logp.maxCoeff();
  if (!std::isfinite(top)) throw Error(ErrorCode::ZeroNorm, "outcome density vanished on the whole outcome grid");
  dist.density = (logp.array() - top).exp().matrix();
  dist.density /= dist.density.sum() * dist.cell_area();
  dist.cumulative.resize(static_cast<size_t>(n3 * n4));
  Scalar run = 0;
  const Scalar total = dist.density.sum();
  for (Index k = 0; k < n3 * n4; ++k) {
    run += dist.density.data()[k] / total;
    dist.cumulative[static_cast<size_t>(k)] = run;
  }
  dist.cumulative.back() = Scalar(1);
  return dist;
}

/// Stream of homodyne outcomes drawn from a tabulated density: a cell by its
/// mass, then a uniform position inside the cell. Uses only mt19937_64 bits,
/// so streams are reproducible across standard libraries.
template <typename Scalar>
class OutcomeSampler {
 public:
  OutcomeSampler(OutcomeDistributionT<Scalar> dist, std::uint64_t seed) : dist_(std::move(dist)), engine_(seed) {}

  MeasurementOutcomeT<Scalar> draw() {
    const Scalar u = uniform();
    const auto it = std::lower_bound(dist_.cumulative.begin(), dist_.cumulative.end(), u);
    const Index k = std::min<Index>(static_cast<Index>(it - dist_.cumulative.begin()), dist_.density.size() - 1);
    const Index n3 = dist_.x3.size();
    const Index i = k % n3, j = k / n3;
    MeasurementOutcomeT<Scalar> o{dist_.x3[i], dist_.p4[j]};
    const Scalar jx = uniform(), jp = uniform();
    if (dist_.cell_x3 > 0) o.x3 += (jx - Scalar(0.5)) * dist_.cell_x3;
    if (dist_.cell_p4 > 0) o.p4 += (jp - Scalar(0.5)) * dist_.cell_p4;
    return o;
  }

  const OutcomeDistributionT<Scalar>& distribution() const { return dist_; }

 private:
  Scalar uniform() { return Scalar(static_cast<double>(engine_() >> 11) * 0x1.0p-53); }

  OutcomeDistributionT<Scalar> dist_;
  std::mt19937_64 engine_;
};

template <typename Scalar>
MeasurementOutcomeT<Scalar> sample_outcome(const SampledWaveFunctionT<Scalar>& psi, const SqueezingParamsT<Scalar>& params,
                                           std::uint64_t seed, const OutcomeGridOptions& opt = {}) {
  return OutcomeSampler<Scalar>(build_outcome_distribution(psi, params, opt), seed).draw();
}

/// Per-scenario random stream derived from a master seed (splitmix64).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace cvt
