#pragma once

// Fidelity metrics, kernel and envelope profiles, and scenario sweeps.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cvt/channel.hpp"

namespace cvt {

/// |<a|b>|^2.
template <typename Scalar>
Scalar fidelity(const SampledWaveFunctionT<Scalar>& a, const SampledWaveFunctionT<Scalar>& b) {
  return std::norm(inner_product(a, b));
}

/// L2 distance between the magnitude profiles |a| and |b| (grid measure).
/// Insensitive to the phase ramps a momentum correction leaves behind.
template <typename Scalar>
Scalar l2_distortion(const SampledWaveFunctionT<Scalar>& a, const SampledWaveFunctionT<Scalar>& b) {
  require_same_grid(a.grid(), b.grid());
  return (a.amplitudes().cwiseAbs() - b.amplitudes().cwiseAbs()).norm() * std::sqrt(a.grid().dx());
}

/// Relative L2 error of `a` against `b` after rotating `a` by the global phase
/// that best aligns it with `b`.
template <typename Scalar>
Scalar relative_l2_aligned(const SampledWaveFunctionT<Scalar>& a, const SampledWaveFunctionT<Scalar>& b) {
  const auto ov = inner_product(a, b);
  const std::complex<Scalar> rot = std::abs(ov) > Scalar(0) ? ov / std::abs(ov) : std::complex<Scalar>(1);
  return (a.amplitudes() * rot - b.amplitudes()).norm() / b.amplitudes().norm();
}

/// Probability carried by momenta with |p| > cutoff.
template <typename Scalar>
Scalar momentum_tail_mass(const SampledWaveFunctionT<Scalar>& psi, Scalar cutoff) {
  const auto phi = to_momentum(psi);
  Scalar tail = 0;
  for (Index k = 0; k < phi.size(); ++k) {
    if (std::abs(phi.grid().x(k)) > cutoff) tail += std::norm(phi[k]);
  }
  return tail * phi.grid().dp();
}

struct Window {
  double lo;
  double hi;
};

template <typename Scalar>
struct KernelProfileT {
  RealVector<Scalar> u;
  RealVector<Scalar> re;
  RealVector<Scalar> im;
};

template <typename Scalar>
struct EnvelopeProfileT {
  RealVector<Scalar> x;
  RealVector<Scalar> value;
};

using KernelProfile = KernelProfileT<double>;
using EnvelopeProfile = EnvelopeProfileT<double>;

/// Convolution kernel exp(i sqrt2 p4 u) exp(-(u/(2 sa))^2) on an inclusive window.
template <typename Scalar>
KernelProfileT<Scalar> kernel_profile(Scalar sigma_a, Scalar p4, Window w, Index points = 6001) {
  if (!(sigma_a > Scalar(0))) throw Error(ErrorCode::InvalidArgument, "sigma_a must be positive");
  if (points < 2 || !(w.hi > w.lo)) throw Error(ErrorCode::InvalidArgument, "empty profile window");
  KernelProfileT<Scalar> k;
  k.u = RealVector<Scalar>::LinSpaced(points, Scalar(w.lo), Scalar(w.hi));
  k.re.resize(points);
  k.im.resize(points);
  const Scalar theta = std::numbers::sqrt2_v<Scalar> * p4;
  for (Index i = 0; i < points; ++i) {
    const Scalar u = k.u[i];
    const Scalar g = std::exp(-(u / (2 * sigma_a)) * (u / (2 * sigma_a)));
    k.re[i] = g * std::cos(theta * u);
    k.im[i] = g * std::sin(theta * u);
  }
  return k;
}

/// exp(-((x - sqrt2 x3)/sb)^2).
template <typename Scalar>
Scalar envelope_value(Scalar sigma_b, Scalar x3, Scalar x) {
  const Scalar d = (x - std::numbers::sqrt2_v<Scalar> * x3) / sigma_b;
  return std::exp(-d * d);
}

/// The envelope sampled on an inclusive window.
template <typename Scalar>
EnvelopeProfileT<Scalar> envelope_profile(Scalar sigma_b, Scalar x3, Window w, Index points = 2001) {
  if (!(sigma_b > Scalar(0))) throw Error(ErrorCode::InvalidArgument, "sigma_b must be positive");
  if (points < 2 || !(w.hi > w.lo)) throw Error(ErrorCode::InvalidArgument, "empty profile window");
  EnvelopeProfileT<Scalar> e;
  e.x = RealVector<Scalar>::LinSpaced(points, Scalar(w.lo), Scalar(w.hi));
  e.value.resize(points);
  for (Index i = 0; i < points; ++i) e.value[i] = envelope_value(sigma_b, x3, e.x[i]);
  return e;
}

/// Distance from the peak of |k| to where it first drops to 1/e of the peak,
/// averaged over both sides (linear interpolation between samples).
template <typename Scalar>
Scalar efold_half_width(const KernelProfileT<Scalar>& k) {
  const RealVector<Scalar> mag = (k.re.array().square() + k.im.array().square()).sqrt().matrix();
  Index peak;
  const Scalar top = mag.maxCoeff(&peak);
  const Scalar level = top / std::numbers::e_v<Scalar>;
  auto crossing = [&](int dir) -> std::optional<Scalar> {
    for (Index i = peak; i + dir >= 0 && i + dir < mag.size(); i += dir) {
      if (mag[i + dir] <= level) {
        const Scalar t = (mag[i] - level) / (mag[i] - mag[i + dir]);
        return std::abs(k.u[i] + t * (k.u[i + dir] - k.u[i]) - k.u[peak]);
      }
    }
    return std::nullopt;
  };
  const auto left = crossing(-1), right = crossing(1);
  if (left && right) return (*left + *right) / 2;
  if (left || right) return left ? *left : *right;
  throw Error(ErrorCode::InvalidArgument, "window does not reach the 1/e level");
}

/// Sign changes of a sampled real curve, located by linear interpolation.
template <typename Scalar>
std::vector<Scalar> zero_crossings(const RealVector<Scalar>& x, const RealVector<Scalar>& y) {
  std::vector<Scalar> out;
  for (Index i = 0; i + 1 < y.size(); ++i) {
    if ((y[i] < 0) != (y[i + 1] < 0) && y[i] != y[i + 1]) {
      out.push_back(x[i] + (x[i + 1] - x[i]) * y[i] / (y[i] - y[i + 1]));
    }
  }
  return out;
}

/// pi over the mean spacing of the real part's zero crossings.
template <typename Scalar>
Scalar oscillation_wavenumber(const KernelProfileT<Scalar>& k) {
  const auto z = zero_crossings(k.u, k.re);
  if (z.size() < 2) throw Error(ErrorCode::InvalidArgument, "fewer than two zero crossings in the window");
  return std::numbers::pi_v<Scalar> * Scalar(z.size() - 1) / (z.back() - z.front());
}

// ---------------------------------------------------------------------------
// Sweeps (double precision).

struct SampleWithSeed {
  std::uint64_t seed;
};

using OutcomeRequest = std::variant<MeasurementOutcome, SampleWithSeed>;

struct Scenario {
  std::string label;
  SqueezingParams params;
  OutcomeRequest outcome;
  std::optional<GridSpec> grid;  // input resampled here when set
};

struct ReportRow {
  std::string label;
  SqueezingParams params;
  std::string regime;
  MeasurementOutcome outcome;  // the outcome actually used
  double fidelity = 0;
  double l2_distortion = 0;
  MomentSummary input_moments;
  MomentSummary output_moments;
  std::optional<std::string> error;
  std::optional<SampledWaveFunction> input;   // kept when SweepOptions::keep_states
  std::optional<SampledWaveFunction> output;
};

struct FidelityReport {
  std::vector<ReportRow> rows;

  bool all_succeeded() const;
  const ReportRow& operator[](const std::string& label) const;
};

struct SweepOptions {
  unsigned threads = 0;  // 0: default worker count
  bool keep_states = false;
  bool enforce_span_rule = true;
  KernelMethod method = KernelMethod::Auto;
  OutcomeGridOptions outcome_grid{};
};

/// Worker count: `requested` if nonzero, else hardware concurrency; capped by
/// the TELEPORT_THREADS environment variable when set.
unsigned worker_count(unsigned requested);

/// One channel run. Errors propagate.
ReportRow run_scenario(const Scenario& s, const SampledWaveFunction& input, const SweepOptions& opt = {});

/// Runs every scenario; failures are recorded on their row. Row order follows
/// the scenario order regardless of scheduling.
FidelityReport run_sweep(const std::vector<Scenario>& scenarios, const SampledWaveFunction& input,
                         const SweepOptions& opt = {});

/// Same, with one prepared input per scenario (scenario grids are ignored).
FidelityReport run_sweep(const std::vector<Scenario>& scenarios, const std::vector<SampledWaveFunction>& inputs,
                         const SweepOptions& opt = {});

}  // namespace cvt
