#pragma once

// File formats and the scenario runner behind the `teleport` tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cvt/analysis.hpp"

namespace cvt {

// ---------------------------------------------------------------------------
// 1D signals: `#` comments, columns x, re[, im], comma or whitespace separated.

enum class Representation { Position, Momentum };

struct SignalSamples {
  std::vector<double> x;
  std::vector<std::complex<double>> amplitude;
  Representation representation = Representation::Position;
};

/// Parses and validates spacing (uniform within 1e-9 relative, increasing).
SignalSamples parse_signal(std::istream& in);
SignalSamples read_signal_file(const std::filesystem::path& path);

struct LoadedSignal {
  SampledWaveFunction psi;  // normalized
  double scale;             // norm before normalization
};

/// Padded power-of-two grid on the file's own spacing, samples centered.
GridSpec native_grid(const SignalSamples& s);

/// Places samples on `grid` (bin copy when aligned, linear interpolation
/// otherwise) and normalizes.
LoadedSignal place_signal(const SignalSamples& s, const GridSpec& grid);
LoadedSignal load_signal(const std::filesystem::path& path, const std::optional<GridSpec>& grid = std::nullopt);

void format_signal(std::ostream& out, const SampledWaveFunction& psi, Representation rep = Representation::Position);
void save_signal(const std::filesystem::path& path, const SampledWaveFunction& psi,
                 Representation rep = Representation::Position);

void save_kernel_profile(const std::filesystem::path& path, const KernelProfile& k);
void save_envelope_profile(const std::filesystem::path& path, const EnvelopeProfile& e);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// ---------------------------------------------------------------------------
// Grayscale images (portable graymap, P2 and P5).

struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major

  std::uint16_t& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
  std::uint16_t at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
};

GrayImage parse_pgm(const std::string& bytes);
GrayImage load_image(const std::filesystem::path& path);
std::string encode_pgm(const GrayImage& img);  // P5
void save_image(const std::filesystem::path& path, const GrayImage& img);

bool looks_like_pgm(const std::filesystem::path& path);

enum class ImageMode { Columns, Rows };

struct ImageOptions {
  ImageMode mode = ImageMode::Columns;
  double extent = 100.0;  // physical length of one line
  KernelMethod method = KernelMethod::Auto;
};

struct ImageTeleportResult {
  GrayImage display;  // per-line peak rescaled to the input line's peak
  Eigen::MatrixXd density;  // raw |psi_tel|^2, same layout as the image
  std::vector<int> skipped;  // lines with zero norm before or after teleportation
  double mean_fidelity = 0;
  double mean_l2_distortion = 0;
};

/// Teleports every column (or row) as an independent real wave function with
/// amplitude sqrt(intensity), all with the same regime and outcome.
ImageTeleportResult teleport_image(const GrayImage& img, const KernelRegime& regime, const MeasurementOutcome& outcome,
                                   const ImageOptions& opt = {});

/// Grid used for one image line: line samples on [0, extent) padded to a
/// power-of-two length.
GridSpec image_line_grid(int samples, double extent);

// ---------------------------------------------------------------------------
// Run configuration.

struct SampleRequest {};
using OutcomeValue = std::variant<double, SampleRequest>;

struct ScenarioConfig {
  std::string label;
  std::optional<double> sigma_a;  // empty: ideal
  std::optional<double> sigma_b;
  OutcomeValue x3 = 0.0;
  OutcomeValue p4 = 0.0;
  std::optional<std::uint64_t> seed;
  std::optional<GridSpec> grid;
  int line = 0;  // where the section starts, for diagnostics
};

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir = "out";
  std::optional<GridSpec> grid;
  ImageMode image_mode = ImageMode::Columns;
  std::uint64_t seed = 0;
  std::vector<ScenarioConfig> scenarios;
};

/// Numbers, fractions `a/b`, or the literals `ideal` / `sample` where allowed.
double parse_number(const std::string& text);
GridSpec parse_grid(const std::string& text);  // xmin:xmax:n

/// Relative paths in the file are resolved against `base_dir`.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Scenario list with seeds resolved (explicit, else derived from the master seed).
std::vector<Scenario> build_scenarios(const RunConfig& cfg);

std::string format_report_csv(const FidelityReport& report);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<GridSpec> grid;
};

/// Executes a configuration end to end. Returns 0 on success, 1 on
/// configuration or I/O failure, 2 when at least one scenario failed.
int run(const RunConfig& cfg, std::ostream& diag);
int run_config_file(const std::filesystem::path& path, const RunOverrides& overrides, std::ostream& diag);

}  // namespace cvt
