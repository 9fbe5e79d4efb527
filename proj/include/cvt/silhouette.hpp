#pragma once

// Procedural stand-in for a human silhouette: a standing figure seen along
// its height axis, head at x = 0 and feet at x = 100.

#include "cvt/grid.hpp"
#include "cvt/io.hpp"

namespace cvt {

/// Body half-width in arbitrary units at height x (zero outside [0, 100]).
double silhouette_half_width(double x);

/// Unnormalized 1D amplitude: half-width profile with facial and hand
/// notches and a fine halftone texture. Real and non-negative.
double silhouette_amplitude(double x);

/// silhouette_amplitude sampled on the grid and normalized.
SampledWaveFunction silhouette_signal(const GridSpec& grid);

/// Samples on [x_lo, x_hi] with spacing dx, ready for save as a signal file.
SignalSamples silhouette_samples(double x_lo, double x_hi, double dx);

/// Bright figure on a black background, height axis running down the rows.
GrayImage silhouette_image(int width = 256, int height = 256);

}  // namespace cvt
