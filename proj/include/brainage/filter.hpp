#pragma once

#include <array>
#include <span>
#include <vector>

namespace brainage::filter {

// One second-order section, a[0] == 1.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

using Sos = std::vector<Biquad>;

// Digital Butterworth band-pass of the given prototype order (2*order poles),
// designed through the bilinear transform with pre-warped band edges.
Sos butter_bandpass(int order, double lo_hz, double hi_hz, double rate_hz);

// Complex frequency response magnitude at f.
double magnitude(const Sos& sos, double f_hz, double rate_hz);

// Causal filtering with steady-state initial conditions scaled by x[0].
std::vector<double> sosfilt(const Sos& sos, std::span<const double> x);

// Forward-backward filtering with odd extension at both ends; zero phase.
std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x);

}  // namespace brainage::filter
