#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace brainage::spectral {

// One-sided power spectral density (units^2 / Hz).
struct Psd {
  std::vector<double> freqs;
  std::vector<double> power;
};

struct WelchParams {
  std::size_t segment = 256;  // shrinks to the signal length for short inputs
  double overlap = 0.5;
  std::size_t nfft = 0;  // 0 = segment length; larger values zero-pad
};

// Hann-windowed Welch estimate with per-segment mean removal.
Psd welch(std::span<const double> x, double rate_hz, const WelchParams& params = {});

// Rectangle-rule integral of the PSD over bins with lo <= f < hi.
double integrate_band(const Psd& psd, double lo_hz, double hi_hz);

}  // namespace brainage::spectral
