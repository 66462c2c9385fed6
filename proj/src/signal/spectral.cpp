#include "brainage/spectral.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "brainage/error.hpp"
#include "brainage/fft.hpp"

namespace brainage::spectral {

Psd welch(std::span<const double> x, double rate_hz, const WelchParams& params) {
  require(!x.empty(), ErrorCode::kLength, "welch: empty signal");
  require(rate_hz > 0, ErrorCode::kParameter, "welch: rate must be positive");
  const std::size_t seg = std::min(params.segment, x.size());
  const std::size_t nfft = std::max(seg, params.nfft);
  const std::size_t step = std::max<std::size_t>(1, seg - static_cast<std::size_t>(std::floor(seg * params.overlap)));
  const std::size_t bins = nfft / 2 + 1;

  std::vector<double> window(seg);
  double window_power = 0.0;
  for (std::size_t i = 0; i < seg; ++i) {
    // Periodic Hann, as used for spectral estimation.
    window[i] = seg == 1 ? 1.0 : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(seg));
    window_power += window[i] * window[i];
  }

  Psd psd;
  psd.freqs.resize(bins);
  psd.power.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) psd.freqs[k] = k * rate_hz / static_cast<double>(nfft);

  std::vector<double> buf(nfft, 0.0);
  std::vector<std::complex<double>> spec;
  std::size_t n_segments = 0;
  for (std::size_t start = 0; start + seg <= x.size(); start += step) {
    double mean = 0.0;
    for (std::size_t i = 0; i < seg; ++i) mean += x[start + i];
    mean /= static_cast<double>(seg);
    for (std::size_t i = 0; i < seg; ++i) buf[i] = (x[start + i] - mean) * window[i];
    fft::forward(buf, spec);
    for (std::size_t k = 0; k < bins; ++k) psd.power[k] += std::norm(spec[k]);
    ++n_segments;
  }

  const double scale = 1.0 / (rate_hz * window_power * static_cast<double>(n_segments));
  for (std::size_t k = 0; k < bins; ++k) {
    double p = psd.power[k] * scale;
    const bool nyquist = (nfft % 2 == 0) && k == bins - 1;
    if (k != 0 && !nyquist) p *= 2.0;
    psd.power[k] = p;
  }
  return psd;
}

double integrate_band(const Psd& psd, double lo_hz, double hi_hz) {
  if (psd.freqs.size() < 2) return 0.0;
  const double df = psd.freqs[1] - psd.freqs[0];
  double total = 0.0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] >= lo_hz && psd.freqs[k] < hi_hz) total += psd.power[k];
  }
  return total * df;
}

}  // namespace brainage::spectral
