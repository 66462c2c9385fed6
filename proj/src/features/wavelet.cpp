#include <algorithm>

#include "brainage/error.hpp"
#include "brainage/features.hpp"

namespace brainage::features {

namespace {

// Daubechies-4 (8 taps) decomposition low-pass filter.
constexpr std::array<double, 8> kLo{-0.010597401784997278, 0.032883011666982945, 0.030841381835986965,
                                    -0.18703481171888114,  -0.02798376941698385, 0.6308807679295904,
                                    0.7148465705525415,    0.23037781330885523};

// One periodized analysis step: approximation replaces `a`, the detail
// coefficients are returned.
std::vector<double> step(std::vector<double>& a) {
  const std::size_t n = a.size();
  const std::size_t half = n / 2;
  std::vector<double> lo(half, 0.0), hi(half, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    double sl = 0.0, sh = 0.0;
    for (std::size_t j = 0; j < kLo.size(); ++j) {
      const double v = a[(2 * k + j) % n];
      sl += kLo[j] * v;
      const double h = (j % 2 == 0 ? 1.0 : -1.0) * kLo[kLo.size() - 1 - j];
      sh += h * v;
    }
    lo[k] = sl;
    hi[k] = sh;
  }
  a = std::move(lo);
  return hi;
}

double energy(const std::vector<double>& c) {
  double s = 0.0;
  for (double v : c) s += v * v;
  return s;
}

}  // namespace

std::vector<double> wavelet_level_energies(std::span<const double> x, int levels) {
  require(levels >= 1, ErrorCode::kParameter, "wavelet levels must be positive");
  require(x.size() >= kLo.size(), ErrorCode::kLength, "signal shorter than the wavelet filter");
  // Zero-pad to a multiple of 2^levels so every level splits evenly; the
  // padded transform stays orthogonal, so energy is preserved.
  const std::size_t block = std::size_t{1} << levels;
  const std::size_t n = (x.size() + block - 1) / block * block;
  std::vector<double> a(n, 0.0);
  std::copy(x.begin(), x.end(), a.begin());
  std::vector<double> out;
  for (int l = 0; l < levels; ++l) out.push_back(energy(step(a)));
  out.push_back(energy(a));
  return out;
}

std::array<double, 5> wavelet_energies(std::span<const double> x, double rate_hz, int levels) {
  const auto e = wavelet_level_energies(x, levels);
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < e.size(); ++i) {
    // Detail level l (1-based) spans [rate/2^(l+1), rate/2^l]; the final
    // approximation spans [0, rate/2^(levels+1)].
    const bool approx = i + 1 == e.size();
    const double hi = approx ? rate_hz / static_cast<double>(std::size_t{2} << levels) : rate_hz / static_cast<double>(std::size_t{2} << i);
    const double lo = approx ? 0.0 : hi / 2.0;
    std::size_t best = kBands.size();
    double best_overlap = 0.0;
    for (std::size_t b = 0; b + 1 < kBands.size(); ++b) {
      const double ov = std::min(hi, kBands[b].hi_hz) - std::max(lo, kBands[b].lo_hz);
      if (ov > best_overlap) {
        best_overlap = ov;
        best = b;
      }
    }
    if (best < kBands.size()) out[best] += e[i];
    out[4] += e[i];
  }
  return out;
}

}  // namespace brainage::features
