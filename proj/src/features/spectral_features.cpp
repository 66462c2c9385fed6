#include <cmath>

#include "brainage/error.hpp"
#include "brainage/features.hpp"
#include "brainage/spectral.hpp"

namespace brainage::features {

namespace {

spectral::Psd default_psd(std::span<const double> x, double rate_hz, const Params& params) {
  spectral::WelchParams wp;
  wp.segment = params.welch_segment;
  return spectral::welch(x, rate_hz, wp);
}

}  // namespace

Values<4> psd_regression(std::span<const double> x, double rate_hz, double lo_hz, double hi_hz,
                         const Params& params) {
  spectral::WelchParams wp;
  wp.segment = params.welch_segment;
  wp.nfft = params.regression_nfft;
  const auto psd = spectral::welch(x, rate_hz, wp);

  std::vector<double> lf, lp;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    const double f = psd.freqs[k];
    if (f < lo_hz || f >= hi_hz || f <= 0.0) continue;
    require(psd.power[k] > 0.0, ErrorCode::kUndefinedLog, "psd regression: zero power in band");
    lf.push_back(std::log10(f));
    lp.push_back(std::log10(psd.power[k]));
  }
  require(lf.size() >= 8, ErrorCode::kLength, "psd regression: fewer than 8 frequency bins in band");

  const double n = static_cast<double>(lf.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    mx += lf[i];
    my += lp[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    sxx += (lf[i] - mx) * (lf[i] - mx);
    sxy += (lf[i] - mx) * (lp[i] - my);
    syy += (lp[i] - my) * (lp[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    const double r = lp[i] - (intercept + slope * lf[i]);
    sse += r * r;
  }
  Values<4> out;
  out.v = {intercept, slope, sse / n, syy > 0.0 ? 1.0 - sse / syy : 0.0};
  out.degenerate = syy <= 0.0;
  return out;
}

std::array<double, 5> band_powers(std::span<const double> x, double rate_hz, const Params& params) {
  const auto psd = default_psd(x, rate_hz, params);
  std::array<double, 5> out{};
  for (std::size_t b = 0; b < kBands.size(); ++b) {
    out[b] = spectral::integrate_band(psd, kBands[b].lo_hz, kBands[b].hi_hz);
  }
  return out;
}

double spectral_entropy(std::span<const double> x, double rate_hz, const Params& params) {
  const auto psd = default_psd(x, rate_hz, params);
  double total = 0.0;
  for (double p : psd.power) total += p;
  if (total <= 0.0 || psd.power.size() < 2) return 0.0;
  double h = 0.0;
  for (double p : psd.power) {
    if (p <= 0.0) continue;
    const double q = p / total;
    h -= q * std::log(q);
  }
  return h / std::log(static_cast<double>(psd.power.size()));
}

double spectral_hjorth_complexity(std::span<const double> x, double rate_hz, const Params& params) {
  // Spectral moments m0, m2, m4 give mobility(x) = sqrt(m2/m0) and
  // mobility(dx) = sqrt(m4/m2).
  const auto psd = default_psd(x, rate_hz, params);
  double m0 = 0.0, m2 = 0.0, m4 = 0.0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    const double f2 = psd.freqs[k] * psd.freqs[k];
    m0 += psd.power[k];
    m2 += f2 * psd.power[k];
    m4 += f2 * f2 * psd.power[k];
  }
  if (m0 <= 0.0 || m2 <= 0.0) return 0.0;
  return std::sqrt(m4 * m0) / m2;
}

}  // namespace brainage::features
