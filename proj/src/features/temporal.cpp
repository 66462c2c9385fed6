#include <algorithm>
#include <cmath>

#include "brainage/error.hpp"
#include "brainage/features.hpp"

namespace brainage::features {

namespace {

double variance(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / static_cast<double>(x.size());
}

std::vector<double> diff(std::span<const double> x) {
  std::vector<double> d(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  return d;
}

}  // namespace

double zero_crossings(std::span<const double> x) {
  // Samples within a tiny amplitude-relative tolerance of zero are zeros.
  // Entering a zero and a direct sign flip each count once, as does starting
  // at zero.
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const double tol = 1e-12 * peak;
  auto sign = [tol](double v) { return std::abs(v) <= tol ? 0 : (v > 0 ? 1 : -1); };
  if (x.empty() || peak == 0.0) return 0.0;
  double count = sign(x[0]) == 0 ? 1.0 : 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const int a = sign(x[i - 1]);
    const int b = sign(x[i]);
    if (b == 0 && a != 0) count += 1.0;
    if (a * b < 0) count += 1.0;
  }
  return count;
}

double hjorth_complexity(std::span<const double> x) {
  if (x.size() < 3) return 0.0;
  const auto dx = diff(x);
  const auto ddx = diff(dx);
  const double v0 = variance(x), v1 = variance(dx), v2 = variance(ddx);
  if (v0 <= 0.0 || v1 <= 0.0) return 0.0;
  const double mob_x = std::sqrt(v1 / v0);
  const double mob_dx = std::sqrt(v2 / v1);
  return mob_dx / mob_x;
}

Values<8> temporal_features(std::span<const double> x) {
  require(x.size() >= 3, ErrorCode::kLength, "temporal features need at least 3 samples");
  Values<8> out;
  const double n = static_cast<double>(x.size());
  double mean = 0.0, lo = x[0], hi = x[0], line = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean += x[i];
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
    if (i > 0) line += std::abs(x[i] - x[i - 1]);
  }
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  out.v[0] = mean;
  out.v[1] = std::sqrt(m2);
  out.v[2] = hi - lo;
  out.v[3] = line;
  out.v[4] = zero_crossings(x);
  // Spread below rounding noise of the mean counts as constant.
  if (m2 <= 1e-24 * std::max(1.0, mean * mean)) {
    out.degenerate = true;
    out.v[1] = m2 > 0.0 ? out.v[1] : 0.0;
    return out;
  }
  out.v[5] = m3 / std::pow(m2, 1.5);
  out.v[6] = m4 / (m2 * m2);
  out.v[7] = hjorth_complexity(x);
  return out;
}

std::array<double, 4> quantiles(std::span<const double> x) {
  require(!x.empty(), ErrorCode::kLength, "quantiles of an empty signal");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const std::array<double, 4> q{0.05, 0.25, 0.75, 0.95};
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double pos = q[i] * static_cast<double>(s.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(k);
    out[i] = k + 1 < s.size() ? s[k] + frac * (s[k + 1] - s[k]) : s[k];
  }
  return out;
}

}  // namespace brainage::features
