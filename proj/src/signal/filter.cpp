#include "brainage/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "brainage/error.hpp"

namespace brainage::filter {

using cd = std::complex<double>;

Sos butter_bandpass(int order, double lo_hz, double hi_hz, double rate_hz) {
  require(order >= 1, ErrorCode::kParameter, "filter order must be >= 1");
  require(rate_hz > 0, ErrorCode::kParameter, "sampling rate must be positive");
  require(lo_hz > 0 && lo_hz < hi_hz && hi_hz < rate_hz / 2, ErrorCode::kParameter,
          "band edges must satisfy 0 < lo < hi < rate/2");
  const double pi = std::numbers::pi;
  const double fs2 = 2.0 * rate_hz;
  const double wl = fs2 * std::tan(pi * lo_hz / rate_hz);
  const double wh = fs2 * std::tan(pi * hi_hz / rate_hz);
  const double bw = wh - wl;
  const double w0 = std::sqrt(wl * wh);

  // Analog low-pass prototype poles, then low-pass -> band-pass.
  std::vector<cd> poles;
  for (int k = 1; k <= order; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + order - 1) / (2.0 * order));
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0 * w0);
    poles.push_back(half + root);
    poles.push_back(half - root);
  }
  // Band-pass has `order` zeros at s = 0; the rest sit at infinity.
  double gain = std::pow(bw, order);

  // Bilinear transform.
  cd num = std::pow(cd(fs2, 0.0), order);  // prod(fs2 - z) for z = 0
  cd den(1.0, 0.0);
  std::vector<cd> zpoles;
  for (const cd& p : poles) {
    den *= (fs2 - p);
    zpoles.push_back((fs2 + p) / (fs2 - p));
  }
  gain *= (num / den).real();

  // Each section gets one zero at z = 1 and one at z = -1 plus a conjugate pole pair.
  Sos sos;
  for (const cd& p : zpoles) {
    if (p.imag() <= 0.0) continue;
    Biquad q;
    q.b = {1.0, 0.0, -1.0};
    q.a = {1.0, -2.0 * p.real(), std::norm(p)};
    sos.push_back(q);
  }
  require(static_cast<int>(sos.size()) == order, ErrorCode::kParameter,
          "band-pass design produced real poles; band too wide for this order");
  // Sections ordered by pole radius, farthest from the unit circle first.
  std::sort(sos.begin(), sos.end(), [](const Biquad& x, const Biquad& y) { return x.a[2] < y.a[2]; });
  for (auto& c : sos[0].b) c *= gain;
  return sos;
}

double magnitude(const Sos& sos, double f_hz, double rate_hz) {
  const cd z = std::polar(1.0, 2.0 * std::numbers::pi * f_hz / rate_hz);
  const cd zi = 1.0 / z;
  cd h(1.0, 0.0);
  for (const auto& s : sos) {
    h *= (s.b[0] + s.b[1] * zi + s.b[2] * zi * zi) / (s.a[0] + s.a[1] * zi + s.a[2] * zi * zi);
  }
  return std::abs(h);
}

namespace {

// Steady-state state of a transposed direct-form II biquad for unit step input.
std::array<double, 2> biquad_zi(const Biquad& s) {
  const double a1 = s.a[1], a2 = s.a[2];
  const double b0 = s.b[0];
  const double B0 = s.b[1] - a1 * b0;
  const double B1 = s.b[2] - a2 * b0;
  // [[1 + a1, -1], [a2, 1]] * zi = [B0, B1]
  const double det = (1.0 + a1) + a2;
  const double z0 = (B0 + B1) / det;
  const double z1 = B1 - a2 * z0;
  return {z0, z1};
}

std::vector<std::array<double, 2>> sos_zi(const Sos& sos) {
  std::vector<std::array<double, 2>> zi(sos.size());
  double scale = 1.0;
  for (std::size_t i = 0; i < sos.size(); ++i) {
    auto z = biquad_zi(sos[i]);
    zi[i] = {z[0] * scale, z[1] * scale};
    const auto& s = sos[i];
    scale *= (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
  }
  return zi;
}

void run(const Sos& sos, std::vector<std::array<double, 2>> state, std::vector<double>& y) {
  for (std::size_t si = 0; si < sos.size(); ++si) {
    const auto& s = sos[si];
    double z0 = state[si][0], z1 = state[si][1];
    for (double& v : y) {
      const double in = v;
      const double out = s.b[0] * in + z0;
      z0 = s.b[1] * in - s.a[1] * out + z1;
      z1 = s.b[2] * in - s.a[2] * out;
      v = out;
    }
  }
}

std::vector<std::array<double, 2>> scaled(const std::vector<std::array<double, 2>>& zi, double x0) {
  auto out = zi;
  for (auto& z : out) {
    z[0] *= x0;
    z[1] *= x0;
  }
  return out;
}

}  // namespace

std::vector<double> sosfilt(const Sos& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) return y;
  run(sos, scaled(sos_zi(sos), x[0]), y);
  return y;
}

std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x) {
  const std::size_t padlen = 3 * (2 * sos.size() + 1);
  require(x.size() > padlen, ErrorCode::kLength,
          "signal of " + std::to_string(x.size()) + " samples is too short for zero-phase filtering (needs > " +
              std::to_string(padlen) + ")");
  const std::size_t n = x.size();
  std::vector<double> ext(n + 2 * padlen);
  for (std::size_t i = 0; i < padlen; ++i) ext[i] = 2.0 * x[0] - x[padlen - i];
  std::copy(x.begin(), x.end(), ext.begin() + padlen);
  for (std::size_t i = 0; i < padlen; ++i) ext[padlen + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const auto zi = sos_zi(sos);
  run(sos, scaled(zi, ext.front()), ext);
  std::reverse(ext.begin(), ext.end());
  run(sos, scaled(zi, ext.front()), ext);
  std::reverse(ext.begin(), ext.end());
  return std::vector<double>(ext.begin() + padlen, ext.begin() + padlen + n);
}

}  // namespace brainage::filter
