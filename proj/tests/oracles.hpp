#pragma once

// Test-only reference computations. These deliberately avoid the library's
// own DSP and statistics code paths.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

inline std::vector<double> sine(double freq_hz, double rate_hz, std::size_t n, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate_hz + phase);
  }
  return x;
}

inline std::vector<double> white_noise(std::size_t n, unsigned seed, double sigma = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = d(gen);
  return x;
}

inline std::vector<double> brownian(std::size_t n, unsigned seed) {
  auto w = white_noise(n, seed);
  std::partial_sum(w.begin(), w.end(), w.begin());
  return w;
}

// Averaged periodogram via a direct DFT with a Hann taper; returns
// (frequency, power) pairs, one-sided, arbitrary scale.
inline std::vector<std::pair<double, double>> dft_psd(const std::vector<double>& x, double rate_hz, std::size_t seg) {
  std::vector<std::pair<double, double>> out(seg / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {k * rate_hz / seg, 0.0};
  std::vector<double> w(seg);
  for (std::size_t i = 0; i < seg; ++i) w[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / seg);
  std::vector<std::complex<double>> tw(seg);
  for (std::size_t i = 0; i < seg; ++i) tw[i] = std::polar(1.0, -2 * std::numbers::pi * i / seg);
  for (std::size_t start = 0; start + seg <= x.size(); start += seg / 2) {
    double mean = 0;
    for (std::size_t i = 0; i < seg; ++i) mean += x[start + i];
    mean /= seg;
    for (std::size_t k = 0; k < out.size(); ++k) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < seg; ++i) acc += (x[start + i] - mean) * w[i] * tw[(i * k) % seg];
      out[k].second += std::norm(acc) * ((k == 0 || k == seg / 2) ? 1.0 : 2.0);
    }
  }
  return out;
}

inline double rms(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s / x.size());
}

inline double mean(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Ranks with ties resolved to the average rank, by pairwise counting.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

}  // namespace oracle
