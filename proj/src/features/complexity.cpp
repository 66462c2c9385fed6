#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/features.hpp"

namespace brainage::features {

namespace {

// Least-squares slope of y on x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
}

}  // namespace

double higuchi_fd(std::span<const double> x, int kmax) {
  require(kmax >= 2, ErrorCode::kParameter, "higuchi kmax must be at least 2");
  const std::size_t n = x.size();
  require(n > static_cast<std::size_t>(2 * kmax), ErrorCode::kLength, "signal too short for higuchi fd");
  std::vector<double> lk, ll;
  for (int k = 1; k <= kmax; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    double total = 0.0;
    for (std::size_t m = 0; m < ku; ++m) {
      const std::size_t steps = (n - m - 1) / ku;
      if (steps == 0) continue;
      double len = 0.0;
      for (std::size_t i = 1; i <= steps; ++i) len += std::abs(x[m + i * ku] - x[m + (i - 1) * ku]);
      total += len * static_cast<double>(n - 1) / (static_cast<double>(steps * ku) * k);
    }
    const double mean_len = total / k;
    if (mean_len <= 0.0) return 0.0;
    lk.push_back(std::log(1.0 / k));
    ll.push_back(std::log(mean_len));
  }
  return slope(lk, ll);
}

double svd_fisher_info(std::span<const double> x, int dim, int tau) {
  require(dim >= 2 && tau >= 1, ErrorCode::kParameter, "invalid embedding for fisher information");
  const std::size_t span = static_cast<std::size_t>((dim - 1) * tau);
  require(x.size() > span + static_cast<std::size_t>(dim), ErrorCode::kLength,
          "signal too short for the fisher embedding");
  const std::size_t rows = x.size() - span;
  // Singular values of the embedding matrix via its Gram matrix.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    for (int a = 0; a < dim; ++a) {
      const double va = x[i + static_cast<std::size_t>(a * tau)];
      for (int b = a; b < dim; ++b) gram(a, b) += va * x[i + static_cast<std::size_t>(b * tau)];
    }
  }
  gram = gram.selfadjointView<Eigen::Upper>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  std::vector<double> s(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) s[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  std::sort(s.begin(), s.end(), std::greater<>());
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  if (total <= 0.0) return 0.0;
  for (double& v : s) v /= total;
  double fisher = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] <= 1e-12) break;
    fisher += (s[i + 1] - s[i]) * (s[i + 1] - s[i]) / s[i];
  }
  return fisher;
}

double hurst_exponent(std::span<const double> x, int min_windows) {
  const std::size_t n = x.size();
  require(n >= 64, ErrorCode::kLength, "signal too short for the hurst exponent");
  const double w_min = 16.0;
  const double w_max = static_cast<double>(n) / 2.0;
  const int count = std::max(min_windows, static_cast<int>(std::ceil(2.0 * std::log2(w_max / w_min))));
  std::vector<std::size_t> windows;
  for (int i = 0; i < count; ++i) {
    const double w = w_min * std::pow(w_max / w_min, static_cast<double>(i) / (count - 1));
    const auto wi = static_cast<std::size_t>(std::lround(w));
    if (windows.empty() || wi != windows.back()) windows.push_back(wi);
  }
  std::vector<double> lw, lrs;
  std::vector<double> cum;
  for (std::size_t w : windows) {
    double rs_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t start = 0; start + w <= n; start += w) {
      double mean = 0.0;
      for (std::size_t i = 0; i < w; ++i) mean += x[start + i];
      mean /= static_cast<double>(w);
      double c = 0.0, lo = 0.0, hi = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < w; ++i) {
        const double d = x[start + i] - mean;
        c += d;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(w));
      if (sd <= 0.0) continue;
      rs_sum += (hi - lo) / sd;
      ++used;
    }
    if (used == 0 || rs_sum <= 0.0) continue;
    lw.push_back(std::log(static_cast<double>(w)));
    lrs.push_back(std::log(rs_sum / static_cast<double>(used)));
  }
  if (lw.size() < 2) return 0.0;
  return slope(lw, lrs);
}

Values<4> complexity_features(std::span<const double> x, double rate_hz, const Params& params) {
  require(x.size() >= 256, ErrorCode::kLength, "complexity features need at least 256 samples");
  Values<4> out;
  if (is_constant(x)) {
    out.degenerate = true;
    return out;
  }
  out.v[0] = higuchi_fd(x, params.higuchi_kmax);
  out.v[1] = spectral_hjorth_complexity(x, rate_hz, params);
  out.v[2] = svd_fisher_info(x, params.fisher_dim, params.fisher_tau);
  out.v[3] = hurst_exponent(x, params.hurst_min_windows);
  return out;
}

}  // namespace brainage::features
