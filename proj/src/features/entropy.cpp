#include <algorithm>
#include <cmath>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/features.hpp"

namespace brainage::features {

namespace {

double pop_std(std::span<const double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return std::sqrt(s / static_cast<double>(x.size()));
}

// For the first `n_templates` embedding vectors of length `dim`, the number
// of other templates within Chebyshev distance r. Templates are visited in
// order of their first coordinate so only a narrow window is compared.
std::vector<std::size_t> match_counts(std::span<const double> x, int dim, std::size_t n_templates, double r) {
  std::vector<std::size_t> order(n_templates);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<std::size_t> counts(n_templates, 0);
  for (std::size_t p = 0; p < n_templates; ++p) {
    const std::size_t i = order[p];
    for (std::size_t q = p + 1; q < n_templates; ++q) {
      const std::size_t j = order[q];
      if (x[j] - x[i] > r) break;
      bool match = true;
      for (int k = 1; k < dim; ++k) {
        if (std::abs(x[i + k] - x[j + k]) > r) {
          match = false;
          break;
        }
      }
      if (match) {
        ++counts[i];
        ++counts[j];
      }
    }
  }
  return counts;
}

// Sample and approximate entropy share their match counts: dimension m over
// all N-m+1 templates and dimension m+1 over N-m templates. Sample entropy
// uses the first N-m templates of dimension m, so pairs with the last
// template are removed.
std::pair<double, double> both_entropies(std::span<const double> x, int m, double r_fraction) {
  require(m >= 1, ErrorCode::kParameter, "entropy embedding must be positive");
  require(x.size() > static_cast<std::size_t>(m) + 1, ErrorCode::kLength, "signal too short for entropy");
  const double sd = pop_std(x);
  if (sd <= 0.0) return {0.0, 0.0};
  const double r = r_fraction * sd;
  const std::size_t nm = x.size() - static_cast<std::size_t>(m) + 1;
  const auto cm = match_counts(x, m, nm, r);
  const auto cm1 = match_counts(x, m + 1, nm - 1, r);

  auto phi = [](const std::vector<std::size_t>& c) {
    double s = 0.0;
    const auto n = static_cast<double>(c.size());
    for (std::size_t v : c) s += std::log(static_cast<double>(v + 1) / n);  // self-match included
    return s / n;
  };
  const double apen = phi(cm) - phi(cm1);

  const double b = std::accumulate(cm.begin(), cm.end(), 0.0) - 2.0 * static_cast<double>(cm.back());
  double a = std::accumulate(cm1.begin(), cm1.end(), 0.0);
  if (b <= 0.0) return {0.0, apen};
  // No m+1 matches: use one match, the largest finite value.
  if (a <= 0.0) a = 2.0;
  return {-std::log(a / b), apen};
}

}  // namespace

double sample_entropy(std::span<const double> x, int m, double r_fraction) {
  return both_entropies(x, m, r_fraction).first;
}

double approximate_entropy(std::span<const double> x, int m, double r_fraction) {
  return both_entropies(x, m, r_fraction).second;
}

Values<3> entropy_features(std::span<const double> x, double rate_hz, const Params& params) {
  require(x.size() >= 100, ErrorCode::kLength, "entropy features need at least 100 samples");
  Values<3> out;
  out.degenerate = pop_std(x) <= 0.0;
  const auto [samp, ap] = both_entropies(x, params.entropy_m, params.entropy_r);
  out.v[0] = samp;
  out.v[1] = ap;
  out.v[2] = out.degenerate ? 0.0 : spectral_entropy(x, rate_hz, params);
  return out;
}

}  // namespace brainage::features
