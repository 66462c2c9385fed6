#include <algorithm>
#include <cmath>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/rng.hpp"
#include "brainage/signal.hpp"

namespace brainage::signal {

namespace {

double median(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<std::string> ransac_reject(const Recording& rec, const Montage& montage, const RansacParams& params) {
  const std::size_t n = rec.n_channels();
  require(n >= 8, ErrorCode::kInsufficientChannels,
          "RANSAC needs at least 8 channels, got " + std::to_string(n));
  require(params.sample_fraction > 0.0 && params.sample_fraction < 1.0, ErrorCode::kParameter,
          "RANSAC sample fraction must be in (0, 1)");
  require(params.repetitions >= 1, ErrorCode::kParameter, "RANSAC needs at least one repetition");

  // Canonical (name-sorted) channel order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return rec.channel_names[a] < rec.channel_names[b]; });

  std::vector<Eigen::Vector3d> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = montage.positions[montage.index_of(rec.channel_names[order[i]])];
  Eigen::MatrixXd angle(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) angle(i, j) = std::acos(std::clamp(pos[i].dot(pos[j]), -1.0, 1.0));
  }

  const auto n_sampled = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.sample_fraction * static_cast<double>(n))));
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(params.n_neighbors, 1)), n_sampled);

  const EpochSet epochs = epoch(rec, params.epoch_s);
  std::vector<std::size_t> bad_epochs(n, 0);
  std::vector<std::vector<double>> corr(n);
  std::vector<char> is_sampled(n);
  std::vector<std::pair<double, std::size_t>> cand;

  for (std::size_t e = 0; e < epochs.epochs.size(); ++e) {
    const SignalMatrix& ep = epochs.epochs[e];
    Eigen::MatrixXd centered(n, ep.cols());
    for (std::size_t i = 0; i < n; ++i) {
      auto row = ep.row(static_cast<Eigen::Index>(order[i]));
      centered.row(static_cast<Eigen::Index>(i)) = row.array() - row.mean();
    }
    const Eigen::MatrixXd cov = centered * centered.transpose();

    Rng rng(derive_seed(params.seed, e));
    for (auto& c : corr) c.clear();
    for (int r = 0; r < params.repetitions; ++r) {
      const auto sampled = rng.sample_without_replacement(n, n_sampled);
      std::fill(is_sampled.begin(), is_sampled.end(), 0);
      for (auto s : sampled) is_sampled[s] = 1;
      for (std::size_t j = 0; j < n; ++j) {
        if (is_sampled[j]) continue;
        cand.clear();
        for (auto s : sampled) cand.emplace_back(angle(j, s), s);
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        double num = 0.0, var_pred = 0.0;
        if (cand[0].first <= 1e-12) {
          const std::size_t s = cand[0].second;
          num = cov(j, s);
          var_pred = cov(s, s);
        } else {
          double wsum = 0.0;
          for (std::size_t a = 0; a < k; ++a) wsum += 1.0 / cand[a].first;
          for (std::size_t a = 0; a < k; ++a) {
            const double wa = 1.0 / cand[a].first / wsum;
            num += wa * cov(j, cand[a].second);
            for (std::size_t b = 0; b < k; ++b) {
              var_pred += wa * (1.0 / cand[b].first / wsum) * cov(cand[a].second, cand[b].second);
            }
          }
        }
        const double var_j = cov(j, j);
        double rho;
        if (var_j <= 0.0 && var_pred <= 0.0) {
          rho = 1.0;
        } else if (var_j <= 0.0 || var_pred <= 0.0) {
          rho = 0.0;
        } else {
          rho = num / std::sqrt(var_j * var_pred);
        }
        corr[j].push_back(rho);
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (corr[j].empty()) continue;
      if (median(corr[j]) < params.min_correlation) ++bad_epochs[j];
    }
  }

  std::vector<std::string> rejected;
  const double n_epochs = static_cast<double>(epochs.epochs.size());
  for (std::size_t j = 0; j < n; ++j) {
    if (static_cast<double>(bad_epochs[j]) / n_epochs > params.max_bad_fraction) {
      rejected.push_back(rec.channel_names[order[j]]);
    }
  }
  return rejected;  // already in sorted name order
}

}  // namespace brainage::signal
