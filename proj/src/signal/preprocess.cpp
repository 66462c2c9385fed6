#include <algorithm>
#include <cmath>
#include <complex>
#include <set>

#include "brainage/error.hpp"
#include "brainage/fft.hpp"
#include "brainage/filter.hpp"
#include "brainage/signal.hpp"

namespace brainage::signal {

std::vector<double> resample(std::span<const double> x, std::size_t out_len) {
  const std::size_t n = x.size();
  require(out_len > 0 && out_len <= n, ErrorCode::kUnsupportedUpsample, "resample only reduces length");
  if (out_len == n) return {x.begin(), x.end()};
  std::vector<std::complex<double>> spec;
  fft::forward(x, spec);
  std::vector<std::complex<double>> out(out_len / 2 + 1);
  const std::size_t keep = out_len / 2 + 1;
  for (std::size_t k = 0; k < keep; ++k) out[k] = spec[k];
  if (out_len % 2 == 0) out[out_len / 2] *= 2.0;  // both folded halves of the new Nyquist bin
  std::vector<double> y;
  fft::inverse(out, out_len, y);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : y) v *= scale;
  return y;
}

Recording resample(const Recording& rec, double target_rate_hz) {
  require(target_rate_hz > 0.0, ErrorCode::kParameter, "target rate must be positive");
  require(target_rate_hz <= rec.sampling_rate_hz, ErrorCode::kUnsupportedUpsample,
          "cannot resample " + std::to_string(rec.sampling_rate_hz) + " Hz up to " + std::to_string(target_rate_hz));
  if (target_rate_hz == rec.sampling_rate_hz) return rec;
  const auto out_len = static_cast<std::size_t>(
      std::floor(static_cast<double>(rec.n_samples()) * target_rate_hz / rec.sampling_rate_hz));
  require(out_len > 0, ErrorCode::kLength, "resampled recording would be empty");
  Recording out = rec;
  out.sampling_rate_hz = target_rate_hz;
  out.data.resize(rec.data.rows(), static_cast<Eigen::Index>(out_len));
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto y = resample(rec.channel(c), out_len);
    std::copy(y.begin(), y.end(), out.data.row(static_cast<Eigen::Index>(c)).data());
  }
  return out;
}

std::vector<double> bandpass_zero_phase(std::span<const double> x, double rate_hz, double lo_hz, double hi_hz,
                                        int order) {
  const auto sos = filter::butter_bandpass(order, lo_hz, hi_hz, rate_hz);
  return filter::sosfiltfilt(sos, x);
}

Recording bandpass_zero_phase(const Recording& rec, double lo_hz, double hi_hz, int order) {
  const auto sos = filter::butter_bandpass(order, lo_hz, hi_hz, rec.sampling_rate_hz);
  Recording out = rec;
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto y = filter::sosfiltfilt(sos, rec.channel(c));
    std::copy(y.begin(), y.end(), out.data.row(static_cast<Eigen::Index>(c)).data());
  }
  return out;
}

EpochSet epoch(const Recording& rec, double duration_s) {
  require(duration_s > 0.0, ErrorCode::kParameter, "epoch duration must be positive");
  const auto len = static_cast<std::size_t>(std::llround(duration_s * rec.sampling_rate_hz));
  require(len > 0, ErrorCode::kParameter, "epoch shorter than one sample");
  const std::size_t count = rec.n_samples() / len;
  require(count > 0, ErrorCode::kEmptyEpochs,
          "recording of " + std::to_string(rec.duration_s()) + " s is shorter than one " +
              std::to_string(duration_s) + " s epoch");
  EpochSet set;
  set.subject_id = rec.subject_id;
  set.age_years = rec.age_years;
  set.state = rec.state;
  set.sampling_rate_hz = rec.sampling_rate_hz;
  set.channel_names = rec.channel_names;
  set.epoch_duration_s = duration_s;
  set.epochs.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    set.epochs.emplace_back(rec.data.middleCols(static_cast<Eigen::Index>(e * len), static_cast<Eigen::Index>(len)));
  }
  return set;
}

bool exclude_recording(std::size_t n_rejected, int max_rejected) {
  return static_cast<long long>(n_rejected) > static_cast<long long>(max_rejected);
}

std::vector<Neighbour> idw_neighbours(const Montage& montage, std::size_t target,
                                      std::span<const std::size_t> candidates, int k) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(candidates.size());
  const auto& p = montage.positions[target];
  for (std::size_t c : candidates) {
    const double cosang = std::clamp(p.dot(montage.positions[c]), -1.0, 1.0);
    dist.emplace_back(std::acos(cosang), c);
  }
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<Neighbour> out;
  if (kk > 0 && dist[0].first <= 1e-12) {
    out.push_back({dist[0].second, 1.0});
    return out;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < kk; ++i) {
    const double w = 1.0 / dist[i].first;
    out.push_back({dist[i].second, w});
    total += w;
  }
  for (auto& n : out) n.weight /= total;
  return out;
}

Recording interpolate_channels(const Recording& rec, const Montage& montage, const std::vector<std::string>& bad,
                               int n_neighbors) {
  if (bad.empty()) return rec;
  const std::set<std::string> bad_set(bad.begin(), bad.end());
  // Row index in rec for every montage channel that is present and good.
  std::vector<std::size_t> good_montage;
  std::vector<std::size_t> montage_to_row(montage.channel_names.size(), SIZE_MAX);
  for (std::size_t r = 0; r < rec.n_channels(); ++r) {
    const std::size_t m = montage.index_of(rec.channel_names[r]);
    montage_to_row[m] = r;
    if (!bad_set.count(rec.channel_names[r])) good_montage.push_back(m);
  }
  require(!good_montage.empty(), ErrorCode::kInsufficientChannels, "no good channels left to interpolate from");
  Recording out = rec;
  for (const auto& name : bad) {
    const std::size_t row = rec.channel_index(name);
    const auto neigh = idw_neighbours(montage, montage.index_of(name), good_montage, n_neighbors);
    auto dst = out.data.row(static_cast<Eigen::Index>(row));
    dst.setZero();
    for (const auto& n : neigh) dst += n.weight * rec.data.row(static_cast<Eigen::Index>(montage_to_row[n.index]));
  }
  return out;
}

Recording combine_regions(const Recording& rec, const RegionMap& map) {
  map.validate();
  Recording out;
  out.subject_id = rec.subject_id;
  out.age_years = rec.age_years;
  out.state = rec.state;
  out.sampling_rate_hz = rec.sampling_rate_hz;
  out.data.resize(static_cast<Eigen::Index>(map.regions.size()), rec.data.cols());
  for (std::size_t r = 0; r < map.regions.size(); ++r) {
    const auto& region = map.regions[r];
    auto dst = out.data.row(static_cast<Eigen::Index>(r));
    dst.setZero();
    for (const auto& m : region.members) dst += rec.data.row(static_cast<Eigen::Index>(rec.channel_index(m)));
    if (region.members.size() > 1) dst /= static_cast<double>(region.members.size());
    out.channel_names.push_back(region.name);
  }
  return out;
}

std::vector<std::string> global_drop(const std::map<std::string, std::size_t>& rejection_counts,
                                     std::size_t n_recordings, double threshold) {
  std::vector<std::string> out;
  if (n_recordings == 0) return out;
  for (const auto& [name, count] : rejection_counts) {
    if (static_cast<double>(count) / static_cast<double>(n_recordings) > threshold) out.push_back(name);
  }
  return out;
}

}  // namespace brainage::signal
