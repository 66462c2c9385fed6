#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "brainage/recording.hpp"

namespace brainage::signal {

inline constexpr double kTargetRateHz = 250.0;
inline constexpr double kPreprocessLowHz = 0.5;
inline constexpr double kPreprocessHighHz = 50.0;
inline constexpr int kFilterOrder = 4;

// FFT resampling to a lower (or equal) rate. The spectrum is truncated at the
// new Nyquist frequency, which acts as the anti-alias low-pass.
Recording resample(const Recording& rec, double target_rate_hz);
std::vector<double> resample(std::span<const double> x, std::size_t out_len);

// Butterworth band-pass applied forward and backward.
Recording bandpass_zero_phase(const Recording& rec, double lo_hz, double hi_hz, int order = kFilterOrder);
std::vector<double> bandpass_zero_phase(std::span<const double> x, double rate_hz, double lo_hz, double hi_hz,
                                        int order = kFilterOrder);

// Contiguous, non-overlapping epochs from sample 0; the remainder is dropped.
EpochSet epoch(const Recording& rec, double duration_s);

struct RansacParams {
  double sample_fraction = 0.25;
  int repetitions = 50;
  double min_correlation = 0.75;
  double epoch_s = 1.0;
  double max_bad_fraction = 0.40;
  int n_neighbors = 4;
  std::uint64_t seed = 0;
};

// Names of channels flagged as bad, sorted. Channels are processed in sorted
// name order so that the result does not depend on row order.
std::vector<std::string> ransac_reject(const Recording& rec, const Montage& montage, const RansacParams& params);

inline constexpr int kDefaultMaxRejected = 30;
bool exclude_recording(std::size_t n_rejected, int max_rejected = kDefaultMaxRejected);

// Replaces the listed channels with an inverse-distance weighted average of
// their nearest good neighbours on the sphere.
Recording interpolate_channels(const Recording& rec, const Montage& montage, const std::vector<std::string>& bad,
                               int n_neighbors = 4);

// One output channel per region: the sample-wise mean of its members.
Recording combine_regions(const Recording& rec, const RegionMap& map);

// Channels whose corpus-wide rejection frequency exceeds `threshold`.
std::vector<std::string> global_drop(const std::map<std::string, std::size_t>& rejection_counts,
                                     std::size_t n_recordings, double threshold = 0.125);

// Inverse-distance weights of the nearest `k` candidates to `target`, by great-circle distance.
struct Neighbour {
  std::size_t index;
  double weight;
};
std::vector<Neighbour> idw_neighbours(const Montage& montage, std::size_t target,
                                      std::span<const std::size_t> candidates, int k);

}  // namespace brainage::signal
