#include "brainage/error.hpp"
#include "brainage/features.hpp"
#include "brainage/parallel.hpp"
#include "brainage/signal.hpp"

namespace brainage::features {

namespace {

constexpr std::size_t kPerBand = 25;
constexpr std::size_t kPowIndex = 12;
constexpr std::size_t kWaveletIndex = 13;

// Per-band measures of one epoch; the two band-indexed slots are left for
// the caller. Returns the number of degenerate sub-results.
int fill_band_measures(std::span<const double> x, double rate_hz, const BandSpec& band, const Params& params,
                       double* out) {
  int degenerate = 0;
  const auto t = temporal_features(x);
  degenerate += t.degenerate;
  for (std::size_t i = 0; i < 8; ++i) out[i] = t.v[i];
  if (t.degenerate) {
    for (std::size_t i = 8; i < kPerBand; ++i) out[i] = 0.0;
    const auto q = quantiles(x);
    for (std::size_t i = 0; i < 4; ++i) out[15 + i] = q[i];
    return degenerate;
  }
  const auto reg = psd_regression(x, rate_hz, band.lo_hz, band.hi_hz, params);
  degenerate += reg.degenerate;
  for (std::size_t i = 0; i < 4; ++i) out[8 + i] = reg.v[i];
  const auto c = complexity_features(x, rate_hz, params);
  degenerate += c.degenerate;
  out[14] = c.v[1];
  const auto q = quantiles(x);
  for (std::size_t i = 0; i < 4; ++i) out[15 + i] = q[i];
  out[19] = c.v[0];
  const auto e = entropy_features(x, rate_hz, params);
  degenerate += e.degenerate;
  out[20] = e.v[0];
  out[21] = e.v[1];
  out[22] = e.v[2];
  out[23] = c.v[2];
  out[24] = c.v[3];
  return degenerate;
}

}  // namespace

std::vector<double> epoch_band_features(std::span<const double> band_epoch, std::span<const double> omega_epoch,
                                        double rate_hz, Band band, const Params& params) {
  std::vector<double> out(kPerBand, 0.0);
  fill_band_measures(band_epoch, rate_hz, band_spec(band), params, out.data());
  const auto b = static_cast<std::size_t>(band);
  out[kPowIndex] = band_powers(omega_epoch, rate_hz, params)[b];
  out[kWaveletIndex] = wavelet_energies(omega_epoch, rate_hz)[b];
  return out;
}

RecordingFeatures extract_recording(const Recording& rec, const Params& params, int workers) {
  rec.validate();
  if (band_columns().size() != kPerBand) fail(ErrorCode::kSchema, "catalogue layout mismatch");
  const double duration = epoch_duration(rec.state, params);

  std::vector<EpochSet> per_band;
  per_band.reserve(kBands.size());
  for (const auto& b : kBands) {
    per_band.push_back(signal::epoch(signal::bandpass_zero_phase(rec, b.lo_hz, b.hi_hz), duration));
  }
  const EpochSet& omega = per_band.back();
  const std::size_t n_epochs = omega.epochs.size();
  const std::size_t n_ch = rec.n_channels();
  const std::size_t width = kBands.size() * kPerBand;

  RecordingFeatures out;
  out.subject_id = rec.subject_id;
  out.age_years = rec.age_years;
  out.state = rec.state;
  out.channel_names = rec.channel_names;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_ch), static_cast<Eigen::Index>(width));
  out.n_epochs = n_epochs;

  std::vector<std::size_t> degenerate(n_ch, 0);
  parallel_for(n_ch, workers, [&](std::size_t ch) {
    std::vector<double> sum(width, 0.0), cur(width, 0.0);
    const auto row = static_cast<Eigen::Index>(ch);
    for (std::size_t e = 0; e < n_epochs; ++e) {
      const auto& om = omega.epochs[e];
      std::span<const double> om_x(om.row(row).data(), static_cast<std::size_t>(om.cols()));
      const auto powers = band_powers(om_x, rec.sampling_rate_hz, params);
      const auto wavelets = wavelet_energies(om_x, rec.sampling_rate_hz);
      for (std::size_t b = 0; b < kBands.size(); ++b) {
        const auto& ep = per_band[b].epochs[e];
        std::span<const double> x(ep.row(row).data(), static_cast<std::size_t>(ep.cols()));
        double* slot = cur.data() + b * kPerBand;
        degenerate[ch] += static_cast<std::size_t>(fill_band_measures(x, rec.sampling_rate_hz, kBands[b], params, slot));
        slot[kPowIndex] = powers[b];
        slot[kWaveletIndex] = wavelets[b];
      }
      for (std::size_t i = 0; i < width; ++i) sum[i] += cur[i];
    }
    for (std::size_t i = 0; i < width; ++i) {
      out.values(row, static_cast<Eigen::Index>(i)) = sum[i] / static_cast<double>(n_epochs);
    }
  });
  for (auto d : degenerate) out.n_degenerate += d;
  return out;
}

}  // namespace brainage::features
