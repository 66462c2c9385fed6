#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brainage/recording.hpp"

namespace brainage::features {

enum class Band { kDelta, kTheta, kAlpha, kBeta, kOmega };

struct BandSpec {
  Band band;
  std::string_view name;
  double lo_hz;
  double hi_hz;
};

inline constexpr std::array<BandSpec, 5> kBands{{
    {Band::kDelta, "delta", 0.5, 4.0},
    {Band::kTheta, "theta", 4.0, 7.0},
    {Band::kAlpha, "alpha", 7.0, 14.0},
    {Band::kBeta, "beta", 14.0, 30.0},
    {Band::kOmega, "omega", 0.5, 30.0},
}};

const BandSpec& band_spec(Band band);
Band parse_band(std::string_view name);  // throws kParameter

// The 19 catalogue measures. Multi-valued measures expand into named
// components; band-indexed measures are computed once on the omega signal
// and report one component per band.
struct Measure {
  std::string_view name;
  std::vector<std::string_view> components;  // empty = scalar
  bool band_indexed = false;
};

const std::vector<Measure>& catalogue();

// One column of a recording's feature block: the column name suffix is
// `measure` or `measure_component`.
struct MeasureColumn {
  std::string_view measure;
  std::string_view component;
  std::string column_name() const;
};

// Per-band column layout, identical for every band (25 columns).
const std::vector<MeasureColumn>& band_columns();

struct Params {
  double epoch_eo_s = 2.0;
  double epoch_ec_s = 4.0;
  std::size_t welch_segment = 256;
  std::size_t regression_nfft = 1024;
  int entropy_m = 2;
  double entropy_r = 0.2;  // fraction of the standard deviation
  int higuchi_kmax = 10;
  int fisher_dim = 10;
  int fisher_tau = 2;
  int hurst_min_windows = 8;
};

template <std::size_t N>
struct Values {
  std::array<double, N> v{};
  bool degenerate = false;
};

// mean, std, ptp_amp, line_length, zero_crossings, skewness, kurtosis, hjorth_complexity
Values<8> temporal_features(std::span<const double> x);
double zero_crossings(std::span<const double> x);
double hjorth_complexity(std::span<const double> x);

// intercept, slope, mse, r2 of log10(power) against log10(frequency) in [lo, hi).
Values<4> psd_regression(std::span<const double> x, double rate_hz, double lo_hz, double hi_hz,
                         const Params& params = {});

// Welch power per band (delta, theta, alpha, beta, omega).
std::array<double, 5> band_powers(std::span<const double> x, double rate_hz, const Params& params = {});

// Daubechies-4 decomposition; energies of the detail levels d1..d<levels>
// followed by the final approximation.
std::vector<double> wavelet_level_energies(std::span<const double> x, int levels = 5);
// Level energies summed into (delta, theta, alpha, beta, omega) by the
// dyadic frequency range of each level; omega is the total energy.
std::array<double, 5> wavelet_energies(std::span<const double> x, double rate_hz, int levels = 5);

double sample_entropy(std::span<const double> x, int m = 2, double r_fraction = 0.2);
double approximate_entropy(std::span<const double> x, int m = 2, double r_fraction = 0.2);
double spectral_entropy(std::span<const double> x, double rate_hz, const Params& params = {});
// sample entropy, approximate entropy, spectral entropy
Values<3> entropy_features(std::span<const double> x, double rate_hz, const Params& params = {});

double higuchi_fd(std::span<const double> x, int kmax = 10);
double spectral_hjorth_complexity(std::span<const double> x, double rate_hz, const Params& params = {});
double svd_fisher_info(std::span<const double> x, int dim = 10, int tau = 2);
double hurst_exponent(std::span<const double> x, int min_windows = 8);
// higuchi_fd, hjorth_complexity_spect, svd_fisher_info, hurst_exp
Values<4> complexity_features(std::span<const double> x, double rate_hz, const Params& params = {});

// Linear-interpolation quantiles at 5, 25, 75 and 95 percent.
std::array<double, 4> quantiles(std::span<const double> x);

// Feature block of one recording: rows are channels, columns follow
// band-major order (band, then band_columns()).
struct RecordingFeatures {
  std::string subject_id;
  std::optional<double> age_years;
  State state = State::kEyesClosed;
  std::vector<std::string> channel_names;
  Eigen::MatrixXd values;  // [n_channels x 5*band_columns().size()]
  std::size_t n_epochs = 0;
  std::size_t n_degenerate = 0;
};

double epoch_duration(State state, const Params& params = {});

// Band-pass per band, epoch, compute per-epoch measures and average them.
RecordingFeatures extract_recording(const Recording& rec, const Params& params = {}, int workers = 1);

// Per-epoch values of one channel already filtered to `band`; `omega` is the
// same channel filtered to the omega band (for the band-indexed measures).
std::vector<double> epoch_band_features(std::span<const double> band_epoch, std::span<const double> omega_epoch,
                                        double rate_hz, Band band, const Params& params);

}  // namespace brainage::features
