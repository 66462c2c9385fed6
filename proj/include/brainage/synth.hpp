#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "brainage/features.hpp"
#include "brainage/recording.hpp"

namespace brainage::synth {

enum class Parameter { kAmplitude, kFrequency };

// An age dependence planted on one band. Amplitude effects scale the band's
// oscillator by 1 + direction * strength * (u - 0.5), u the age normalised
// to [0, 1]; frequency effects shift its centre by direction * strength *
// (u - 0.5) Hz. An amplitude effect on omega scales the 1/f background.
// Empty `regions` means every region.
struct Effect {
  features::Band band = features::Band::kAlpha;
  std::vector<std::string> regions;
  Parameter parameter = Parameter::kAmplitude;
  int direction = 1;
  double strength = 0.0;

  std::string describe() const;
};

// Delta and theta amplitude down, alpha amplitude up.
std::vector<Effect> default_effects();

struct SynthConfig {
  int n_subjects = 50;
  double age_min = 5.0;
  double age_max = 22.0;
  int n_channels = 128;
  double sampling_rate_hz = 500.0;
  double ec_seconds = 40.0;
  double eo_seconds = 20.0;
  // Background PSD ~ (f / pivot)^-(exponent_base + exponent_age_slope * u),
  // flat below 1 Hz. A negative slope flattens the spectrum with age.
  double exponent_base = 2.0;
  double exponent_age_slope = -0.8;
  double pivot_hz = 20.0;
  double noise_uv = 10.0;         // white-equivalent level at the pivot
  double sensor_noise_uv = 0.5;   // independent white noise per channel
  double spatial_width_rad = 0.6;
  double ec_alpha_gain = 2.0;
  double jitter = 0.2;            // per-subject log-normal amplitude spread
  double exponent_jitter = 0.1;
  std::vector<Effect> effects = default_effects();
  std::uint64_t seed = 0;

  // Strengths >= 0, directions +-1, non-degenerate age range, at least 12
  // channels. Throws kConfig.
  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);  // missing keys keep defaults
};

// Oscillator defaults per band (omega has none).
struct Oscillator {
  double centre_hz;
  double bandwidth_hz;  // Gaussian spectral sd
  double amplitude_uv;  // RMS at u = 0.5 before effects
};
const Oscillator& oscillator(features::Band band);

struct Layout {
  Montage montage;
  RegionMap regions;
};
// Cap montage of n channels with sector regions.
Layout default_layout(int n_channels);

// Eyes-open and eyes-closed recordings of one subject. Bit-identical for
// identical arguments.
std::pair<Recording, Recording> generate_subject(const std::string& subject_id, double age, const SynthConfig& config,
                                                 const Layout& layout, std::uint64_t seed);

struct SubjectTruth {
  std::string subject_id;
  double age_years = 0.0;
  std::uint64_t seed = 0;
};

struct GroundTruthManifest {
  SynthConfig config;
  std::vector<SubjectTruth> subjects;

  nlohmann::json to_json() const;
  static GroundTruthManifest from_json(const nlohmann::json& j);
};

// Ages uniform over the configured range; subject i uses
// derive_seed(seed, subject stream, i). Writes <out>/<id>_<EO|EC>/ bundles,
// montage.json, regions.json and manifest.json.
GroundTruthManifest generate_dataset(const SynthConfig& config, const std::filesystem::path& out, int workers = 1);

}  // namespace brainage::synth
