#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "brainage/bundle.hpp"
#include "brainage/error.hpp"
#include "brainage/fft.hpp"
#include "brainage/parallel.hpp"
#include "brainage/rng.hpp"
#include "brainage/synth.hpp"

namespace brainage::synth {

namespace fs = std::filesystem;
using features::Band;

namespace {

constexpr std::uint64_t kAgeStream = 0xa6e5;
constexpr std::uint64_t kSubjectStream = 0x5b;

const Band kOscillatorBands[] = {Band::kDelta, Band::kTheta, Band::kAlpha, Band::kBeta};

std::string_view parameter_name(Parameter p) { return p == Parameter::kAmplitude ? "amplitude" : "frequency"; }

Parameter parse_parameter(const std::string& text) {
  if (text == "amplitude") return Parameter::kAmplitude;
  if (text == "frequency") return Parameter::kFrequency;
  fail(ErrorCode::kConfig, "unknown effect parameter: " + text);
}

// White noise shaped to the power spectrum `shape` (relative to white) by
// FFT filtering. With shape == 1 the output is the white input itself.
template <typename Shape>
std::vector<double> shaped_noise(Rng& rng, std::size_t n, double rate_hz, Shape shape) {
  std::vector<double> white(n);
  for (auto& v : white) v = rng.normal();
  std::vector<std::complex<double>> spec;
  fft::forward(white, spec);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * rate_hz / static_cast<double>(n);
    spec[k] *= k == 0 ? 0.0 : std::sqrt(shape(f));
  }
  std::vector<double> out;
  fft::inverse(spec, n, out);
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

void normalise_rms(std::vector<double>& x) {
  double ss = 0.0;
  for (double v : x) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(x.size()));
  if (rms > 0.0) {
    for (auto& v : x) v /= rms;
  }
}

double affine(const Effect& e, double u) { return e.direction * e.strength * (u - 0.5); }

bool applies(const Effect& e, const std::string& region) {
  return e.regions.empty() || std::find(e.regions.begin(), e.regions.end(), region) != e.regions.end();
}

// Channel x source weights from a Gaussian of the great-circle angle,
// normalised so each channel's weights have unit sum of squares.
Eigen::MatrixXd mixing(const Montage& montage, const std::vector<Eigen::Vector3d>& sources, double width) {
  const auto nc = static_cast<Eigen::Index>(montage.channel_names.size());
  const auto ns = static_cast<Eigen::Index>(sources.size());
  Eigen::MatrixXd w(nc, ns);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const Eigen::Vector3d p = montage.positions[static_cast<std::size_t>(c)].normalized();
    for (Eigen::Index s = 0; s < ns; ++s) {
      const double angle = std::acos(std::clamp(p.dot(sources[static_cast<std::size_t>(s)]), -1.0, 1.0));
      w(c, s) = std::exp(-angle * angle / (2.0 * width * width));
    }
    w.row(c) /= w.row(c).norm();
  }
  return w;
}

Recording render_state(const std::string& subject_id, double age, double u, State state, const SynthConfig& config,
                       const Layout& layout, const Eigen::MatrixXd& w, const std::vector<double>& band_jitter,
                       double background_jitter, double exponent, std::uint64_t seed) {
  const double seconds = state == State::kEyesClosed ? config.ec_seconds : config.eo_seconds;
  const auto n = static_cast<std::size_t>(std::llround(seconds * config.sampling_rate_hz));
  const auto n_regions = layout.regions.regions.size();
  const double rate = config.sampling_rate_hz;
  Rng rng(seed);

  SignalMatrix sources(static_cast<Eigen::Index>(n_regions), static_cast<Eigen::Index>(n));
  SignalMatrix x = SignalMatrix::Zero(static_cast<Eigen::Index>(layout.montage.channel_names.size()),
                                      static_cast<Eigen::Index>(n));

  // 1/f background.
  double background = config.noise_uv * background_jitter;
  for (const auto& e : config.effects) {
    if (e.band == Band::kOmega && e.parameter == Parameter::kAmplitude) background *= std::max(0.0, 1.0 + affine(e, u));
  }
  const double pivot = config.pivot_hz;
  for (std::size_t r = 0; r < n_regions; ++r) {
    const auto s = shaped_noise(rng, n, rate, [&](double f) { return std::pow(std::max(f, 1.0) / pivot, -exponent); });
    for (std::size_t t = 0; t < n; ++t) sources(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = background * s[t];
  }
  x.noalias() += w * sources;

  // Band oscillators.
  for (std::size_t b = 0; b < std::size(kOscillatorBands); ++b) {
    const Band band = kOscillatorBands[b];
    const auto& osc = oscillator(band);
    for (std::size_t r = 0; r < n_regions; ++r) {
      const auto& region = layout.regions.regions[r].name;
      double amp = osc.amplitude_uv * band_jitter[b];
      double centre = osc.centre_hz;
      for (const auto& e : config.effects) {
        if (e.band != band || !applies(e, region)) continue;
        if (e.parameter == Parameter::kAmplitude) {
          amp *= std::max(0.0, 1.0 + affine(e, u));
        } else {
          centre += affine(e, u);
        }
      }
      if (band == Band::kAlpha && state == State::kEyesClosed) amp *= config.ec_alpha_gain;
      const double bw = osc.bandwidth_hz;
      auto s = shaped_noise(rng, n, rate, [&](double f) {
        const double d = (f - centre) / bw;
        return std::exp(-0.5 * d * d);
      });
      normalise_rms(s);
      for (std::size_t t = 0; t < n; ++t) sources(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = amp * s[t];
    }
    x.noalias() += w * sources;
  }

  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (Eigen::Index t = 0; t < x.cols(); ++t) x(c, t) += config.sensor_noise_uv * rng.normal();
    x.row(c).array() -= x.row(c).mean();
  }

  Recording rec;
  rec.subject_id = subject_id;
  rec.age_years = age;
  rec.state = state;
  rec.sampling_rate_hz = rate;
  rec.channel_names = layout.montage.channel_names;
  rec.data = std::move(x);
  return rec;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace

std::string Effect::describe() const {
  std::string where = regions.empty() ? "all regions" : "";
  for (std::size_t i = 0; i < regions.size(); ++i) where += (i ? "," : "") + regions[i];
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", strength);
  const std::string target = band == Band::kOmega && parameter == Parameter::kAmplitude
                                 ? "1/f background amplitude"
                                 : std::string(features::band_spec(band).name) + " oscillator " +
                                       std::string(parameter_name(parameter));
  return target + (direction > 0 ? " increases" : " decreases") + " with age on " + where + " (strength " + buf + ")";
}

std::vector<Effect> default_effects() {
  return {{Band::kDelta, {}, Parameter::kAmplitude, -1, 1.0},
          {Band::kTheta, {}, Parameter::kAmplitude, -1, 1.0},
          {Band::kAlpha, {}, Parameter::kAmplitude, 1, 1.2}};
}

const Oscillator& oscillator(Band band) {
  static const Oscillator delta{2.0, 0.5, 6.0}, theta{5.5, 0.6, 5.0}, alpha{10.0, 1.0, 5.0}, beta{20.0, 2.5, 1.5};
  switch (band) {
    case Band::kDelta: return delta;
    case Band::kTheta: return theta;
    case Band::kAlpha: return alpha;
    case Band::kBeta: return beta;
    case Band::kOmega: break;
  }
  fail(ErrorCode::kParameter, "omega has no oscillator");
}

void SynthConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::kConfig, "synth config: " + what); };
  check(n_subjects >= 1, "n_subjects must be at least 1");
  check(std::isfinite(age_min) && std::isfinite(age_max) && age_max > age_min, "age range is degenerate");
  check(n_channels >= 12, "at least 12 channels are needed for the region map");
  check(sampling_rate_hz > 0.0 && ec_seconds > 0.0 && eo_seconds > 0.0, "rate and durations must be positive");
  check(pivot_hz > 0.0 && noise_uv >= 0.0 && sensor_noise_uv >= 0.0, "noise levels must be non-negative");
  check(spatial_width_rad > 0.0 && ec_alpha_gain >= 0.0, "spatial width and alpha gain must be positive");
  check(jitter >= 0.0 && exponent_jitter >= 0.0, "jitter must be non-negative");
  for (const auto& e : effects) {
    check(e.strength >= 0.0 && std::isfinite(e.strength), "effect strengths must be >= 0");
    check(e.direction == 1 || e.direction == -1, "effect direction must be + or -");
    check(!(e.band == Band::kOmega && e.parameter == Parameter::kFrequency), "omega has no frequency to shift");
  }
}

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json effs = nlohmann::json::array();
  for (const auto& e : effects) {
    effs.push_back({{"band", features::band_spec(e.band).name},
                    {"regions", e.regions},
                    {"parameter", parameter_name(e.parameter)},
                    {"direction", e.direction > 0 ? "+" : "-"},
                    {"strength", e.strength}});
  }
  return {{"n_subjects", n_subjects},
          {"age_min", age_min},
          {"age_max", age_max},
          {"n_channels", n_channels},
          {"sampling_rate_hz", sampling_rate_hz},
          {"ec_seconds", ec_seconds},
          {"eo_seconds", eo_seconds},
          {"exponent_base", exponent_base},
          {"exponent_age_slope", exponent_age_slope},
          {"pivot_hz", pivot_hz},
          {"noise_uv", noise_uv},
          {"sensor_noise_uv", sensor_noise_uv},
          {"spatial_width_rad", spatial_width_rad},
          {"ec_alpha_gain", ec_alpha_gain},
          {"jitter", jitter},
          {"exponent_jitter", exponent_jitter},
          {"effects", effs},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    require(j.is_object(), ErrorCode::kConfig, "synth config must be an object");
    for (const auto& [key, _] : j.items()) {
      require(c.to_json().contains(key), ErrorCode::kConfig, "unknown synth config field: " + key);
    }
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.age_min = j.value("age_min", c.age_min);
    c.age_max = j.value("age_max", c.age_max);
    c.n_channels = j.value("n_channels", c.n_channels);
    c.sampling_rate_hz = j.value("sampling_rate_hz", c.sampling_rate_hz);
    c.ec_seconds = j.value("ec_seconds", c.ec_seconds);
    c.eo_seconds = j.value("eo_seconds", c.eo_seconds);
    c.exponent_base = j.value("exponent_base", c.exponent_base);
    c.exponent_age_slope = j.value("exponent_age_slope", c.exponent_age_slope);
    c.pivot_hz = j.value("pivot_hz", c.pivot_hz);
    c.noise_uv = j.value("noise_uv", c.noise_uv);
    c.sensor_noise_uv = j.value("sensor_noise_uv", c.sensor_noise_uv);
    c.spatial_width_rad = j.value("spatial_width_rad", c.spatial_width_rad);
    c.ec_alpha_gain = j.value("ec_alpha_gain", c.ec_alpha_gain);
    c.jitter = j.value("jitter", c.jitter);
    c.exponent_jitter = j.value("exponent_jitter", c.exponent_jitter);
    c.seed = j.value("seed", c.seed);
    if (j.contains("effects")) {
      c.effects.clear();
      for (const auto& e : j.at("effects")) {
        Effect eff;
        eff.band = features::parse_band(e.at("band").get<std::string>());
        eff.regions = e.value("regions", std::vector<std::string>{});
        eff.parameter = parse_parameter(e.value("parameter", std::string("amplitude")));
        const auto dir = e.at("direction").get<std::string>();
        require(dir == "+" || dir == "-", ErrorCode::kConfig, "effect direction must be + or -");
        eff.direction = dir == "+" ? 1 : -1;
        eff.strength = e.at("strength").get<double>();
        c.effects.push_back(std::move(eff));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("synth config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    fail(ErrorCode::kConfig, e.what());
  }
  c.validate();
  return c;
}

Layout default_layout(int n_channels) {
  Layout l;
  l.montage = make_cap_montage(static_cast<std::size_t>(n_channels));
  l.regions = make_sector_regions(l.montage);
  return l;
}

std::pair<Recording, Recording> generate_subject(const std::string& subject_id, double age, const SynthConfig& config,
                                                 const Layout& layout, std::uint64_t seed) {
  config.validate();
  require(age >= config.age_min && age <= config.age_max, ErrorCode::kParameter,
          "age " + std::to_string(age) + " is outside the configured range");
  const auto names = layout.regions.names();
  for (const auto& e : config.effects) {
    for (const auto& r : e.regions) {
      require(std::find(names.begin(), names.end(), r) != names.end(), ErrorCode::kConfig,
              "effect names unknown region " + r);
    }
  }
  const double u = (age - config.age_min) / (config.age_max - config.age_min);

  // Subject traits shared by both states.
  Rng traits(derive_seed(seed, 1));
  std::vector<double> band_jitter;
  for (std::size_t b = 0; b < std::size(kOscillatorBands); ++b) band_jitter.push_back(std::exp(config.jitter * traits.normal()));
  const double background_jitter = std::exp(config.jitter * traits.normal());
  const double exponent =
      config.exponent_base + config.exponent_age_slope * u + config.exponent_jitter * traits.normal();

  const auto centroids = region_centroids(layout.montage, layout.regions);
  const Eigen::MatrixXd w = mixing(layout.montage, centroids, config.spatial_width_rad);
  auto eo = render_state(subject_id, age, u, State::kEyesOpen, config, layout, w, band_jitter, background_jitter, exponent,
                         derive_seed(seed, 2));
  auto ec = render_state(subject_id, age, u, State::kEyesClosed, config, layout, w, band_jitter, background_jitter,
                         exponent, derive_seed(seed, 3));
  return {std::move(eo), std::move(ec)};
}

nlohmann::json GroundTruthManifest::to_json() const {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : subjects) subs.push_back({{"subject_id", s.subject_id}, {"age_years", s.age_years}, {"seed", s.seed}});
  nlohmann::json effects = nlohmann::json::array();
  for (const auto& e : config.effects) effects.push_back(e.describe());
  char buf[160];
  std::snprintf(buf, sizeof buf, "1/f exponent %g %+g * normalised age (pivot %g Hz)", config.exponent_base,
                config.exponent_age_slope, config.pivot_hz);
  effects.push_back(buf);
  return {{"config", config.to_json()}, {"planted", effects}, {"subjects", subs}};
}

GroundTruthManifest GroundTruthManifest::from_json(const nlohmann::json& j) {
  GroundTruthManifest m;
  try {
    m.config = SynthConfig::from_json(j.at("config"));
    for (const auto& s : j.at("subjects")) {
      m.subjects.push_back(
          {s.at("subject_id").get<std::string>(), s.at("age_years").get<double>(), s.at("seed").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("synth manifest: ") + e.what());
  }
  return m;
}

GroundTruthManifest generate_dataset(const SynthConfig& config, const fs::path& out, int workers) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + out.string() + ": " + ec.message());
  const Layout layout = default_layout(config.n_channels);

  GroundTruthManifest manifest;
  manifest.config = config;
  Rng ages(derive_seed(config.seed, kAgeStream));
  for (int i = 0; i < config.n_subjects; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "sub-%04d", i + 1);
    manifest.subjects.push_back({id, ages.uniform(config.age_min, config.age_max),
                                 derive_seed(config.seed, kSubjectStream, static_cast<std::uint64_t>(i))});
  }
  parallel_for(manifest.subjects.size(), static_cast<std::size_t>(std::max(workers, 1)), [&](std::size_t i) {
    const auto& s = manifest.subjects[i];
    const auto [eo, ec_rec] = generate_subject(s.subject_id, s.age_years, config, layout, s.seed);
    io::write_bundle(out / (s.subject_id + "_EO"), eo);
    io::write_bundle(out / (s.subject_id + "_EC"), ec_rec);
  });
  io::write_montage(out / "montage.json", layout.montage);
  io::write_regions(out / "regions.json", layout.regions);
  write_json(out / "manifest.json", manifest.to_json());
  return manifest;
}

}  // namespace brainage::synth
