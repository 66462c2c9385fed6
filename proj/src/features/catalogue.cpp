#include "brainage/error.hpp"
#include "brainage/features.hpp"

namespace brainage::features {

const BandSpec& band_spec(Band band) { return kBands[static_cast<std::size_t>(band)]; }

Band parse_band(std::string_view name) {
  for (const auto& b : kBands) {
    if (b.name == name) return b.band;
  }
  fail(ErrorCode::kParameter, "unknown band: " + std::string(name));
}

const std::vector<Measure>& catalogue() {
  static const std::vector<Measure> measures{
      {"mean", {}},
      {"std", {}},
      {"ptp_amp", {}},
      {"line_length", {}},
      {"zero_crossings", {}},
      {"skewness", {}},
      {"kurtosis", {}},
      {"hjorth_complexity", {}},
      {"spect_slope", {"intercept", "slope", "mse", "r2"}},
      {"pow_freq_bands", {}, true},
      {"wavelet_coef_energy", {}, true},
      {"hjorth_complexity_spect", {}},
      {"quantile", {"q05", "q25", "q75", "q95"}},
      {"higuchi_fd", {}},
      {"samp_entropy", {}},
      {"app_entropy", {}},
      {"spect_entropy", {}},
      {"svd_fisher_info", {}},
      {"hurst_exp", {}},
  };
  return measures;
}

std::string MeasureColumn::column_name() const {
  std::string out(measure);
  if (!component.empty()) {
    out += '_';
    out += component;
  }
  return out;
}

const std::vector<MeasureColumn>& band_columns() {
  static const std::vector<MeasureColumn> columns = [] {
    std::vector<MeasureColumn> out;
    for (const auto& m : catalogue()) {
      if (m.components.empty()) {
        out.push_back({m.name, {}});
      } else {
        for (auto c : m.components) out.push_back({m.name, c});
      }
    }
    return out;
  }();
  return columns;
}

double epoch_duration(State state, const Params& params) {
  return state == State::kEyesOpen ? params.epoch_eo_s : params.epoch_ec_s;
}

}  // namespace brainage::features
