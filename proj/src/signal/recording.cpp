#include "brainage/recording.hpp"

#include <cmath>
#include <set>

#include "brainage/error.hpp"

namespace brainage {

std::string_view to_string(State state) { return state == State::kEyesOpen ? "EO" : "EC"; }

State parse_state(std::string_view text) {
  if (text == "EO") return State::kEyesOpen;
  if (text == "EC") return State::kEyesClosed;
  fail(ErrorCode::kSchema, "unknown recording state '" + std::string(text) + "'");
}

std::size_t Recording::channel_index(const std::string& name) const {
  for (std::size_t i = 0; i < channel_names.size(); ++i) {
    if (channel_names[i] == name) return i;
  }
  fail(ErrorCode::kMapping, "channel '" + name + "' not in recording " + subject_id);
}

void Recording::validate() const {
  require(static_cast<std::size_t>(data.rows()) == channel_names.size(), ErrorCode::kInvalidData,
          "data rows do not match channel names");
  require(sampling_rate_hz > 0.0, ErrorCode::kInvalidData, "sampling rate must be positive");
  if (age_years) require(*age_years >= 0.0, ErrorCode::kInvalidData, "age must be >= 0");
  require(data.allFinite(), ErrorCode::kInvalidData, "recording contains non-finite samples");
}

std::size_t Montage::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < channel_names.size(); ++i) {
    if (channel_names[i] == name) return i;
  }
  fail(ErrorCode::kMapping, "channel '" + name + "' not in montage");
}

bool Montage::contains(const std::string& name) const {
  for (const auto& n : channel_names) {
    if (n == name) return true;
  }
  return false;
}

void Montage::validate() const {
  require(channel_names.size() == positions.size(), ErrorCode::kInvalidData,
          "montage names/positions length mismatch");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < channel_names.size(); ++i) {
    require(seen.insert(channel_names[i]).second, ErrorCode::kInvalidData,
            "duplicate montage channel " + channel_names[i]);
    require(std::abs(positions[i].norm() - 1.0) <= 1e-6, ErrorCode::kInvalidData,
            "montage position of " + channel_names[i] + " is not on the unit sphere");
  }
}

std::vector<std::string> RegionMap::names() const {
  std::vector<std::string> out;
  for (const auto& r : regions) out.push_back(r.name);
  return out;
}

void RegionMap::validate(const Montage* montage) const {
  std::set<std::string> members;
  std::set<std::string> names;
  for (const auto& r : regions) {
    require(names.insert(r.name).second, ErrorCode::kMapping, "duplicate region " + r.name);
    require(!r.members.empty(), ErrorCode::kMapping, "region " + r.name + " has no members");
    for (const auto& m : r.members) {
      require(members.insert(m).second, ErrorCode::kMapping, "channel " + m + " belongs to two regions");
      if (montage) {
        require(montage->contains(m), ErrorCode::kMapping, "region member " + m + " missing from montage");
      }
    }
  }
}

}  // namespace brainage
