#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace brainage {

enum class State { kEyesOpen, kEyesClosed };

std::string_view to_string(State state);  // "EO" / "EC"
State parse_state(std::string_view text);

// Channels are rows so that each channel is a contiguous span.
using SignalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Recording {
  std::string subject_id;
  std::optional<double> age_years;
  State state = State::kEyesClosed;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> channel_names;
  SignalMatrix data;  // microvolts, [n_channels x n_samples]

  std::size_t n_channels() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t n_samples() const { return static_cast<std::size_t>(data.cols()); }
  double duration_s() const { return static_cast<double>(n_samples()) / sampling_rate_hz; }
  std::span<const double> channel(std::size_t i) const {
    return {data.row(static_cast<Eigen::Index>(i)).data(), n_samples()};
  }
  std::size_t channel_index(const std::string& name) const;  // throws kMapping

  // Row count matches names, rate positive, every sample finite.
  void validate() const;
};

struct Montage {
  std::vector<std::string> channel_names;
  std::vector<Eigen::Vector3d> positions;  // unit sphere

  std::size_t index_of(const std::string& name) const;  // throws kMapping
  bool contains(const std::string& name) const;
  void validate() const;
};

struct Region {
  std::string name;
  std::vector<std::string> members;
};

struct RegionMap {
  std::vector<Region> regions;

  std::vector<std::string> names() const;
  // Disjoint members; when a montage is given, every member must exist in it.
  void validate(const Montage* montage = nullptr) const;
};

struct EpochSet {
  std::string subject_id;
  std::optional<double> age_years;
  State state = State::kEyesClosed;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> channel_names;
  double epoch_duration_s = 0.0;
  std::vector<SignalMatrix> epochs;
};

}  // namespace brainage
