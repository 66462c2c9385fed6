#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brainage/features.hpp"
#include "brainage/recording.hpp"

namespace brainage {

struct FeatureDescriptor {
  State state = State::kEyesClosed;
  std::string channel;
  features::Band band = features::Band::kOmega;
  std::string measure;    // catalogue measure name
  std::string component;  // empty for scalar measures

  // <STATE>_<CHANNEL>_<BAND>_<measure>[_<component>]
  std::string column_name() const;
  static FeatureDescriptor parse(const std::string& column);  // throws kSchema
  bool operator==(const FeatureDescriptor&) const = default;
};

// The six training-set variants: 128 or 12 channels crossed with EO, EC or both.
struct Variant {
  int channels = 12;
  bool eyes_open = true;
  bool eyes_closed = true;

  std::string name() const;  // e.g. "12-All"
  static Variant parse(std::string_view text);
  std::vector<State> states() const;  // EO before EC
  bool operator==(const Variant&) const = default;
};

const std::vector<Variant>& all_variants();

struct FeatureMatrix {
  std::vector<FeatureDescriptor> descriptors;
  std::vector<std::string> subject_ids;
  std::vector<double> ages;  // NaN when unknown
  Eigen::MatrixXd rows;      // [subjects x descriptors]

  std::size_t n_subjects() const { return subject_ids.size(); }
  std::size_t n_features() const { return descriptors.size(); }
  std::vector<std::string> column_names() const;
  // Keeps the listed columns, in the given order.
  FeatureMatrix select_columns(const std::vector<std::size_t>& columns) const;
  FeatureMatrix select_rows(const std::vector<std::size_t>& rows) const;
  void validate() const;
};

// Descriptor layout for one state and a channel list: channel, band, measure.
std::vector<FeatureDescriptor> block_descriptors(State state, const std::vector<std::string>& channels);

// Joins per-recording feature blocks into one row per subject. Subjects are
// sorted by id; those missing a state required by the variant are dropped
// with a warning. Channel order follows `channel_order`.
FeatureMatrix assemble(std::span<const features::RecordingFeatures> blocks, const Variant& variant,
                       const std::vector<std::string>& channel_order);

// Full path from preprocessed recordings: optional region averaging
// (12-channel variants), extraction, assembly.
FeatureMatrix build_training_set(std::span<const Recording> recordings, const Variant& variant,
                                 const RegionMap& regions, const features::Params& params = {}, int workers = 1);

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& fm);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

// Z-scoring with parameters fitted on the training rows only. Zero-variance
// columns pass through unscaled and are flagged.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<bool> constant;

  static Standardizer fit(const Eigen::MatrixXd& train);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

}  // namespace brainage
