#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>

#include "brainage/csv.hpp"
#include "brainage/dataset.hpp"
#include "brainage/error.hpp"
#include "brainage/parallel.hpp"
#include "brainage/signal.hpp"

namespace brainage {

std::string FeatureDescriptor::column_name() const {
  std::string out(to_string(state));
  out += '_';
  out += channel;
  out += '_';
  out += features::band_spec(band).name;
  out += '_';
  out += measure;
  if (!component.empty()) {
    out += '_';
    out += component;
  }
  return out;
}

FeatureDescriptor FeatureDescriptor::parse(const std::string& column) {
  // Channel names carry no underscores, so the first three separators are fixed.
  const auto p1 = column.find('_');
  const auto p2 = p1 == std::string::npos ? p1 : column.find('_', p1 + 1);
  const auto p3 = p2 == std::string::npos ? p2 : column.find('_', p2 + 1);
  require(p3 != std::string::npos, ErrorCode::kSchema, "malformed feature column: " + column);
  FeatureDescriptor d;
  try {
    d.state = parse_state(column.substr(0, p1));
    d.band = features::parse_band(column.substr(p2 + 1, p3 - p2 - 1));
  } catch (const Error&) {
    fail(ErrorCode::kSchema, "malformed feature column: " + column);
  }
  d.channel = column.substr(p1 + 1, p2 - p1 - 1);
  const std::string rest = column.substr(p3 + 1);
  for (const auto& c : features::band_columns()) {
    if (c.column_name() == rest) {
      d.measure = c.measure;
      d.component = c.component;
      return d;
    }
  }
  fail(ErrorCode::kSchema, "unknown measure in column: " + column);
}

std::string Variant::name() const {
  std::string out = std::to_string(channels) + "-";
  if (eyes_open && eyes_closed) return out + "All";
  return out + (eyes_open ? "EO" : "EC");
}

Variant Variant::parse(std::string_view text) {
  for (const auto& v : all_variants()) {
    if (v.name() == text) return v;
  }
  fail(ErrorCode::kParameter, "unknown variant: " + std::string(text));
}

std::vector<State> Variant::states() const {
  std::vector<State> out;
  if (eyes_open) out.push_back(State::kEyesOpen);
  if (eyes_closed) out.push_back(State::kEyesClosed);
  return out;
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> variants{
      {128, true, true}, {128, false, true}, {128, true, false},
      {12, true, true},  {12, false, true},  {12, true, false},
  };
  return variants;
}

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> out;
  out.reserve(descriptors.size());
  for (const auto& d : descriptors) out.push_back(d.column_name());
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::size_t>& columns) const {
  FeatureMatrix out;
  out.subject_ids = subject_ids;
  out.ages = ages;
  out.rows.resize(rows.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.descriptors.push_back(descriptors.at(columns[j]));
    out.rows.col(static_cast<Eigen::Index>(j)) = rows.col(static_cast<Eigen::Index>(columns[j]));
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& selected) const {
  FeatureMatrix out;
  out.descriptors = descriptors;
  out.rows.resize(static_cast<Eigen::Index>(selected.size()), rows.cols());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    out.subject_ids.push_back(subject_ids.at(selected[i]));
    out.ages.push_back(ages.at(selected[i]));
    out.rows.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(selected[i]));
  }
  return out;
}

void FeatureMatrix::validate() const {
  require(static_cast<std::size_t>(rows.cols()) == descriptors.size(), ErrorCode::kSchema,
          "feature matrix width does not match its descriptors");
  require(static_cast<std::size_t>(rows.rows()) == subject_ids.size() && ages.size() == subject_ids.size(),
          ErrorCode::kSchema, "feature matrix row count mismatch");
  require(rows.allFinite(), ErrorCode::kInvalidData, "feature matrix contains non-finite values");
}

std::vector<FeatureDescriptor> block_descriptors(State state, const std::vector<std::string>& channels) {
  std::vector<FeatureDescriptor> out;
  out.reserve(channels.size() * features::kBands.size() * features::band_columns().size());
  for (const auto& ch : channels) {
    for (const auto& b : features::kBands) {
      for (const auto& c : features::band_columns()) {
        out.push_back({state, ch, b.band, std::string(c.measure), std::string(c.component)});
      }
    }
  }
  return out;
}

FeatureMatrix assemble(std::span<const features::RecordingFeatures> blocks, const Variant& variant,
                       const std::vector<std::string>& channel_order) {
  const auto states = variant.states();
  std::map<std::string, std::map<State, const features::RecordingFeatures*>> by_subject;
  for (const auto& b : blocks) by_subject[b.subject_id][b.state] = &b;

  FeatureMatrix fm;
  for (State s : states) {
    auto d = block_descriptors(s, channel_order);
    fm.descriptors.insert(fm.descriptors.end(), d.begin(), d.end());
  }
  const std::size_t per_channel = features::kBands.size() * features::band_columns().size();

  std::vector<std::vector<double>> rows;
  for (const auto& [subject, by_state] : by_subject) {
    const bool complete = std::all_of(states.begin(), states.end(), [&](State s) { return by_state.count(s) > 0; });
    if (!complete) {
      std::clog << "warning: subject " << subject << " lacks a state required by " << variant.name()
                << "; dropped\n";
      continue;
    }
    std::vector<double> row;
    row.reserve(fm.descriptors.size());
    double age = std::numeric_limits<double>::quiet_NaN();
    for (State s : states) {
      const auto* block = by_state.at(s);
      if (block->age_years) age = *block->age_years;
      for (const auto& ch : channel_order) {
        const auto it = std::find(block->channel_names.begin(), block->channel_names.end(), ch);
        require(it != block->channel_names.end(), ErrorCode::kSchema,
                "subject " + subject + " has no channel " + ch);
        const auto r = static_cast<Eigen::Index>(it - block->channel_names.begin());
        require(static_cast<std::size_t>(block->values.cols()) == per_channel, ErrorCode::kSchema,
                "feature block width mismatch");
        for (std::size_t j = 0; j < per_channel; ++j) row.push_back(block->values(r, static_cast<Eigen::Index>(j)));
      }
    }
    fm.subject_ids.push_back(subject);
    fm.ages.push_back(age);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::kEmptyDataset, "no subject has every state required by " + variant.name());
  fm.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(fm.descriptors.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      fm.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return fm;
}

FeatureMatrix build_training_set(std::span<const Recording> recordings, const Variant& variant,
                                 const RegionMap& regions, const features::Params& params, int workers) {
  const auto states = variant.states();
  std::vector<const Recording*> selected;
  for (const auto& r : recordings) {
    if (std::find(states.begin(), states.end(), r.state) != states.end()) selected.push_back(&r);
  }
  require(!selected.empty(), ErrorCode::kEmptyDataset, "no recordings for variant " + variant.name());

  std::vector<features::RecordingFeatures> blocks(selected.size());
  const bool regional = variant.channels == 12;
  // Parallel across recordings; each job is single-threaded.
  parallel_for(selected.size(), static_cast<std::size_t>(std::max(1, workers)), [&](std::size_t i) {
    if (regional) {
      blocks[i] = features::extract_recording(signal::combine_regions(*selected[i], regions), params);
    } else {
      blocks[i] = features::extract_recording(*selected[i], params);
    }
  });
  std::vector<std::string> order = regional ? regions.names() : selected.front()->channel_names;
  return assemble(blocks, variant, order);
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& fm) {
  csv::Table t;
  t.header = {"subject_id", "age"};
  for (const auto& d : fm.descriptors) t.header.push_back(d.column_name());
  for (std::size_t i = 0; i < fm.n_subjects(); ++i) {
    std::vector<std::string> row;
    row.reserve(t.header.size());
    row.push_back(fm.subject_ids[i]);
    row.push_back(std::isnan(fm.ages[i]) ? "" : csv::format_double(fm.ages[i]));
    for (Eigen::Index j = 0; j < fm.rows.cols(); ++j) {
      row.push_back(csv::format_double(fm.rows(static_cast<Eigen::Index>(i), j)));
    }
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  require(t.header.size() >= 2 && t.header[0] == "subject_id" && t.header[1] == "age", ErrorCode::kSchema,
          "feature csv must start with subject_id,age");
  FeatureMatrix fm;
  for (std::size_t j = 2; j < t.header.size(); ++j) fm.descriptors.push_back(FeatureDescriptor::parse(t.header[j]));
  fm.rows.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(fm.descriptors.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    require(r.size() == t.header.size(), ErrorCode::kSchema, "ragged feature csv row");
    fm.subject_ids.push_back(r[0]);
    fm.ages.push_back(r[1].empty() ? std::numeric_limits<double>::quiet_NaN() : csv::parse_double(r[1]));
    for (std::size_t j = 2; j < r.size(); ++j) {
      fm.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 2)) = csv::parse_double(r[j]);
    }
  }
  return fm;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& train) {
  require(train.rows() > 0, ErrorCode::kEmptyDataset, "cannot standardize an empty training set");
  Standardizer s;
  const auto n = static_cast<double>(train.rows());
  s.mean = train.colwise().mean().transpose();
  s.scale.resize(train.cols());
  s.constant.assign(static_cast<std::size_t>(train.cols()), false);
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    const double var = (train.col(j).array() - s.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))))) {
      s.constant[static_cast<std::size_t>(j)] = true;
      s.mean(j) = 0.0;
      s.scale(j) = 1.0;
    } else {
      s.scale(j) = sd;
    }
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  require(x.cols() == mean.size(), ErrorCode::kSchema, "standardizer width mismatch");
  Eigen::MatrixXd out = x;
  out.rowwise() -= mean.transpose();
  out.array().rowwise() /= scale.transpose().array();
  return out;
}

}  // namespace brainage
