#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "brainage/csv.hpp"
#include "brainage/error.hpp"
#include "brainage/explain.hpp"
#include "brainage/features.hpp"

namespace brainage::explain {

std::string_view to_string(GroupingKind kind) {
  switch (kind) {
    case GroupingKind::kBand: return "band";
    case GroupingKind::kMeasure: return "measure";
    case GroupingKind::kRegion: return "region";
  }
  return "band";
}

GroupingKind parse_grouping(std::string_view text) {
  for (GroupingKind k : all_groupings()) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorCode::kParameter, "unknown grouping: " + std::string(text));
}

const std::vector<GroupingKind>& all_groupings() {
  static const std::vector<GroupingKind> kinds{GroupingKind::kBand, GroupingKind::kMeasure, GroupingKind::kRegion};
  return kinds;
}

Grouping Grouping::build(GroupingKind kind, const std::vector<FeatureDescriptor>& columns, const RegionMap& regions) {
  Grouping g;
  g.kind = kind;
  std::map<std::string, int> index;
  auto add_group = [&](const std::string& name) {
    index.emplace(name, static_cast<int>(g.groups.size()));
    g.groups.push_back(name);
  };
  switch (kind) {
    case GroupingKind::kBand:
      for (const auto& b : features::kBands) add_group(std::string(b.name));
      break;
    case GroupingKind::kMeasure:
      for (const auto& m : features::catalogue()) add_group(std::string(m.name));
      break;
    case GroupingKind::kRegion:
      for (const auto& r : regions.regions) add_group(r.name);
      break;
  }
  std::map<std::string, std::string> region_of;
  for (const auto& r : regions.regions) {
    for (const auto& m : r.members) region_of[m] = r.name;
  }
  for (const auto& c : columns) {
    std::string key;
    switch (kind) {
      case GroupingKind::kBand: key = std::string(features::band_spec(c.band).name); break;
      case GroupingKind::kMeasure: key = c.measure; break;
      case GroupingKind::kRegion: {
        if (index.count(c.channel)) {
          key = c.channel;
        } else {
          const auto it = region_of.find(c.channel);
          require(it != region_of.end(), ErrorCode::kMapping, "channel " + c.channel + " is in no region");
          key = it->second;
        }
        break;
      }
    }
    const auto it = index.find(key);
    require(it != index.end(), ErrorCode::kMapping, "column " + c.column_name() + " has no group");
    g.assignment.push_back(it->second);
  }
  return g;
}

double ShapMatrix::max_additivity_error() const {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    worst = std::max(worst, std::abs(base_value + phi.row(i).sum() - predictions(i)));
  }
  return worst;
}

void ShapMatrix::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  csv::Table t;
  t.header = {"subject_id"};
  t.header.insert(t.header.end(), columns.begin(), columns.end());
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    std::vector<std::string> row{sample_ids[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < phi.cols(); ++j) row.push_back(csv::format_double(phi(i, j)));
    t.rows.push_back(std::move(row));
  }
  csv::write(dir / (model + ".csv"), t);
  nlohmann::json j{{"model", model},
                   {"method", method},
                   {"base_value", base_value},
                   {"n_coalitions", n_coalitions},
                   {"seed", seed},
                   {"predictions", std::vector<double>(predictions.data(), predictions.data() + predictions.size())}};
  std::ofstream out(dir / (model + ".json"));
  require(out.good(), ErrorCode::kIo, "cannot write shap sidecar for " + model);
  out << j.dump(1) << '\n';
}

ShapMatrix ShapMatrix::read(const std::filesystem::path& dir, const std::string& model) {
  ShapMatrix s;
  const auto t = csv::read(dir / (model + ".csv"));
  require(!t.header.empty() && t.header[0] == "subject_id", ErrorCode::kSchema, "shap csv must start with subject_id");
  s.columns.assign(t.header.begin() + 1, t.header.end());
  s.phi.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(s.columns.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    s.sample_ids.push_back(t.rows[i][0]);
    for (std::size_t j = 1; j < t.rows[i].size(); ++j) {
      s.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = csv::parse_double(t.rows[i][j]);
    }
  }
  std::ifstream in(dir / (model + ".json"));
  require(in.good(), ErrorCode::kIo, "missing shap sidecar for " + model);
  try {
    nlohmann::json j;
    in >> j;
    s.model = j.at("model").get<std::string>();
    s.method = j.at("method").get<std::string>();
    s.base_value = j.at("base_value").get<double>();
    s.n_coalitions = j.at("n_coalitions").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto p = j.at("predictions").get<std::vector<double>>();
    s.predictions = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed shap sidecar: ") + e.what());
  }
  require(s.predictions.size() == s.phi.rows(), ErrorCode::kSchema, "shap sidecar prediction count mismatch");
  return s;
}

std::vector<double> descending_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double GroupImportance::rank_of(const std::string& group) const {
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i] == group) return ranks[i];
  }
  fail(ErrorCode::kMapping, "unknown group " + group);
}

nlohmann::json GroupImportance::to_json() const {
  return {{"grouping", std::string(to_string(kind))}, {"groups", groups}, {"scores", scores}, {"ranks", ranks}};
}

GroupImportance GroupImportance::from_json(const nlohmann::json& j) {
  GroupImportance g;
  try {
    g.kind = parse_grouping(j.at("grouping").get<std::string>());
    g.groups = j.at("groups").get<std::vector<std::string>>();
    g.scores = j.at("scores").get<std::vector<double>>();
    g.ranks = j.at("ranks").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed group importance: ") + e.what());
  }
  require(g.scores.size() == g.groups.size() && g.ranks.size() == g.groups.size(), ErrorCode::kSchema,
          "group importance arrays differ in length");
  return g;
}

GroupImportance group_importance(const ShapMatrix& shap, const Grouping& grouping) {
  require(shap.phi.rows() > 0, ErrorCode::kEmptyDataset, "no explained samples");
  require(grouping.assignment.size() == static_cast<std::size_t>(shap.phi.cols()), ErrorCode::kSchema,
          "grouping does not cover the shap columns");
  const Eigen::VectorXd per_feature = shap.phi.cwiseAbs().colwise().mean().transpose();
  GroupImportance g;
  g.kind = grouping.kind;
  g.groups = grouping.groups;
  g.scores.assign(grouping.groups.size(), 0.0);
  for (std::size_t j = 0; j < grouping.assignment.size(); ++j) {
    g.scores[static_cast<std::size_t>(grouping.assignment[j])] += per_feature(static_cast<Eigen::Index>(j));
  }
  g.ranks = descending_ranks(g.scores);
  return g;
}

std::vector<Trend> signed_feature_trend(const ShapMatrix& shap, const Eigen::MatrixXd& values) {
  require(values.rows() == shap.phi.rows() && values.cols() == shap.phi.cols(), ErrorCode::kSchema,
          "feature values must match the shap matrix");
  require(shap.phi.rows() >= 3, ErrorCode::kParameter, "trend needs at least 3 samples");
  std::vector<Trend> out(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const Eigen::ArrayXd a = values.col(j).array() - values.col(j).mean();
    const Eigen::ArrayXd b = shap.phi.col(j).array() - shap.phi.col(j).mean();
    const double saa = (a * a).sum();
    const double sbb = (b * b).sum();
    auto& t = out[static_cast<std::size_t>(j)];
    if (saa <= 0.0 || sbb <= 0.0) {
      t.degenerate = true;
      continue;
    }
    t.r = std::clamp((a * b).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
  }
  return out;
}

}  // namespace brainage::explain
