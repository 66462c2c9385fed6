#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "brainage/agreement.hpp"
#include "brainage/csv.hpp"
#include "brainage/error.hpp"

namespace brainage::agreement {

namespace {

bool contains(const std::vector<std::string>& list, const std::string& value) {
  return std::find(list.begin(), list.end(), value) != list.end();
}

// Attributes of one column that selectors can filter on.
struct ColumnKey {
  std::string state, band, measure, component, region;
};

bool matches(const Selector& s, const ColumnKey& c) {
  if (s.state && std::string(to_string(*s.state)) != c.state) return false;
  if (!s.bands.empty() && !contains(s.bands, c.band)) return false;
  if (!s.measures.empty() && !contains(s.measures, c.measure)) return false;
  if (!s.components.empty() && !contains(s.components, c.component)) return false;
  if (!s.regions.empty() && !contains(s.regions, c.region)) return false;
  return true;
}

// Cell of the partition induced by the attributes `s` filters on.
std::string cell_of(const Selector& s, const ColumnKey& c) {
  std::string key;
  if (s.state) key += c.state + '|';
  if (!s.bands.empty()) key += c.band + '|';
  if (!s.measures.empty()) key += c.measure + '|';
  if (!s.components.empty()) key += c.component + '|';
  if (!s.regions.empty()) key += c.region + '|';
  return key;
}

std::vector<bool> filtered_attributes(const Selector& s) {
  return {s.state.has_value(), !s.bands.empty(), !s.measures.empty(), !s.components.empty(), !s.regions.empty()};
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

Criterion parse_criterion(const std::string& text) {
  if (text == "rank_top_k") return Criterion::kRankTopK;
  if (text == "trend_sign") return Criterion::kTrendSign;
  if (text == "rank_above") return Criterion::kRankAbove;
  fail(ErrorCode::kSchema, "unknown hypothesis criterion: " + text);
}

std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::kRankTopK: return "rank_top_k";
    case Criterion::kTrendSign: return "trend_sign";
    case Criterion::kRankAbove: return "rank_above";
  }
  return "trend_sign";
}

struct Partition {
  std::vector<std::string> cells;
  std::vector<double> ranks;
  std::map<std::string, std::size_t> index;
};

Partition partition(const Selector& s, const std::vector<ColumnKey>& keys, const std::vector<double>& importance) {
  Partition p;
  std::vector<double> score;
  for (std::size_t j = 0; j < keys.size(); ++j) {
    const auto key = cell_of(s, keys[j]);
    auto [it, added] = p.index.emplace(key, p.cells.size());
    if (added) {
      p.cells.push_back(key);
      score.push_back(0.0);
    }
    score[it->second] += importance[j];
  }
  p.ranks = explain::descending_ranks(score);
  return p;
}

// Best rank among cells holding a selected column; nullopt when none.
std::optional<double> best_rank(const Selector& s, const Partition& p, const std::vector<ColumnKey>& keys) {
  std::optional<double> best;
  for (const auto& k : keys) {
    if (!matches(s, k)) continue;
    const double r = p.ranks[p.index.at(cell_of(s, k))];
    if (!best || r < *best) best = r;
  }
  return best;
}

}  // namespace

nlohmann::json Selector::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (state) j["state"] = std::string(brainage::to_string(*state));
  if (!bands.empty()) j["bands"] = bands;
  if (!measures.empty()) j["measures"] = measures;
  if (!components.empty()) j["components"] = components;
  if (!regions.empty()) j["regions"] = regions;
  return j;
}

Selector Selector::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kSchema, "selector must be an object");
  for (const auto& [key, _] : j.items()) {
    require(key == "state" || key == "bands" || key == "measures" || key == "components" || key == "regions",
            ErrorCode::kSchema, "unknown selector field: " + key);
  }
  Selector s;
  if (j.contains("state")) s.state = parse_state(j.at("state").get<std::string>());
  s.bands = string_list(j, "bands");
  for (const auto& b : s.bands) features::parse_band(b);
  s.measures = string_list(j, "measures");
  s.components = string_list(j, "components");
  s.regions = string_list(j, "regions");
  return s;
}

std::vector<Hypothesis> hypotheses_from_json(const nlohmann::json& j) {
  try {
    std::vector<Hypothesis> out;
    std::set<std::string> ids;
    for (const auto& e : j.at("hypotheses")) {
      Hypothesis h;
      h.id = e.at("id").get<std::string>();
      require(ids.insert(h.id).second, ErrorCode::kSchema, "duplicate hypothesis id " + h.id);
      h.band = e.value("band", "");
      h.description = e.at("description").get<std::string>();
      h.mapping = e.value("mapping", "");
      h.selector = Selector::from_json(e.at("selector"));
      h.criterion = parse_criterion(e.at("criterion").get<std::string>());
      h.planted = e.value("planted", false);
      switch (h.criterion) {
        case Criterion::kRankTopK:
          h.k = e.at("k").get<int>();
          require(h.k >= 1, ErrorCode::kSchema, h.id + ": k must be at least 1");
          break;
        case Criterion::kTrendSign: {
          const auto sign = e.at("sign").get<std::string>();
          require(sign == "+" || sign == "-", ErrorCode::kSchema, h.id + ": sign must be + or -");
          h.sign = sign == "+" ? 1 : -1;
          break;
        }
        case Criterion::kRankAbove:
          h.other = Selector::from_json(e.at("other"));
          require(filtered_attributes(h.selector) == filtered_attributes(h.other), ErrorCode::kSchema,
                  h.id + ": rank_above selectors must filter on the same attributes");
          break;
      }
      out.push_back(std::move(h));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("hypotheses file: ") + e.what());
  }
}

nlohmann::json hypotheses_to_json(const std::vector<Hypothesis>& hypotheses) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& h : hypotheses) {
    nlohmann::json e{{"id", h.id},
                     {"band", h.band},
                     {"description", h.description},
                     {"mapping", h.mapping},
                     {"criterion", criterion_name(h.criterion)},
                     {"selector", h.selector.to_json()},
                     {"planted", h.planted}};
    if (h.criterion == Criterion::kRankTopK) e["k"] = h.k;
    if (h.criterion == Criterion::kTrendSign) e["sign"] = h.sign > 0 ? "+" : "-";
    if (h.criterion == Criterion::kRankAbove) e["other"] = h.other.to_json();
    arr.push_back(std::move(e));
  }
  return {{"hypotheses", arr}};
}

std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open hypotheses file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
  return hypotheses_from_json(j);
}

std::filesystem::path default_hypotheses_path() { return std::filesystem::path(BRAINAGE_DATA_DIR) / "hypotheses.json"; }

ModelEvidence ModelEvidence::from_shap(const explain::ShapMatrix& shap, const Eigen::MatrixXd& values) {
  require(shap.phi.rows() >= 1, ErrorCode::kEmptyDataset, "no explained samples");
  ModelEvidence e;
  e.model = shap.model;
  const Eigen::VectorXd mean_abs = shap.phi.cwiseAbs().colwise().mean();
  e.importance.assign(mean_abs.data(), mean_abs.data() + mean_abs.size());
  e.trends = explain::signed_feature_trend(shap, values);
  return e;
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kReplicated: return "replicated";
    case Outcome::kNotReplicated: return "not_replicated";
    case Outcome::kInapplicable: return "inapplicable";
  }
  return "inapplicable";
}

ReplicationMatrix evaluate_hypotheses(const std::vector<Hypothesis>& hypotheses,
                                      const std::vector<ModelEvidence>& evidence,
                                      const std::vector<FeatureDescriptor>& columns, const RegionMap& regions) {
  std::map<std::string, std::string> region_of;
  std::set<std::string> region_names;
  for (const auto& r : regions.regions) {
    region_names.insert(r.name);
    for (const auto& m : r.members) region_of[m] = r.name;
  }
  std::vector<ColumnKey> keys;
  keys.reserve(columns.size());
  for (const auto& c : columns) {
    ColumnKey k{std::string(to_string(c.state)), std::string(features::band_spec(c.band).name), c.measure,
                c.component, ""};
    if (region_names.count(c.channel)) {
      k.region = c.channel;
    } else if (const auto it = region_of.find(c.channel); it != region_of.end()) {
      k.region = it->second;
    }
    keys.push_back(std::move(k));
  }

  ReplicationMatrix out;
  for (const auto& h : hypotheses) out.hypotheses.push_back(h.id);
  for (const auto& e : evidence) {
    require(e.importance.size() == columns.size() && e.trends.size() == columns.size(), ErrorCode::kSchema,
            "evidence for " + e.model + " does not match the columns");
    out.models.push_back(e.model);
  }
  for (const auto& h : hypotheses) {
    std::vector<Outcome> row;
    for (const auto& e : evidence) {
      Outcome o = Outcome::kInapplicable;
      switch (h.criterion) {
        case Criterion::kRankTopK: {
          const auto p = partition(h.selector, keys, e.importance);
          if (const auto r = best_rank(h.selector, p, keys)) {
            o = *r <= h.k ? Outcome::kReplicated : Outcome::kNotReplicated;
          }
          break;
        }
        case Criterion::kRankAbove: {
          const auto p = partition(h.selector, keys, e.importance);
          const auto a = best_rank(h.selector, p, keys);
          const auto b = best_rank(h.other, p, keys);
          if (a && b) o = *a < *b ? Outcome::kReplicated : Outcome::kNotReplicated;
          break;
        }
        case Criterion::kTrendSign: {
          bool any = false;
          double vote = 0.0;
          for (std::size_t j = 0; j < keys.size(); ++j) {
            if (!matches(h.selector, keys[j])) continue;
            any = true;
            const auto& t = e.trends[j];
            if (!t.degenerate && t.r != 0.0) vote += e.importance[j] * (t.r > 0.0 ? 1.0 : -1.0);
          }
          if (any) o = vote * h.sign > 0.0 ? Outcome::kReplicated : Outcome::kNotReplicated;
          break;
        }
      }
      row.push_back(o);
    }
    out.cells.push_back(std::move(row));
  }
  return out;
}

int ReplicationMatrix::replicated_count(const std::string& hypothesis) const {
  const auto it = std::find(hypotheses.begin(), hypotheses.end(), hypothesis);
  require(it != hypotheses.end(), ErrorCode::kMapping, "unknown hypothesis " + hypothesis);
  const auto& row = cells[static_cast<std::size_t>(it - hypotheses.begin())];
  return static_cast<int>(std::count(row.begin(), row.end(), Outcome::kReplicated));
}

void ReplicationMatrix::write_csv(const std::filesystem::path& path) const {
  csv::Table t;
  t.header.push_back("hypothesis");
  for (const auto& m : models) t.header.push_back(m);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    std::vector<std::string> row{hypotheses[i]};
    for (auto o : cells[i]) row.emplace_back(to_string(o));
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

nlohmann::json ReplicationMatrix::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t m = 0; m < models.size(); ++m) row[models[m]] = to_string(cells[i][m]);
    j[hypotheses[i]] = row;
  }
  return j;
}

}  // namespace brainage::agreement
