#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>

#include "brainage/agreement.hpp"
#include "brainage/bundle.hpp"
#include "brainage/dataset.hpp"
#include "brainage/error.hpp"
#include "brainage/explain.hpp"
#include "brainage/report.hpp"
#include "svg.hpp"

namespace brainage::report {

namespace fs = std::filesystem;

namespace {

// Decimal places giving about three significant digits for `magnitude`.
int decimals_for(double magnitude) {
  if (!(magnitude > 0.0)) return 2;
  return std::clamp(2 - static_cast<int>(std::floor(std::log10(magnitude))), 0, 8);
}

ColorScale scale_or(const RenderSpec& spec, ColorScale fallback) { return spec.scale.value_or(fallback); }

double unit(const ColorScale& s, double v) { return (v - s.min) / (s.max - s.min); }

explain::GroupImportance read_importance(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kRender, "cannot open " + path.string());
  try {
    return explain::GroupImportance::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kRender, path.string() + ": " + e.what());
  }
}

void color_bar(Svg& svg, double x, double y, double h, const ColorScale& s) {
  const int steps = 20;
  for (int i = 0; i < steps; ++i) {
    const double t = 1.0 - (i + 0.5) / steps;
    svg.rect(x, y + h * i / steps, 14, h / steps + 0.5, palette_color(s.palette, t));
  }
  svg.rect(x, y, 14, h, "none", "#444444");
  const int d = std::max(decimals_for(std::max(std::abs(s.min), std::abs(s.max))), 2);
  svg.text(x + 18, y + 4, round_half_even(s.max, d), 10);
  svg.text(x + 18, y + h / 2 + 4, round_half_even((s.min + s.max) / 2.0, d), 10);
  svg.text(x + 18, y + h + 4, round_half_even(s.min, d), 10);
}

std::string heatmap(const RenderSpec& spec) {
  const auto m = agreement::AgreementMatrix::read_csv(spec.input, explain::GroupingKind::kBand);
  require(!m.models.empty(), ErrorCode::kRender, "empty agreement matrix");
  const auto s = scale_or(spec, {-1.0, 1.0, "coolwarm"});
  const double cell = 46, left = 120, top = 130;
  const double n = static_cast<double>(m.models.size());
  const double width = left + n * cell + 90, height = top + n * cell + 20;
  Svg svg(width, height, spec.width, spec.height);
  svg.text(width / 2, 24, spec.title.empty() ? "SHAP agreement (Spearman)" : spec.title, 15, "middle");
  for (std::size_t i = 0; i < m.models.size(); ++i) {
    const double y = top + cell * static_cast<double>(i);
    svg.text(left - 6, y + cell / 2 + 4, m.models[i], 11, "end");
    svg.text(left + cell * static_cast<double>(i) + cell / 2 + 4, top - 6, m.models[i], 11, "start", "#000000", -60);
    for (std::size_t j = 0; j < m.models.size(); ++j) {
      const double v = m.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const auto fill = palette_color(s.palette, unit(s, v));
      const double x = left + cell * static_cast<double>(j);
      svg.rect(x, y, cell, cell, fill, "#ffffff");
      svg.text(x + cell / 2, y + cell / 2 + 4, round_half_even(v, 2), 11, "middle", contrast_text(fill));
    }
  }
  color_bar(svg, left + n * cell + 16, top, n * cell, s);
  return svg.finish();
}

std::string ranked_bars(const RenderSpec& spec) {
  const auto gi = read_importance(spec.input);
  require(!gi.groups.empty() && gi.scores.size() == gi.groups.size(), ErrorCode::kRender,
          "group importance has no scores");
  std::vector<std::size_t> order(gi.groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return gi.scores[a] > gi.scores[b]; });
  const double top_score = gi.scores[order.front()];
  const auto s = scale_or(spec, {0.0, 1.0, "viridis"});
  const int d = decimals_for(top_score);
  const double bar_h = 18, gap = 6, left = 170, bar_max = 360, top = 44;
  const double height = top + static_cast<double>(order.size()) * (bar_h + gap) + 16;
  const double width = left + bar_max + 90;
  Svg svg(width, height, spec.width, spec.height);
  svg.text(width / 2, 24,
           spec.title.empty() ? "Ranked group importance (" + std::string(explain::to_string(gi.kind)) + ")" : spec.title,
           15, "middle");
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = order[k];
    const double y = top + static_cast<double>(k) * (bar_h + gap);
    const double frac = top_score > 0.0 ? gi.scores[i] / top_score : 0.0;
    svg.text(left - 8, y + bar_h / 2 + 4, gi.groups[i], 11, "end");
    svg.rect(left, y, std::max(frac, 0.0) * bar_max, bar_h, palette_color(s.palette, 0.25 + 0.6 * frac));
    svg.text(left + std::max(frac, 0.0) * bar_max + 6, y + bar_h / 2 + 4, round_half_even(gi.scores[i], d), 10);
  }
  svg.line(left, top - 4, left, height - 12, "#444444");
  return svg.finish();
}

std::string topo_map(const RenderSpec& spec) {
  const auto gi = read_importance(spec.input);
  require(gi.kind == explain::GroupingKind::kRegion, ErrorCode::kRender, "topo map needs region importance");
  const auto montage = io::read_montage(spec.montage);
  const auto regions = io::read_regions(spec.regions);
  const auto centroids = region_centroids(montage, regions);
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < regions.regions.size(); ++r) index[regions.regions[r].name] = r;
  double top_score = 0.0;
  for (double v : gi.scores) top_score = std::max(top_score, v);
  const auto s = scale_or(spec, {0.0, 1.0, "viridis"});

  const double radius = 170, cx = 210, cy = 230, width = 500, height = 440;
  Svg svg(width, height, spec.width, spec.height);
  svg.text(width / 2, 26, spec.title.empty() ? "Normalized regional SHAP importance" : spec.title, 15, "middle");
  svg.polygon(num(cx - 14) + "," + num(cy - radius + 2) + " " + num(cx) + "," + num(cy - radius - 18) + " " +
                  num(cx + 14) + "," + num(cy - radius + 2),
              "#ffffff", "#444444");
  svg.circle(cx, cy, radius, "#f7f7f7", "#444444");
  for (std::size_t g = 0; g < gi.groups.size(); ++g) {
    const auto it = index.find(gi.groups[g]);
    require(it != index.end(), ErrorCode::kRender, "region " + gi.groups[g] + " is not in the region file");
    const Eigen::Vector3d c = centroids[it->second];
    // Azimuthal equidistant projection from the vertex.
    const double polar = std::acos(std::clamp(c.z(), -1.0, 1.0));
    const double planar = std::hypot(c.x(), c.y());
    const double r = std::min(polar / (std::numbers::pi / 2.0), 1.05) * radius * 0.88;
    const double px = cx + (planar > 0 ? r * c.x() / planar : 0.0);
    const double py = cy - (planar > 0 ? r * c.y() / planar : 0.0);
    const double norm = top_score > 0.0 ? gi.scores[g] / top_score : 0.0;
    const auto fill = palette_color(s.palette, unit(s, norm));
    svg.circle(px, py, 22, fill, "#333333");
    svg.text(px, py + 4, round_half_even(norm, 2), 10, "middle", contrast_text(fill));
    svg.text(px, py + 34, gi.groups[g], 10, "middle");
  }
  color_bar(svg, cx + radius + 40, cy - radius + 20, 2 * radius - 40, s);
  return svg.finish();
}

std::string shap_scatter(const RenderSpec& spec) {
  const auto shap = explain::ShapMatrix::read(spec.input.parent_path(), spec.input.stem().string());
  const auto fm = read_feature_csv(spec.features);
  std::map<std::string, std::size_t> subject_row;
  for (std::size_t i = 0; i < fm.subject_ids.size(); ++i) subject_row[fm.subject_ids[i]] = i;
  const auto fm_columns = fm.column_names();
  std::map<std::string, std::size_t> fm_column;
  for (std::size_t j = 0; j < fm_columns.size(); ++j) fm_column[fm_columns[j]] = j;

  const std::string suffix = "_" + spec.feature;
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < shap.columns.size(); ++j) {
    const auto& c = shap.columns[j];
    if (c.size() > suffix.size() && c.compare(c.size() - suffix.size(), suffix.size(), suffix) == 0) cols.push_back(j);
  }
  require(!cols.empty(), ErrorCode::kRender, "no SHAP column ends with " + suffix);
  const Eigen::VectorXd mean_abs = shap.phi.cwiseAbs().colwise().mean();
  std::stable_sort(cols.begin(), cols.end(), [&](auto a, auto b) {
    return mean_abs(static_cast<Eigen::Index>(a)) > mean_abs(static_cast<Eigen::Index>(b));
  });
  if (cols.size() > static_cast<std::size_t>(std::max(spec.max_rows, 1))) cols.resize(static_cast<std::size_t>(spec.max_rows));

  std::vector<std::size_t> sample_rows;
  for (const auto& id : shap.sample_ids) {
    const auto it = subject_row.find(id);
    require(it != subject_row.end(), ErrorCode::kRender, "subject " + id + " is missing from the feature file");
    sample_rows.push_back(it->second);
  }
  double span = 0.0;
  for (auto j : cols) span = std::max(span, shap.phi.col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff());
  if (!(span > 0.0)) span = 1.0;
  const auto s = scale_or(spec, {0.0, 1.0, "coolwarm"});

  const double left = 200, plot_w = 420, row_h = 30, top = 50;
  const double height = top + static_cast<double>(cols.size()) * row_h + 50, width = left + plot_w + 90;
  Svg svg(width, height, spec.width, spec.height);
  svg.text(width / 2, 24, spec.title.empty() ? shap.model + ": " + spec.feature : spec.title, 15, "middle");
  auto x_of = [&](double phi) { return left + (phi / span + 1.0) / 2.0 * plot_w; };
  const double bottom = top + static_cast<double>(cols.size()) * row_h;
  svg.line(x_of(0.0), top - 6, x_of(0.0), bottom, "#999999");
  const int d = decimals_for(span);
  for (double tick : {-span, 0.0, span}) {
    svg.line(x_of(tick), bottom, x_of(tick), bottom + 5, "#444444");
    svg.text(x_of(tick), bottom + 18, round_half_even(tick, d), 10, "middle");
  }
  svg.text(left + plot_w / 2, bottom + 36, "SHAP value", 11, "middle");

  for (std::size_t r = 0; r < cols.size(); ++r) {
    const auto j = cols[r];
    const auto desc = FeatureDescriptor::parse(shap.columns[j]);
    const double cy = top + (static_cast<double>(r) + 0.5) * row_h;
    svg.text(left - 10, cy + 4, std::string(to_string(desc.state)) + " " + desc.channel, 11, "end");
    const auto fj = fm_column.find(shap.columns[j]);
    require(fj != fm_column.end(), ErrorCode::kRender, "column " + shap.columns[j] + " is missing from the feature file");
    std::vector<double> values;
    for (auto row : sample_rows) values.push_back(fm.rows(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(fj->second)));
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    // Points sorted by phi; those sharing a 4-px bin are stacked outwards
    // from the row centre in rank order.
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto col = shap.phi.col(static_cast<Eigen::Index>(j));
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return col(static_cast<Eigen::Index>(a)) < col(static_cast<Eigen::Index>(b)); });
    std::map<long, int> bin_count;
    for (auto i : order) {
      const double x = x_of(col(static_cast<Eigen::Index>(i)));
      const int k = bin_count[std::lround(x / 4.0)]++;
      const double offset = (k % 2 == 0 ? 1.0 : -1.0) * ((k + 1) / 2) * 3.0;
      const double t = *hi > *lo ? (values[i] - *lo) / (*hi - *lo) : 0.5;
      svg.circle(x, cy + std::clamp(offset, -row_h / 2 + 3, row_h / 2 - 3), 2.5, palette_color(s.palette, unit(s, t)));
    }
  }
  svg.text(width - 40, top - 10, "feature value", 10, "middle");
  color_bar(svg, width - 60, top, std::max(bottom - top, 60.0), {0.0, 1.0, s.palette});
  return svg.finish();
}

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::kHeatmap: return "heatmap";
    case Kind::kRankedBars: return "ranked_bars";
    case Kind::kTopoMap: return "topo_map";
    case Kind::kShapScatter: return "shap_scatter";
  }
  return "heatmap";
}

Kind parse_kind(std::string_view text) {
  for (Kind k : {Kind::kHeatmap, Kind::kRankedBars, Kind::kTopoMap, Kind::kShapScatter}) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorCode::kParameter, "unknown report kind: " + std::string(text));
}

void RenderSpec::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::kRender, what); };
  check(fs::is_regular_file(input), "input " + input.string() + " does not exist");
  if (scale) {
    check(scale->min < scale->max, "color scale needs min < max");
    palette_color(scale->palette, 0.0);
  }
  check(width >= 0 && height >= 0, "dimensions must be non-negative");
  if (kind == Kind::kTopoMap) {
    check(fs::is_regular_file(montage), "topo map needs a montage file");
    check(fs::is_regular_file(regions), "topo map needs a region file");
  }
  if (kind == Kind::kShapScatter) {
    check(fs::is_regular_file(features), "shap scatter needs a feature file");
    check(!feature.empty(), "shap scatter needs a feature suffix");
  }
}

std::string render(const RenderSpec& spec) {
  spec.validate();
  try {
    switch (spec.kind) {
      case Kind::kHeatmap: return heatmap(spec);
      case Kind::kRankedBars: return ranked_bars(spec);
      case Kind::kTopoMap: return topo_map(spec);
      case Kind::kShapScatter: return shap_scatter(spec);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kRender) throw;
    fail(ErrorCode::kRender, std::string(to_string(spec.kind)) + ": " + e.what());
  }
  fail(ErrorCode::kRender, "unknown report kind");
}

void render_to_file(const RenderSpec& spec, const fs::path& out) {
  const std::string doc = render(spec);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const fs::path tmp = out.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << doc;
    require(static_cast<bool>(f), ErrorCode::kIo, "write failed for " + out.string());
  }
  fs::rename(tmp, out);
}

}  // namespace brainage::report
