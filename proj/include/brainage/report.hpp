#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace brainage::report {

enum class Kind { kHeatmap, kRankedBars, kTopoMap, kShapScatter };
std::string_view to_string(Kind kind);
Kind parse_kind(std::string_view text);  // throws kParameter

struct ColorScale {
  double min = 0.0;
  double max = 1.0;
  std::string palette = "viridis";  // viridis, coolwarm or greys
};

// What to draw and from which artifact.
//  heatmap:      agreement matrix CSV
//  ranked_bars:  group importance JSON
//  topo_map:     region group importance JSON + montage and region files
//  shap_scatter: SHAP matrix CSV (<model>.csv) + feature CSV; `feature` is
//                a column suffix such as "alpha_pow_freq_bands", one row is
//                drawn per matching column (state x channel)
struct RenderSpec {
  Kind kind = Kind::kHeatmap;
  std::filesystem::path input;
  std::optional<ColorScale> scale;  // default depends on the kind
  int width = 0;                    // 0 = derived from the content
  int height = 0;
  std::filesystem::path montage;
  std::filesystem::path regions;
  std::filesystem::path features;
  std::string feature;
  int max_rows = 24;
  std::string title;

  // Inputs exist, scale min < max, palette known, kind-specific paths set.
  // Throws kRender.
  void validate() const;
};

// Self-contained SVG document. Throws kRender on any schema mismatch.
std::string render(const RenderSpec& spec);
// Renders fully before writing; on failure no file is left behind.
void render_to_file(const RenderSpec& spec, const std::filesystem::path& out);

// `value` printed with `decimals` places, rounding the shortest decimal text
// of the value half to even ("0.125" -> "0.12", "0.135" -> "0.14").
std::string round_half_even(double value, int decimals);

// "#rrggbb" for t in [0, 1] (clamped) along the palette.
std::string palette_color(std::string_view palette, double t);

}  // namespace brainage::report
