#pragma once

#include <string>
#include <string_view>

namespace brainage::report {

// Minimal SVG builder; every number is printed with two decimals so output
// is byte-stable.
class Svg {
 public:
  Svg(double width, double height, int out_width, int out_height);

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none");
  void circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke = "none");
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0);
  void polygon(std::string_view points, std::string_view fill, std::string_view stroke);
  // anchor: start, middle or end; rotate in degrees about (x, y).
  void text(double x, double y, std::string_view content, double size = 12.0, std::string_view anchor = "start",
            std::string_view fill = "#000000", double rotate = 0.0);
  std::string finish();

 private:
  std::string body_;
};

std::string num(double v);
std::string escape(std::string_view text);
// Black or white, whichever reads better on `background` (#rrggbb).
std::string_view contrast_text(std::string_view background);

}  // namespace brainage::report
