#include "svg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "brainage/error.hpp"
#include "brainage/report.hpp"

namespace brainage::report {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

Svg::Svg(double width, double height, int out_width, int out_height) {
  const std::string w = out_width > 0 ? std::to_string(out_width) : num(width);
  const std::string h = out_height > 0 ? std::to_string(out_height) : num(height);
  body_ = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + w +
          "\" height=\"" + h + "\" viewBox=\"0 0 " + num(width) + " " + num(height) +
          "\" font-family=\"Helvetica, Arial, sans-serif\">\n";
  rect(0, 0, width, height, "#ffffff");
}

void Svg::rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke) {
  body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" fill=\"" + std::string(fill) + "\" stroke=\"" + std::string(stroke) + "\"/>\n";
}

void Svg::circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke) {
  body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" + std::string(fill) +
           "\" stroke=\"" + std::string(stroke) + "\"/>\n";
}

void Svg::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width) {
  body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
           "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(width) + "\"/>\n";
}

void Svg::polygon(std::string_view points, std::string_view fill, std::string_view stroke) {
  body_ += "<polygon points=\"" + std::string(points) + "\" fill=\"" + std::string(fill) + "\" stroke=\"" +
           std::string(stroke) + "\"/>\n";
}

void Svg::text(double x, double y, std::string_view content, double size, std::string_view anchor,
               std::string_view fill, double rotate) {
  body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) + "\" text-anchor=\"" +
           std::string(anchor) + "\" fill=\"" + std::string(fill) + "\"";
  if (rotate != 0.0) body_ += " transform=\"rotate(" + num(rotate) + " " + num(x) + " " + num(y) + ")\"";
  body_ += ">" + escape(content) + "</text>\n";
}

std::string Svg::finish() { return body_ + "</svg>\n"; }

std::string_view contrast_text(std::string_view background) {
  auto channel = [&](std::size_t at) {
    int v = 0;
    std::from_chars(background.data() + at, background.data() + at + 2, v, 16);
    return v / 255.0;
  };
  const double luminance = 0.299 * channel(1) + 0.587 * channel(3) + 0.114 * channel(5);
  return luminance < 0.5 ? "#ffffff" : "#000000";
}

std::string round_half_even(double value, int decimals) {
  require(std::isfinite(value), ErrorCode::kRender, "cannot label a non-finite value");
  require(decimals >= 0 && decimals <= 17, ErrorCode::kParameter, "decimals out of range");
  // Shortest round-trip text in scientific form: d.ddddde[+-]xx.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, std::abs(value), std::chars_format::scientific);
  const std::string sci(buf, res.ptr);
  const auto e_at = sci.find('e');
  std::string digits;
  for (std::size_t i = 0; i < e_at; ++i) {
    if (sci[i] != '.') digits += sci[i];
  }
  const int exponent = std::stoi(sci.substr(e_at + 1));
  // value = 0.digits * 10^(exponent + 1)
  const int point = exponent + 1;
  int keep = point + decimals;
  if (keep < 1) {
    // Leading zeros so that at least one digit is kept; zero is even.
    digits.insert(0, static_cast<std::size_t>(1 - keep), '0');
    keep = 1;
  }

  std::string kept;
  if (static_cast<std::size_t>(keep) >= digits.size()) {
    kept = digits + std::string(static_cast<std::size_t>(keep) - digits.size(), '0');
  } else {
    kept = digits.substr(0, static_cast<std::size_t>(keep));
    const char first = digits[static_cast<std::size_t>(keep)];
    const bool rest_nonzero =
        digits.find_first_not_of('0', static_cast<std::size_t>(keep) + 1) != std::string::npos;
    const bool odd = (kept.back() - '0') % 2 == 1;
    if (first > '5' || (first == '5' && (rest_nonzero || odd))) {
      int i = static_cast<int>(kept.size()) - 1;
      while (i >= 0 && kept[static_cast<std::size_t>(i)] == '9') kept[static_cast<std::size_t>(i--)] = '0';
      if (i < 0) {
        kept.insert(kept.begin(), '1');
      } else {
        ++kept[static_cast<std::size_t>(i)];
      }
    }
  }
  // kept holds the value in units of 10^-decimals.
  if (kept.size() <= static_cast<std::size_t>(decimals)) kept.insert(0, static_cast<std::size_t>(decimals) + 1 - kept.size(), '0');
  std::string out = kept.substr(0, kept.size() - static_cast<std::size_t>(decimals));
  if (decimals > 0) out += "." + kept.substr(kept.size() - static_cast<std::size_t>(decimals));
  const bool zero = out.find_first_not_of("0.") == std::string::npos;
  return (value < 0.0 && !zero ? "-" : "") + out;
}

std::string palette_color(std::string_view palette, double t) {
  using Stop = std::array<double, 3>;
  static const std::vector<Stop> viridis{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  static const std::vector<Stop> coolwarm{{59, 76, 192}, {141, 176, 254}, {221, 221, 221}, {244, 154, 123}, {180, 4, 38}};
  static const std::vector<Stop> greys{{255, 255, 255}, {0, 0, 0}};
  const std::vector<Stop>* stops = nullptr;
  if (palette == "viridis") stops = &viridis;
  if (palette == "coolwarm") stops = &coolwarm;
  if (palette == "greys") stops = &greys;
  require(stops != nullptr, ErrorCode::kRender, "unknown palette: " + std::string(palette));
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * static_cast<double>(stops->size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), stops->size() - 2);
  const double f = pos - static_cast<double>(i);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround((*stops)[i][static_cast<std::size_t>(c)] * (1.0 - f) +
                                          (*stops)[i + 1][static_cast<std::size_t>(c)] * f));
  }
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace brainage::report
