#include "lunet/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "lunet/csv.hpp"

namespace lunet::svg {

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return fmt_double(std::round(v * 100.0) / 100.0); }

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

}  // namespace

std::string render(const LineChart& chart) {
  const double left = 60, right = 150, top = 30, bottom = 45;
  const double pw = chart.width - left - right;
  const double ph = chart.height - top - bottom;

  Range rx, ry;
  for (const auto& s : chart.series) {
    for (double v : s.x) rx.add(v);
    for (double v : s.y) ry.add(v);
  }
  rx.finish();
  ry.finish();

  auto sx = [&](double v) {
    double t = (v - rx.lo) / (rx.hi - rx.lo);
    if (chart.reverse_x) t = 1.0 - t;
    return left + t * pw;
  };
  auto sy = [&](double v) { return top + (1.0 - (v - ry.lo) / (ry.hi - ry.lo)) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << chart.width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
     << escape(chart.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double fx = rx.lo + (rx.hi - rx.lo) * i / 4.0;
    const double fy = ry.lo + (ry.hi - ry.lo) * i / 4.0;
    os << "<text x=\"" << num(sx(fx)) << "\" y=\"" << num(top + ph + 15) << "\" text-anchor=\"middle\">"
       << num(fx) << "</text>\n";
    os << "<text x=\"" << num(left - 5) << "\" y=\"" << num(sy(fy) + 4) << "\" text-anchor=\"end\">" << num(fy)
       << "</text>\n";
    os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << num(sy(fy)) << "\" y2=\""
       << num(sy(fy)) << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << chart.height - 8 << "\" text-anchor=\"middle\">"
     << escape(chart.x_label) << "</text>\n";
  os << "<text transform=\"translate(14," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    const std::size_t n = std::min(s.x.size(), s.y.size());
    bool first = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << (first ? "" : " ") << num(sx(s.x[i])) << "," << num(sy(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(k) + 8;
    os << "<line x1=\"" << num(left + pw + 10) << "\" x2=\"" << num(left + pw + 28) << "\" y1=\"" << num(ly)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(left + pw + 32) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lunet::svg
