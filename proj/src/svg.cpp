#include "sfpca/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sfpca/errors.hpp"
#include "sfpca/io.hpp"

namespace sfpca {

namespace {

constexpr double kWidth = 720.0, kHeight = 480.0;
constexpr double kLeft = 64.0, kRight = 20.0, kTop = 40.0, kBottom = 48.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double m = 0.04 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

/// Round tick positions covering [lo, hi] with about n intervals.
std::vector<double> ticks(double lo, double hi, int n) {
  const double span = hi - lo;
  const double raw = span / n;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (mag * mult >= raw) {
      step = mag * mult;
      break;
    }
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  }
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  Range xr, yr;
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size()) throw SpecError("series x/y length mismatch");
    for (int i = 0; i < s.x.size(); ++i) {
      xr.add(s.x[i]);
      yr.add(s.y[i]);
    }
    for (int i = 0; i < s.band_low.size(); ++i) yr.add(s.band_low[i]);
    for (int i = 0; i < s.band_high.size(); ++i) yr.add(s.band_high[i]);
  }
  for (double h : spec.h_lines) yr.add(h);
  xr.pad();
  yr.pad();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << spec.title << "</text>\n";

  for (double t : ticks(xr.lo, xr.hi, 5)) {
    const double x = px(t);
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(x)
        << "\" y2=\"" << num(kTop + ph) << "\" stroke=\"#eeeeee\"/>\n";
    out << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(t) << "</text>\n";
  }
  for (double t : ticks(yr.lo, yr.hi, 5)) {
    const double y = py(t);
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(kLeft + pw) << "\" y2=\"" << num(y) << "\" stroke=\"#eeeeee\"/>\n";
    out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << tick_label(t) << "</text>\n";
  }

  for (const auto& s : spec.series) {
    if (s.band_low.size() == s.x.size() && s.band_high.size() == s.x.size() && s.x.size() > 1) {
      out << "<path d=\"M";
      for (int i = 0; i < s.x.size(); ++i) {
        out << num(px(s.x[i])) << ' ' << num(py(s.band_low[i])) << ' '
            << (i + 1 < s.x.size() ? "L" : "");
      }
      for (int i = static_cast<int>(s.x.size()) - 1; i >= 0; --i) {
        out << "L" << num(px(s.x[i])) << ' ' << num(py(s.band_high[i])) << ' ';
      }
      out << "Z\" fill=\"" << s.band_color << "\" stroke=\"none\" opacity=\"0.8\"/>\n";
    }
  }
  for (double h : spec.h_lines) {
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(h)) << "\" x2=\""
        << num(kLeft + pw) << "\" y2=\"" << num(py(h))
        << "\" stroke=\"#888888\" stroke-dasharray=\"6 4\"/>\n";
  }
  for (const auto& s : spec.series) {
    if (s.points) {
      for (int i = 0; i < s.x.size(); ++i) {
        out << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
            << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
      }
    } else if (s.x.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width
          << "\" points=\"";
      for (int i = 0; i < s.x.size(); ++i) {
        out << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
      }
      out << "\"/>\n";
    }
  }

  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
      << ph << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << spec.x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << kTop + ph / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 16 " << kTop + ph / 2 << ")\">" << spec.y_label
      << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

void write_svg(const std::string& path, const PlotSpec& spec) {
  atomic_write(path, render_svg(spec));
}

}  // namespace sfpca
