#include "probekit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "probekit/error.hpp"

namespace probekit::svg {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

Range empty_range() {
  return {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
}

Range finish(Range r) {
  if (!(r.lo <= r.hi)) return {0.0, 1.0};
  if (r.hi - r.lo < 1e-12) {
    r.lo -= 0.5;
    r.hi += 0.5;
  }
  return r;
}

// Step from {1, 2, 5} x 10^k giving roughly five ticks.
std::vector<double> ticks(Range& r) {
  const double raw = (r.hi - r.lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  r.lo = std::floor(r.lo / step + 1e-9) * step;
  r.hi = std::ceil(r.hi / step - 1e-9) * step;
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = r.lo + i * step;
    if (v > r.hi + step * 1e-6) break;
    out.push_back(v);
  }
  return out;
}

class Frame {
 public:
  Frame(Range x, Range y) : x_(x), y_(y) {}

  double px(double v) const { return kLeft + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - (v - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

 private:
  Range x_, y_;
};

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape_xml(title) << "</text>\n";
}

void axes(std::ostringstream& out, const Frame& f, const std::vector<double>& xt, const std::vector<double>& yt,
          const std::string& x_label, const std::string& y_label, bool x_ticks = true) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (double v : yt) {
    out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(f.py(v)) << "\" x2=\"" << num(x1) << "\" y2=\""
        << num(f.py(v)) << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">"
        << tick_label(v) << "</text>\n";
  }
  if (x_ticks) {
    for (double v : xt)
      out << "<text x=\"" << num(f.px(v)) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">"
          << tick_label(v) << "</text>\n";
  }
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y0)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y1)
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 18) << "\" text-anchor=\"middle\">"
      << escape_xml(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << num((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << num((y0 + y1) / 2) << ")\">" << escape_xml(y_label) << "</text>\n";
}

void legend(std::ostringstream& out, const std::vector<std::string>& names) {
  const double x = kWidth - kRight + 14;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 9) << "\" width=\"12\" height=\"12\" fill=\"" << color(i)
        << "\"/>\n";
    out << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y + 1) << "\">" << escape_xml(names[i]) << "</text>\n";
  }
}

}  // namespace

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
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

std::string render(const LineChart& chart) {
  Range xr = empty_range(), yr = empty_range();
  for (const auto& s : chart.series) {
    if (s.x.size() != s.y.size() || (!s.band.empty() && s.band.size() != s.y.size()))
      throw DataError("line series '" + s.label + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      xr.include(s.x[i]);
      const double b = s.band.empty() ? 0.0 : s.band[i];
      yr.include(s.y[i] - b);
      yr.include(s.y[i] + b);
    }
  }
  if (chart.reference_y) yr.include(*chart.reference_y);
  xr = finish(xr);
  yr = finish(yr);
  auto yt = ticks(yr);
  auto xt = ticks(xr);
  Frame f(xr, yr);

  std::ostringstream out;
  open_svg(out, chart.title);
  axes(out, f, xt, yt, chart.x_label, chart.y_label);
  if (chart.reference_y)
    out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(f.py(*chart.reference_y)) << "\" x2=\""
        << num(kWidth - kRight) << "\" y2=\"" << num(f.py(*chart.reference_y))
        << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
  std::vector<std::string> names;
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    names.push_back(s.label);
    if (s.y.empty()) continue;
    if (!s.band.empty()) {
      out << "<polygon fill=\"" << color(k) << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.y.size(); ++i) out << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i] + s.band[i])) << ' ';
      for (std::size_t i = s.y.size(); i-- > 0;) out << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i] - s.band[i])) << ' ';
      out << "\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"" << color(k) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.y.size(); ++i) out << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i])) << ' ';
    out << "\"/>\n";
  }
  legend(out, names);
  out << "</svg>\n";
  return out.str();
}

std::string render(const BarChart& chart) {
  const std::size_t nc = chart.categories.size(), ns = chart.series_names.size();
  if (chart.values.size() != ns) throw DataError("bar chart: values do not match series");
  for (const auto& v : chart.values)
    if (v.size() != nc) throw DataError("bar chart: values do not match categories");
  const bool has_err = !chart.errors.empty();
  if (has_err && chart.errors.size() != ns) throw DataError("bar chart: errors do not match series");

  Range yr{0.0, 0.0};
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t c = 0; c < nc; ++c) {
      const double e = has_err ? chart.errors[s][c] : 0.0;
      yr.include(chart.values[s][c] + e);
      yr.include(chart.values[s][c] - e);
    }
  yr = finish(yr);
  auto yt = ticks(yr);
  Range xr{0.0, static_cast<double>(std::max<std::size_t>(nc, 1))};
  Frame f(xr, yr);

  std::ostringstream out;
  open_svg(out, chart.title);
  axes(out, f, {}, yt, "", chart.y_label, false);
  const double slot = f.px(1.0) - f.px(0.0);
  const double bar = slot * 0.8 / static_cast<double>(std::max<std::size_t>(ns, 1));
  for (std::size_t c = 0; c < nc; ++c) {
    const double left = f.px(static_cast<double>(c)) + slot * 0.1;
    for (std::size_t s = 0; s < ns; ++s) {
      const double v = chart.values[s][c];
      const double top = f.py(std::max(v, 0.0)), base = f.py(std::min(v, 0.0));
      const double x = left + bar * static_cast<double>(s);
      out << "<rect x=\"" << num(x) << "\" y=\"" << num(top) << "\" width=\"" << num(bar) << "\" height=\""
          << num(base - top) << "\" fill=\"" << color(s) << "\"/>\n";
      if (has_err) {
        const double e = chart.errors[s][c], cx = x + bar / 2;
        out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(v - e)) << "\" x2=\"" << num(cx) << "\" y2=\""
            << num(f.py(v + e)) << "\" stroke=\"black\"/>\n";
      }
    }
    out << "<text x=\"" << num(left + slot * 0.4) << "\" y=\"" << num(kHeight - kBottom + 16)
        << "\" text-anchor=\"middle\">" << escape_xml(chart.categories[c]) << "</text>\n";
  }
  legend(out, chart.series_names);
  out << "</svg>\n";
  return out.str();
}

std::string render(const ScatterChart& chart) {
  Range xr = empty_range(), yr = empty_range();
  for (const auto& p : chart.points) {
    xr.include(p.x);
    yr.include(p.y);
  }
  xr = finish(xr);
  yr = finish(yr);
  if (chart.fit) {
    yr.include(chart.fit->slope * xr.lo + chart.fit->intercept);
    yr.include(chart.fit->slope * xr.hi + chart.fit->intercept);
  }
  auto xt = ticks(xr);
  auto yt = ticks(yr);
  Frame f(xr, yr);

  std::ostringstream out;
  open_svg(out, chart.title);
  axes(out, f, xt, yt, chart.x_label, chart.y_label);
  if (chart.fit) {
    const auto& fit = *chart.fit;
    out << "<line x1=\"" << num(f.px(xr.lo)) << "\" y1=\"" << num(f.py(fit.slope * xr.lo + fit.intercept))
        << "\" x2=\"" << num(f.px(xr.hi)) << "\" y2=\"" << num(f.py(fit.slope * xr.hi + fit.intercept))
        << "\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "R\xC2\xB2 = %.2f", fit.r_squared);
    out << "<text x=\"" << num(kLeft + 10) << "\" y=\"" << num(kTop + 14) << "\">" << buf << "</text>\n";
  }
  for (const auto& p : chart.points) {
    out << "<circle cx=\"" << num(f.px(p.x)) << "\" cy=\"" << num(f.py(p.y)) << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
    out << "<text x=\"" << num(f.px(p.x) + 6) << "\" y=\"" << num(f.py(p.y) - 6) << "\" font-size=\"10\">"
        << escape_xml(p.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace probekit::svg
