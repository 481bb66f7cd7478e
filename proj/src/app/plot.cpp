#include "ramanmix/app/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ramanmix/core/error.hpp"

namespace ramanmix::app {

namespace {

constexpr std::array<Rgb, 9> kViridis{{{0x44, 0x01, 0x54},
                                       {0x47, 0x2c, 0x7a},
                                       {0x3b, 0x51, 0x8b},
                                       {0x2c, 0x71, 0x8e},
                                       {0x21, 0x90, 0x8d},
                                       {0x27, 0xad, 0x81},
                                       {0x5c, 0xc8, 0x63},
                                       {0xaa, 0xdc, 0x32},
                                       {0xfd, 0xe7, 0x25}}};

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v, const char* fmt = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
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

std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w, "%.0f") + "\" height=\"" + num(h, "%.0f") +
         "\" viewBox=\"0 0 " + num(w, "%.0f") + " " + num(h, "%.0f") +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
}

// About five round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (f * mag >= raw) {
      step = f * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
    t.push_back(std::abs(v) < 1e-9 * step ? 0.0 : v);
  return t;
}

// Multiples of powers of ten inside [lo, hi] given in log10 units: decades
// only for wide ranges, 1-2-5 for medium, every integer multiple for narrow.
std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> t;
  const double span = hi - lo;
  for (double k = std::floor(lo); k <= std::ceil(hi); k += 1.0)
    for (double m = 1.0; m < 10.0; m += 1.0) {
      if (span > 3.0 && m != 1.0) continue;
      if (span >= 1.0 && m != 1.0 && m != 2.0 && m != 5.0) continue;
      const double v = k + std::log10(m);
      if (v >= lo && v <= hi) t.push_back(v);
    }
  return t.size() >= 2 ? t : ticks(lo, hi);
}

}  // namespace

Rgb colormap(double t) {
  if (!(t > 0.0)) return kViridis.front();
  if (t >= 1.0) return kViridis.back();
  const double s = t * static_cast<double>(kViridis.size() - 1);
  const auto i = static_cast<std::size_t>(s);
  const double f = s - static_cast<double>(i);
  const Rgb a = kViridis[i], b = kViridis[i + 1];
  auto mix = [f](std::uint8_t x, std::uint8_t y) {
    return static_cast<std::uint8_t>(std::lround(x + f * (static_cast<double>(y) - x)));
  };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

std::string heatmap_svg(const RowMatrix& values, const std::string& title) {
  if (values.size() == 0) throw ConfigError("heatmap: empty map");
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  const double range = hi > lo ? hi - lo : 1.0;
  const auto rows = static_cast<double>(values.rows()), cols = static_cast<double>(values.cols());
  const double cell = std::max(1.0, std::floor(400.0 / std::max(rows, cols)));
  const double left = 20, top = 40, bar = 16;
  const double w = left + cols * cell + 30 + bar + 70, h = top + rows * cell + 30;

  std::ostringstream os;
  os << header(w, h) << text(left + cols * cell / 2, 24, title);
  os << "<g shape-rendering=\"crispEdges\">\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      os << "<rect x=\"" << num(left + static_cast<double>(c) * cell) << "\" y=\""
         << num(top + static_cast<double>(r) * cell) << "\" width=\"" << num(cell) << "\" height=\"" << num(cell)
         << "\" fill=\"" << hex(colormap((values(r, c) - lo) / range)) << "\"/>\n";

  // colorbar, top is the maximum
  const double bx = left + cols * cell + 30, bh = rows * cell;
  const int steps = 64;
  for (int k = 0; k < steps; ++k)
    os << "<rect x=\"" << num(bx) << "\" y=\"" << num(top + bh * k / steps) << "\" width=\"" << num(bar)
       << "\" height=\"" << num(bh / steps + 0.5) << "\" fill=\"" << hex(colormap(1.0 - (k + 0.5) / steps))
       << "\"/>\n";
  os << "</g>\n";
  os << text(bx + bar + 4, top + 10, num(hi, "%.3g"), "start") << text(bx + bar + 4, top + bh, num(lo, "%.3g"), "start");
  os << "</svg>\n";
  return os.str();
}

std::string line_plot_svg(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                          const std::string& ylabel, bool loglog) {
  auto tx = [loglog](double v) { return loglog ? std::log10(v) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ConfigError("line plot: series '" + s.label + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (loglog && (s.x[i] <= 0 || s.y[i] <= 0)) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, tx(s.y[i]));
      y1 = std::max(y1, tx(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) throw ConfigError("line plot: no points to draw");
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double w = 640, h = 400, l = 70, r = 20, t = 40, b = 50;
  const double pw = w - l - r, ph = h - t - b;
  auto px = [&](double v) { return l + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return t + ph - (v - y0) / (y1 - y0) * ph; };
  auto label = [loglog](double v) { return loglog ? num(std::pow(10.0, v), "%.3g") : num(v, "%.4g"); };

  std::ostringstream os;
  os << header(w, h) << text(l + pw / 2, 24, title);
  os << "<rect x=\"" << num(l) << "\" y=\"" << num(t) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : loglog ? log_ticks(x0, x1) : ticks(x0, x1)) {
    os << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(t + ph) << "\" x2=\"" << num(px(v)) << "\" y2=\""
       << num(t + ph + 5) << "\" stroke=\"black\"/>\n";
    os << text(px(v), t + ph + 18, label(v));
  }
  for (double v : loglog ? log_ticks(y0, y1) : ticks(y0, y1)) {
    os << "<line x1=\"" << num(l - 5) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(l) << "\" y2=\""
       << num(py(v)) << "\" stroke=\"black\"/>\n";
    os << text(l - 8, py(v) + 4, label(v), "end");
  }
  os << text(l + pw / 2, h - 10, xlabel);
  os << "<text x=\"16\" y=\"" << num(t + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num(t + ph / 2) << ")\">" << escape(ylabel) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (loglog && (s.x[i] <= 0 || s.y[i] <= 0)) continue;
      os << num(px(tx(s.x[i]))) << ',' << num(py(tx(s.y[i]))) << ' ';
    }
    os << "\"/>\n";
    if (series.size() > 1) {
      const double ly = t + 14 + 16 * static_cast<double>(k);
      os << "<line x1=\"" << num(l + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(l + 30) << "\" y2=\""
         << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      os << text(l + 36, ly, s.label, "start");
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << s;
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace ramanmix::app
