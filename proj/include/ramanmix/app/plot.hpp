#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ramanmix/core/dataset.hpp"

namespace ramanmix::app {

struct Rgb {
  std::uint8_t r, g, b;
};

/// Viridis, linearly interpolated between nine stops; t is clamped to [0, 1].
Rgb colormap(double t);

/// One cell per entry, normalized to the map's own [min, max].
std::string heatmap_svg(const RowMatrix& values, const std::string& title);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Log-log axes drop non-positive points.
std::string line_plot_svg(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                          const std::string& ylabel, bool loglog = false);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ramanmix::app
