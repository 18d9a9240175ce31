#include "toc/train/plots.hpp"

#include <algorithm>
#include <cmath>

#include "toc/core/types.hpp"
#include "toc/data/raster.hpp"

namespace toc::train {

void plot_histogram(const std::vector<double>& values, int bins, double lo, double hi,
                    const std::string& path) {
  if (bins < 1 || !(hi > lo)) throw std::invalid_argument("plot_histogram: bad range");
  std::vector<int> counts(static_cast<size_t>(bins), 0);
  for (double v : values) {
    const double u = (v - lo) / (hi - lo);
    const int b = std::clamp(static_cast<int>(u * bins), 0, bins - 1);
    ++counts[static_cast<size_t>(b)];
  }
  const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));

  const int margin = 12, bar_w = 14, plot_h = 160;
  const int width = 2 * margin + bins * bar_w;
  const int height = 2 * margin + plot_h;
  auto img = toc::GrayImage::blank(width, height);
  toc::data::fill_rect(img, margin - 1, margin - 1, width - margin + 1, margin, 80);
  toc::data::fill_rect(img, margin - 1, height - margin, width - margin + 1,
                       height - margin + 1, 80);
  for (int b = 0; b < bins; ++b) {
    const int h = counts[static_cast<size_t>(b)] * plot_h / peak;
    const int x0 = margin + b * bar_w;
    toc::data::fill_rect(img, x0 + 1, height - margin - h, x0 + bar_w - 1,
                         height - margin, 220);
  }
  toc::data::write_png(path, img);
}

void plot_attention(const std::vector<Eigen::VectorXd>& attention,
                    const std::string& path) {
  if (attention.empty()) throw std::invalid_argument("plot_attention: no steps");
  const int rows = static_cast<int>(attention.size());
  Eigen::Index cols = 0;
  for (const auto& a : attention) cols = std::max(cols, a.size());

  const int cell = 12, margin = 4;
  auto img = toc::GrayImage::blank(2 * margin + static_cast<int>(cols) * cell,
                                   2 * margin + rows * cell);
  for (int r = 0; r < rows; ++r) {
    const auto& a = attention[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < a.size(); ++c) {
      const auto ink = static_cast<std::uint8_t>(
          std::clamp(std::lround(a(c) * 255.0), 0L, 255L));
      const int x0 = margin + static_cast<int>(c) * cell;
      const int y0 = margin + r * cell;
      toc::data::fill_rect(img, x0, y0, x0 + cell - 1, y0 + cell - 1, ink);
    }
  }
  toc::data::write_png(path, img);
}

}  // namespace toc::train
