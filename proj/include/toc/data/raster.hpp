#ifndef TOC_DATA_RASTER_HPP
#define TOC_DATA_RASTER_HPP

#include <string>

#include "toc/core/types.hpp"

namespace toc::data {

// 8-bit grayscale PNG round trip. Color inputs are collapsed to luminance.
toc::GrayImage read_png(const std::string& path);
void write_png(const std::string& path, const toc::GrayImage& img);

// Axis-aligned filled rectangle, clipped to the image; coordinates are
// pixels, x1/y1 exclusive.
void fill_rect(toc::GrayImage& img, int x0, int y0, int x1, int y1,
               std::uint8_t value);

toc::GrayImage resample_nearest(const toc::GrayImage& img, int new_w, int new_h);

}  // namespace toc::data

#endif
