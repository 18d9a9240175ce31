#ifndef TOC_ENCODER_LAYOUT_HPP
#define TOC_ENCODER_LAYOUT_HPP

#include <Eigen/Dense>

#include "toc/core/types.hpp"

namespace toc::encoder {

// Per-document box statistics used to normalize size features.
struct LayoutStats {
  double mean_width = 1.0;
  double mean_height = 1.0;
};

LayoutStats compute_layout_stats(const toc::Document& doc);

// 8-dimensional layout feature per entity, one column per entity in document
// order: corners normalized by page size, width/height normalized by the
// document means, and the vertical gaps to the previous/next entity on the
// same page normalized by mean height. Page edges stand in for the missing
// neighbor of the first and last entity of a page.
Eigen::MatrixXd layout_features(const toc::Document& doc, const LayoutStats& stats);

}  // namespace toc::encoder

#endif
