#ifndef TOC_ENCODER_VISION_HPP
#define TOC_ENCODER_VISION_HPP

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "toc/core/types.hpp"
#include "toc/nn/params.hpp"
#include "toc/nn/tape.hpp"

namespace toc::encoder {

// Small pyramid backbone over grayscale page rasters: three stride-2 3x3
// conv stages, a 1x1 lateral on the middle stage, and a nearest-neighbour
// upsample merge, yielding a stride-4 map that box features are pooled from.
struct VisionConfig {
  int c1 = 8;
  int c2 = 16;
  int c3 = 32;
  int grid = 3;                 // RoI pooling grid
  bool train_backbone = false;  // frozen by default; the projection always trains

  int pooled_dim() const { return c3 * grid * grid; }
};

struct VisionParams {
  VisionConfig cfg;
  toc::nn::Parameter* conv1_w = nullptr;
  toc::nn::Parameter* conv1_b = nullptr;
  toc::nn::Parameter* conv2_w = nullptr;
  toc::nn::Parameter* conv2_b = nullptr;
  toc::nn::Parameter* conv3_w = nullptr;
  toc::nn::Parameter* conv3_b = nullptr;
  toc::nn::Parameter* lat_w = nullptr;
  toc::nn::Parameter* lat_b = nullptr;
};

VisionParams make_vision(toc::nn::ParameterStore& store, const VisionConfig& cfg,
                         std::mt19937_64& rng);

// Hash over the backbone weights and config; cached pooled features carry it.
std::string vision_fingerprint(const VisionParams& vp);

// Raster as a conv input: 1 x (H*W) row-major map scaled to [0, 1], padded
// with background to multiples of 8 on both sides.
struct PreparedRaster {
  Eigen::MatrixXd pixels;  // 1 x (H*W)
  int height = 0;
  int width = 0;
  double scale_x = 1.0;  // page units -> raster pixels
  double scale_y = 1.0;
};

PreparedRaster prepare_raster(const toc::GrayImage& img, const toc::PageMeta& page);

// Runs the backbone on one prepared page raster; boxes are entity boxes in
// page units. Output is pooled_dim() x n_boxes on the given tape. Weights are
// bound as trainable parameters when train_backbone is set, otherwise they
// enter the tape as constants.
toc::nn::Var vision_forward_page(toc::nn::Tape& tape, const VisionParams& vp,
                                 const PreparedRaster& raster,
                                 const std::vector<toc::Box>& boxes);

// Frozen-path convenience: pooled features for every entity of a document,
// pooled_dim() x n_entities, run on a scratch tape without gradients.
// Entities on pages without a raster get zero columns.
Eigen::MatrixXd pooled_features(const VisionParams& vp, const toc::Document& doc);

}  // namespace toc::encoder

#endif
