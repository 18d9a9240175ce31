#include "toc/encoder/vision.hpp"

#include <sstream>

#include "toc/encoder/text.hpp"

namespace toc::encoder {

using toc::nn::Init;
using toc::nn::Tape;
using toc::nn::Var;

VisionParams make_vision(toc::nn::ParameterStore& store, const VisionConfig& cfg,
                         std::mt19937_64& rng) {
  const bool t = cfg.train_backbone;
  VisionParams vp;
  vp.cfg = cfg;
  vp.conv1_w = store.create("vision.conv1.w", cfg.c1, 1 * 3 * 3, Init::HeNormal, rng, t);
  vp.conv1_b = store.create("vision.conv1.b", cfg.c1, 1, Init::Zero, rng, t);
  vp.conv2_w = store.create("vision.conv2.w", cfg.c2, cfg.c1 * 3 * 3, Init::HeNormal, rng, t);
  vp.conv2_b = store.create("vision.conv2.b", cfg.c2, 1, Init::Zero, rng, t);
  vp.conv3_w = store.create("vision.conv3.w", cfg.c3, cfg.c2 * 3 * 3, Init::HeNormal, rng, t);
  vp.conv3_b = store.create("vision.conv3.b", cfg.c3, 1, Init::Zero, rng, t);
  vp.lat_w = store.create("vision.lat.w", cfg.c3, cfg.c2 * 1 * 1, Init::HeNormal, rng, t);
  vp.lat_b = store.create("vision.lat.b", cfg.c3, 1, Init::Zero, rng, t);
  return vp;
}

std::string vision_fingerprint(const VisionParams& vp) {
  std::uint64_t h = 0xb0c5;
  auto mix = [&h](const Eigen::MatrixXd& m) {
    h = fnv1a64(m.data(), sizeof(double) * static_cast<size_t>(m.size()), h);
  };
  mix(vp.conv1_w->value);
  mix(vp.conv1_b->value);
  mix(vp.conv2_w->value);
  mix(vp.conv2_b->value);
  mix(vp.conv3_w->value);
  mix(vp.conv3_b->value);
  mix(vp.lat_w->value);
  mix(vp.lat_b->value);
  std::ostringstream os;
  os << "vision:v1:" << vp.cfg.c1 << "-" << vp.cfg.c2 << "-" << vp.cfg.c3 << ":grid="
     << vp.cfg.grid << ":w=" << std::hex << h;
  return os.str();
}

PreparedRaster prepare_raster(const toc::GrayImage& img, const toc::PageMeta& page) {
  if (img.width <= 0 || img.height <= 0)
    throw toc::DataError("empty page raster");
  PreparedRaster out;
  out.height = (img.height + 7) / 8 * 8;
  out.width = (img.width + 7) / 8 * 8;
  out.pixels = Eigen::MatrixXd::Zero(1, out.height * out.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.pixels(0, y * out.width + x) = img.at(x, y) / 255.0;
  out.scale_x = img.width / page.width;
  out.scale_y = img.height / page.height;
  return out;
}

Var vision_forward_page(Tape& tape, const VisionParams& vp, const PreparedRaster& raster,
                        const std::vector<toc::Box>& boxes) {
  const bool t = vp.cfg.train_backbone;
  auto weight = [&](toc::nn::Parameter* p) {
    return t ? tape.param(*p) : tape.input(p->value);
  };

  const int h0 = raster.height, w0 = raster.width;
  const int h1 = Tape::conv_out_dim(h0, 3, 2, 1), w1 = Tape::conv_out_dim(w0, 3, 2, 1);
  const int h2 = Tape::conv_out_dim(h1, 3, 2, 1), w2 = Tape::conv_out_dim(w1, 3, 2, 1);
  const int h3 = Tape::conv_out_dim(h2, 3, 2, 1), w3 = Tape::conv_out_dim(w2, 3, 2, 1);

  Var x = tape.input(raster.pixels);
  Var c1 = tape.relu(tape.conv2d(x, weight(vp.conv1_w), weight(vp.conv1_b), h0, w0, 3, 2, 1));
  Var c2 = tape.relu(tape.conv2d(c1, weight(vp.conv2_w), weight(vp.conv2_b), h1, w1, 3, 2, 1));
  Var c3 = tape.relu(tape.conv2d(c2, weight(vp.conv3_w), weight(vp.conv3_b), h2, w2, 3, 2, 1));
  Var up = tape.upsample2(c3, h3, w3);
  Var lat = tape.conv2d(c2, weight(vp.lat_w), weight(vp.lat_b), h2, w2, 1, 1, 0);
  Var fused = tape.relu(tape.add(up, lat));

  std::vector<Tape::RoiBox> rois;
  rois.reserve(boxes.size());
  for (const auto& b : boxes) {
    // Page units -> raster pixels -> stride-4 feature cells.
    rois.push_back({b.x0 * raster.scale_x / 4.0, b.y0 * raster.scale_y / 4.0,
                    b.x1 * raster.scale_x / 4.0, b.y1 * raster.scale_y / 4.0});
  }
  return tape.roi_align(fused, h2, w2, rois, vp.cfg.grid);
}

Eigen::MatrixXd pooled_features(const VisionParams& vp, const toc::Document& doc) {
  const int n = static_cast<int>(doc.entities.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(vp.cfg.pooled_dim(), n);
  for (int p = 0; p < static_cast<int>(doc.pages.size()); ++p) {
    if (!doc.pages[p].raster) continue;
    std::vector<int> idx;
    std::vector<toc::Box> boxes;
    for (int i = 0; i < n; ++i) {
      if (doc.entities[i].page == p) {
        idx.push_back(i);
        boxes.push_back(doc.entities[i].box);
      }
    }
    if (idx.empty()) continue;
    Tape tape;
    const PreparedRaster raster = prepare_raster(*doc.pages[p].raster, doc.pages[p]);
    VisionParams frozen = vp;
    frozen.cfg.train_backbone = false;
    const Var pooled = vision_forward_page(tape, frozen, raster, boxes);
    for (size_t k = 0; k < idx.size(); ++k) out.col(idx[k]) = pooled.value().col(k);
  }
  return out;
}

}  // namespace toc::encoder
