#ifndef TOC_ENCODER_FUSION_HPP
#define TOC_ENCODER_FUSION_HPP

#include <string>

#include "toc/nn/layers.hpp"
#include "toc/nn/params.hpp"
#include "toc/nn/tape.hpp"

namespace toc::encoder {

enum class FusionKind { Gated, Dot, Add, Concat };
enum class ModalityMask { Full, NoText, NoVision, NoLayout, None };

const char* to_string(FusionKind k);
const char* to_string(ModalityMask m);
FusionKind fusion_from_string(const std::string& s);
ModalityMask mask_from_string(const std::string& s);

// Parameters for every fusion variant are always allocated so checkpoints
// keep one layout regardless of the configured kind.
struct FusionParams {
  int dim = 0;
  int layout_dim = 8;
  toc::nn::Parameter* gate_w = nullptr;  // d x (2d+layout)
  toc::nn::Parameter* gate_e = nullptr;  // d x layout
  toc::nn::Parameter* proj_p = nullptr;  // d x layout, for dot / add
  toc::nn::Parameter* cat_w = nullptr;   // d x (2d+layout)
};

FusionParams make_fusion(toc::nn::ParameterStore& store, int dim, int layout_dim,
                         std::mt19937_64& rng);

// Combines per-entity vision (d x N), text (d x N) and layout (layout x N)
// features into d x N. The mask zeroes modalities before fusion; gated
// fusion computes z = sigmoid(W [fv; fs; fp]) and mixes
// z*fv + (1-z)*fs + E*fp.
toc::nn::Var fuse(toc::nn::Tape& tape, const FusionParams& fp, FusionKind kind,
                  ModalityMask mask, toc::nn::Var f_v, toc::nn::Var f_s,
                  toc::nn::Var f_p);

}  // namespace toc::encoder

#endif
