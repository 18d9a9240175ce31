#include "toc/encoder/fusion.hpp"

#include <stdexcept>

namespace toc::encoder {

using toc::nn::Init;
using toc::nn::Tape;
using toc::nn::Var;

const char* to_string(FusionKind k) {
  switch (k) {
    case FusionKind::Gated: return "gated";
    case FusionKind::Dot: return "dot";
    case FusionKind::Add: return "add";
    case FusionKind::Concat: return "concat";
  }
  return "?";
}

const char* to_string(ModalityMask m) {
  switch (m) {
    case ModalityMask::Full: return "full";
    case ModalityMask::NoText: return "no_text";
    case ModalityMask::NoVision: return "no_vision";
    case ModalityMask::NoLayout: return "no_layout";
    case ModalityMask::None: return "none";
  }
  return "?";
}

FusionKind fusion_from_string(const std::string& s) {
  if (s == "gated") return FusionKind::Gated;
  if (s == "dot") return FusionKind::Dot;
  if (s == "add") return FusionKind::Add;
  if (s == "concat") return FusionKind::Concat;
  throw std::invalid_argument("unknown fusion kind: '" + s + "'");
}

ModalityMask mask_from_string(const std::string& s) {
  if (s == "full") return ModalityMask::Full;
  if (s == "no_text") return ModalityMask::NoText;
  if (s == "no_vision") return ModalityMask::NoVision;
  if (s == "no_layout") return ModalityMask::NoLayout;
  if (s == "none") return ModalityMask::None;
  throw std::invalid_argument("unknown modality mask: '" + s + "'");
}

FusionParams make_fusion(toc::nn::ParameterStore& store, int dim, int layout_dim,
                         std::mt19937_64& rng) {
  FusionParams fp;
  fp.dim = dim;
  fp.layout_dim = layout_dim;
  fp.gate_w =
      store.create("fusion.gate.w", dim, 2 * dim + layout_dim, Init::XavierUniform, rng);
  fp.gate_e = store.create("fusion.gate.e", dim, layout_dim, Init::XavierUniform, rng);
  fp.proj_p = store.create("fusion.proj.p", dim, layout_dim, Init::XavierUniform, rng);
  fp.cat_w =
      store.create("fusion.cat.w", dim, 2 * dim + layout_dim, Init::XavierUniform, rng);
  return fp;
}

Var fuse(Tape& tape, const FusionParams& fp, FusionKind kind, ModalityMask mask,
         Var f_v, Var f_s, Var f_p) {
  auto zeros_like = [&tape](Var v) {
    return tape.input(toc::nn::Mat::Zero(v.rows(), v.cols()));
  };
  if (mask == ModalityMask::NoVision || mask == ModalityMask::None) f_v = zeros_like(f_v);
  if (mask == ModalityMask::NoText || mask == ModalityMask::None) f_s = zeros_like(f_s);
  if (mask == ModalityMask::NoLayout || mask == ModalityMask::None) f_p = zeros_like(f_p);

  switch (kind) {
    case FusionKind::Gated: {
      const Var cat = tape.vcat({f_v, f_s, f_p});
      const Var z = tape.sigmoid(tape.matmul(tape.param(*fp.gate_w), cat));
      const Var one_minus_z = tape.add_const(tape.neg(z), 1.0);
      return tape.add(tape.add(tape.cmul(z, f_v), tape.cmul(one_minus_z, f_s)),
                      tape.matmul(tape.param(*fp.gate_e), f_p));
    }
    case FusionKind::Dot:
      return tape.cmul(tape.cmul(f_v, f_s), tape.matmul(tape.param(*fp.proj_p), f_p));
    case FusionKind::Add:
      return tape.add(tape.add(f_v, f_s), tape.matmul(tape.param(*fp.proj_p), f_p));
    case FusionKind::Concat:
      return tape.matmul(tape.param(*fp.cat_w), tape.vcat({f_v, f_s, f_p}));
  }
  throw std::logic_error("unreachable fusion kind");
}

}  // namespace toc::encoder
