#ifndef TOC_NN_TAPE_HPP
#define TOC_NN_TAPE_HPP

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace toc::nn {

using Mat = Eigen::MatrixXd;

struct Parameter;
class Tape;

// Lightweight handle to a tape node.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int index() const { return idx_; }
  const Mat& value() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }

 private:
  friend class Tape;
  Var(Tape* t, int i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  int idx_ = -1;
};

// Dynamic computation graph over dense double matrices. Nodes are created
// in topological order; backward() walks the tape in reverse. One tape per
// document forward pass.
class Tape {
 public:
  Var input(Mat v);
  Var param(Parameter& p);

  Var add(Var a, Var b);
  Var add_bias(Var a, Var b);  // b is m x 1, broadcast over columns of a
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var cmul(Var a, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var scale(Var a, double c);
  Var add_const(Var a, double c);

  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var clamp(Var a, double lo, double hi);
  Var pow_const(Var a, double e);

  Var softmax_col(Var a);
  // Softmax of a column vector restricted to entries with valid[i] != 0;
  // masked-out entries are exactly zero in the output.
  Var softmax_masked(Var a, std::vector<std::uint8_t> valid);
  Var layer_norm_cols(Var a, Var gain, Var bias, double eps = 1e-5);

  Var pick(Var a, int r, int c);
  Var block(Var a, int r0, int c0, int nr, int nc);
  Var hcat(const std::vector<Var>& parts);
  Var vcat(const std::vector<Var>& parts);

  Var sum_all(Var a);
  Var mean_all(Var a);

  // 1-D convolution of a 1 x n history row with kernel q (out_ch x k),
  // zero padded so the output is out_ch x n. k must be odd.
  Var conv1d_cols(Var q, Var a);

  // 2-D convolution. x holds C_in channels of an H x W map, one channel per
  // row, pixels in row-major (y * W + x) order. w is C_out x (C_in*k*k).
  Var conv2d(Var x, Var w, Var b, int H, int W, int k, int stride, int pad);
  // Nearest-neighbour 2x upsampling of a C x (H*W) map.
  Var upsample2(Var x, int H, int W);
  // Pools a grid x grid patch per box from a C x (H*W) feature map using
  // one bilinear sample at each bin centre. Boxes are in feature-map pixel
  // units. Output is (C*grid*grid) x n_boxes.
  struct RoiBox {
    double x0, y0, x1, y1;
  };
  Var roi_align(Var x, int H, int W, const std::vector<RoiBox>& boxes, int grid);

  static int conv_out_dim(int n, int k, int stride, int pad) {
    return (n + 2 * pad - k) / stride + 1;
  }

  // Seeds d(loss)/d(loss) = 1 (loss must be 1 x 1), sweeps the tape in
  // reverse and accumulates gradients of bound parameters into
  // Parameter::grad.
  void backward(Var loss);

  const Mat& value(Var v) const { return nodes_[v.idx_].value; }
  const Mat& grad(Var v) const;  // zero matrix if the node never received one

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Tape&, int)> back;
  };

  int push(Mat value, bool needs_grad, std::function<void(Tape&, int)> back);
  void accum(int idx, const Mat& g);
  Node& node(int idx) { return nodes_[idx]; }
  void check_same_tape(Var v) const;

  std::deque<Node> nodes_;
  std::vector<std::pair<int, Parameter*>> bound_;
  mutable Mat zero_;
};

}  // namespace toc::nn

#endif
