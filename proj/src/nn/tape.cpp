#include "toc/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "toc/nn/params.hpp"

namespace toc::nn {

const Mat& Var::value() const {
  if (!tape_) throw std::logic_error("value() on an empty Var");
  return tape_->value(*this);
}

int Tape::push(Mat value, bool needs_grad, std::function<void(Tape&, int)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accum(int idx, const Mat& g) {
  Node& n = nodes_[idx];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void Tape::check_same_tape(Var v) const {
  if (v.tape() != this) throw std::logic_error("Var belongs to a different tape");
}

const Mat& Tape::grad(Var v) const {
  const Node& n = nodes_[v.index()];
  if (n.grad.size() != 0) return n.grad;
  zero_ = Mat::Zero(n.value.rows(), n.value.cols());
  return zero_;
}

Var Tape::input(Mat v) { return Var(this, push(std::move(v), false, nullptr)); }

Var Tape::param(Parameter& p) {
  int idx = push(p.value, p.trainable, nullptr);
  if (p.trainable) bound_.emplace_back(idx, &p);
  return Var(this, idx);
}

void Tape::backward(Var loss) {
  check_same_tape(loss);
  Node& l = nodes_[loss.index()];
  if (l.value.rows() != 1 || l.value.cols() != 1)
    throw std::logic_error("backward() expects a 1x1 loss node");
  if (l.grad.size() == 0) l.grad = Mat::Ones(1, 1);
  for (int i = loss.index(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad.size() != 0) n.back(*this, i);
  }
  for (auto& [idx, p] : bound_) {
    if (nodes_[idx].grad.size() != 0) p->grad += nodes_[idx].grad;
  }
}

namespace {
void require(bool cond, const char* msg) {
  if (!cond) throw std::logic_error(msg);
}
}  // namespace

Var Tape::add(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
          "add: shape mismatch");
  int ia = a.index(), ib = b.index();
  bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  int idx = push(a.value() + b.value(), ng, [ia, ib](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g);
    t.accum(ib, g);
  });
  return Var(this, idx);
}

Var Tape::add_bias(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require(b.value().cols() == 1 && a.value().rows() == b.value().rows(),
          "add_bias: b must be m x 1 matching a's rows");
  int ia = a.index(), ib = b.index();
  bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  Mat y = a.value();
  y.colwise() += Eigen::VectorXd(b.value().col(0));
  int idx = push(std::move(y), ng, [ia, ib](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g);
    t.accum(ib, g.rowwise().sum());
  });
  return Var(this, idx);
}

Var Tape::sub(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
          "sub: shape mismatch");
  int ia = a.index(), ib = b.index();
  bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  int idx = push(a.value() - b.value(), ng, [ia, ib](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g);
    t.accum(ib, -g);
  });
  return Var(this, idx);
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::cmul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
          "cmul: shape mismatch");
  int ia = a.index(), ib = b.index();
  bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  int idx = push(a.value().cwiseProduct(b.value()), ng, [ia, ib](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g.cwiseProduct(t.nodes_[ib].value));
    t.accum(ib, g.cwiseProduct(t.nodes_[ia].value));
  });
  return Var(this, idx);
}

Var Tape::matmul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  require(a.value().cols() == b.value().rows(), "matmul: inner dimension mismatch");
  int ia = a.index(), ib = b.index();
  bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  int idx = push(a.value() * b.value(), ng, [ia, ib](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    if (t.nodes_[ia].needs_grad) t.accum(ia, g * t.nodes_[ib].value.transpose());
    if (t.nodes_[ib].needs_grad) t.accum(ib, t.nodes_[ia].value.transpose() * g);
  });
  return Var(this, idx);
}

Var Tape::transpose(Var a) {
  check_same_tape(a);
  int ia = a.index();
  int idx = push(a.value().transpose(), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    t.accum(ia, t.nodes_[self].grad.transpose());
  });
  return Var(this, idx);
}

Var Tape::scale(Var a, double c) {
  check_same_tape(a);
  int ia = a.index();
  int idx = push(a.value() * c, nodes_[ia].needs_grad, [ia, c](Tape& t, int self) {
    t.accum(ia, t.nodes_[self].grad * c);
  });
  return Var(this, idx);
}

Var Tape::add_const(Var a, double c) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = a.value().array() + c;
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    t.accum(ia, t.nodes_[self].grad);
  });
  return Var(this, idx);
}

Var Tape::sigmoid(Var a) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    const Mat& y = t.nodes_[self].value;
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
  return Var(this, idx);
}

Var Tape::tanh(Var a) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = a.value().array().tanh().matrix();
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    const Mat& y = t.nodes_[self].value;
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, (g.array() * (1.0 - y.array().square())).matrix());
  });
  return Var(this, idx);
}

Var Tape::relu(Var a) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = a.value().cwiseMax(0.0);
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    const Mat& x = t.nodes_[ia].value;
    t.accum(ia, (g.array() * (x.array() > 0.0).cast<double>()).matrix());
  });
  return Var(this, idx);
}

Var Tape::exp(Var a) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = a.value().array().exp().matrix();
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    const Mat& y = t.nodes_[self].value;
    t.accum(ia, t.nodes_[self].grad.cwiseProduct(y));
  });
  return Var(this, idx);
}

Var Tape::log(Var a) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = a.value().array().log().matrix();
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    t.accum(ia, g.cwiseQuotient(t.nodes_[ia].value));
  });
  return Var(this, idx);
}

Var Tape::clamp(Var a, double lo, double hi) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = a.value().cwiseMax(lo).cwiseMin(hi);
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia, lo, hi](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    const Mat& x = t.nodes_[ia].value;
    Mat mask = ((x.array() >= lo) && (x.array() <= hi)).cast<double>();
    t.accum(ia, g.cwiseProduct(mask));
  });
  return Var(this, idx);
}

Var Tape::pow_const(Var a, double e) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = a.value().array().pow(e).matrix();
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia, e](Tape& t, int self) {
    if (e == 0.0) return;  // derivative of the constant 1
    const Mat& g = t.nodes_[self].grad;
    const Mat& x = t.nodes_[ia].value;
    Mat d = e * x.array().pow(e - 1.0);
    t.accum(ia, g.cwiseProduct(d.matrix()));
  });
  return Var(this, idx);
}

Var Tape::softmax_col(Var a) {
  check_same_tape(a);
  int ia = a.index();
  Mat y = a.value();
  for (int j = 0; j < y.cols(); ++j) {
    Eigen::ArrayXd c = y.col(j).array();
    c -= c.maxCoeff();
    c = c.exp();
    y.col(j) = (c / c.sum()).matrix();
  }
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    const Mat& y = t.nodes_[self].value;
    const Mat& g = t.nodes_[self].grad;
    Mat d(y.rows(), y.cols());
    for (int j = 0; j < y.cols(); ++j) {
      double dot = y.col(j).dot(g.col(j));
      d.col(j) = y.col(j).cwiseProduct(g.col(j) - Mat::Constant(y.rows(), 1, dot));
    }
    t.accum(ia, d);
  });
  return Var(this, idx);
}

Var Tape::softmax_masked(Var a, std::vector<std::uint8_t> valid) {
  check_same_tape(a);
  require(a.value().cols() == 1, "softmax_masked: expects a column vector");
  require(static_cast<int>(valid.size()) == a.value().rows(),
          "softmax_masked: mask size mismatch");
  int ia = a.index();
  const Mat& x = a.value();
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int i = 0; i < x.rows(); ++i)
    if (valid[i]) {
      mx = std::max(mx, x(i, 0));
      any = true;
    }
  require(any, "softmax_masked: no valid candidate");
  Mat y = Mat::Zero(x.rows(), 1);
  double z = 0;
  for (int i = 0; i < x.rows(); ++i)
    if (valid[i]) {
      y(i, 0) = std::exp(x(i, 0) - mx);
      z += y(i, 0);
    }
  y /= z;
  int idx =
      push(std::move(y), nodes_[ia].needs_grad, [ia, valid = std::move(valid)](Tape& t, int self) {
        const Mat& y = t.nodes_[self].value;
        const Mat& g = t.nodes_[self].grad;
        double dot = 0;
        for (int i = 0; i < y.rows(); ++i)
          if (valid[i]) dot += y(i, 0) * g(i, 0);
        Mat d = Mat::Zero(y.rows(), 1);
        for (int i = 0; i < y.rows(); ++i)
          if (valid[i]) d(i, 0) = y(i, 0) * (g(i, 0) - dot);
        t.accum(ia, d);
      });
  return Var(this, idx);
}

Var Tape::layer_norm_cols(Var a, Var gain, Var bias, double eps) {
  check_same_tape(a);
  check_same_tape(gain);
  check_same_tape(bias);
  const Mat& x = a.value();
  int m = static_cast<int>(x.rows());
  require(gain.value().rows() == m && gain.value().cols() == 1, "layer_norm: gain must be m x 1");
  require(bias.value().rows() == m && bias.value().cols() == 1, "layer_norm: bias must be m x 1");
  int ia = a.index(), ig = gain.index(), ib = bias.index();
  bool ng = nodes_[ia].needs_grad || nodes_[ig].needs_grad || nodes_[ib].needs_grad;

  Mat xhat(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.cols());
  for (int j = 0; j < x.cols(); ++j) {
    double mu = x.col(j).mean();
    double var = (x.col(j).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(j) = is;
    xhat.col(j) = (x.col(j).array() - mu).matrix() * is;
  }
  Mat y = (xhat.array().colwise() * Eigen::ArrayXd(gain.value().col(0).array())).matrix();
  y.colwise() += Eigen::VectorXd(bias.value().col(0));

  int idx = push(std::move(y), ng,
                 [ia, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                                    int self) {
                   const Mat& g = t.nodes_[self].grad;
                   const Mat& gamma = t.nodes_[ig].value;
                   int m = static_cast<int>(g.rows());
                   if (t.nodes_[ig].needs_grad)
                     t.accum(ig, (g.cwiseProduct(xhat)).rowwise().sum());
                   if (t.nodes_[ib].needs_grad) t.accum(ib, g.rowwise().sum());
                   if (t.nodes_[ia].needs_grad) {
                     Mat dx(g.rows(), g.cols());
                     for (int j = 0; j < g.cols(); ++j) {
                       Eigen::VectorXd dxh = g.col(j).cwiseProduct(gamma.col(0));
                       double s1 = dxh.sum();
                       double s2 = dxh.dot(xhat.col(j));
                       dx.col(j) = (inv_std(j) / m) *
                                   (m * dxh.array() - s1 - xhat.col(j).array() * s2).matrix();
                     }
                     t.accum(ia, dx);
                   }
                 });
  return Var(this, idx);
}

Var Tape::pick(Var a, int r, int c) {
  check_same_tape(a);
  require(r >= 0 && r < a.value().rows() && c >= 0 && c < a.value().cols(),
          "pick: index out of range");
  int ia = a.index();
  Mat y(1, 1);
  y(0, 0) = a.value()(r, c);
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia, r, c](Tape& t, int self) {
    Mat d = Mat::Zero(t.nodes_[ia].value.rows(), t.nodes_[ia].value.cols());
    d(r, c) = t.nodes_[self].grad(0, 0);
    t.accum(ia, d);
  });
  return Var(this, idx);
}

Var Tape::block(Var a, int r0, int c0, int nr, int nc) {
  check_same_tape(a);
  require(r0 >= 0 && c0 >= 0 && r0 + nr <= a.value().rows() && c0 + nc <= a.value().cols(),
          "block: out of range");
  int ia = a.index();
  Mat y = a.value().block(r0, c0, nr, nc);
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia, r0, c0, nr, nc](Tape& t, int self) {
    Mat d = Mat::Zero(t.nodes_[ia].value.rows(), t.nodes_[ia].value.cols());
    d.block(r0, c0, nr, nc) = t.nodes_[self].grad;
    t.accum(ia, d);
  });
  return Var(this, idx);
}

Var Tape::hcat(const std::vector<Var>& parts) {
  require(!parts.empty(), "hcat: empty");
  int rows = parts[0].rows();
  int cols = 0;
  bool ng = false;
  std::vector<int> idxs;
  for (Var p : parts) {
    check_same_tape(p);
    require(p.rows() == rows, "hcat: row mismatch");
    cols += p.cols();
    ng = ng || nodes_[p.index()].needs_grad;
    idxs.push_back(p.index());
  }
  Mat y(rows, cols);
  int at = 0;
  for (Var p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  int idx = push(std::move(y), ng, [idxs](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    int at = 0;
    for (int i : idxs) {
      int c = static_cast<int>(t.nodes_[i].value.cols());
      t.accum(i, g.middleCols(at, c));
      at += c;
    }
  });
  return Var(this, idx);
}

Var Tape::vcat(const std::vector<Var>& parts) {
  require(!parts.empty(), "vcat: empty");
  int cols = parts[0].cols();
  int rows = 0;
  bool ng = false;
  std::vector<int> idxs;
  for (Var p : parts) {
    check_same_tape(p);
    require(p.cols() == cols, "vcat: column mismatch");
    rows += p.rows();
    ng = ng || nodes_[p.index()].needs_grad;
    idxs.push_back(p.index());
  }
  Mat y(rows, cols);
  int at = 0;
  for (Var p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  int idx = push(std::move(y), ng, [idxs](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    int at = 0;
    for (int i : idxs) {
      int r = static_cast<int>(t.nodes_[i].value.rows());
      t.accum(i, g.middleRows(at, r));
      at += r;
    }
  });
  return Var(this, idx);
}

Var Tape::sum_all(Var a) {
  check_same_tape(a);
  int ia = a.index();
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  int idx = push(std::move(y), nodes_[ia].needs_grad, [ia](Tape& t, int self) {
    double g = t.nodes_[self].grad(0, 0);
    t.accum(ia, Mat::Constant(t.nodes_[ia].value.rows(), t.nodes_[ia].value.cols(), g));
  });
  return Var(this, idx);
}

Var Tape::mean_all(Var a) {
  double n = static_cast<double>(a.value().size());
  return scale(sum_all(a), 1.0 / n);
}

Var Tape::conv1d_cols(Var q, Var a) {
  check_same_tape(q);
  check_same_tape(a);
  require(a.value().rows() == 1, "conv1d_cols: history must be 1 x n");
  const int k = static_cast<int>(q.value().cols());
  require(k % 2 == 1, "conv1d_cols: kernel width must be odd");
  const int out_ch = static_cast<int>(q.value().rows());
  const int n = static_cast<int>(a.value().cols());
  const int off = k / 2;
  int iq = q.index(), ia = a.index();
  bool ng = nodes_[iq].needs_grad || nodes_[ia].needs_grad;

  Mat y = Mat::Zero(out_ch, n);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < k; ++t) {
      int j = i + t - off;
      if (j < 0 || j >= n) continue;
      y.col(i) += q.value().col(t) * a.value()(0, j);
    }
  int idx = push(std::move(y), ng, [iq, ia, k, off, n](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    const Mat& qv = t.nodes_[iq].value;
    const Mat& av = t.nodes_[ia].value;
    if (t.nodes_[iq].needs_grad) {
      Mat dq = Mat::Zero(qv.rows(), qv.cols());
      for (int i = 0; i < n; ++i)
        for (int tt = 0; tt < k; ++tt) {
          int j = i + tt - off;
          if (j < 0 || j >= n) continue;
          dq.col(tt) += g.col(i) * av(0, j);
        }
      t.accum(iq, dq);
    }
    if (t.nodes_[ia].needs_grad) {
      Mat da = Mat::Zero(1, n);
      for (int i = 0; i < n; ++i)
        for (int tt = 0; tt < k; ++tt) {
          int j = i + tt - off;
          if (j < 0 || j >= n) continue;
          da(0, j) += qv.col(tt).dot(g.col(i));
        }
      t.accum(ia, da);
    }
  });
  return Var(this, idx);
}

namespace {

// Gathers conv patches: output is (C_in*k*k) x (Ho*Wo).
Mat im2col(const Mat& x, int H, int W, int k, int stride, int pad, int Ho, int Wo) {
  const int cin = static_cast<int>(x.rows());
  Mat cols = Mat::Zero(static_cast<Eigen::Index>(cin) * k * k, static_cast<Eigen::Index>(Ho) * Wo);
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      const int col = oy * Wo + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= W) continue;
          const int px = iy * W + ix;
          for (int c = 0; c < cin; ++c)
            cols(static_cast<Eigen::Index>(c) * k * k + ky * k + kx, col) = x(c, px);
        }
      }
    }
  }
  return cols;
}

void col2im_accum(Mat& dx, const Mat& dcols, int H, int W, int k, int stride, int pad, int Ho,
                  int Wo) {
  const int cin = static_cast<int>(dx.rows());
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      const int col = oy * Wo + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= W) continue;
          const int px = iy * W + ix;
          for (int c = 0; c < cin; ++c)
            dx(c, px) += dcols(static_cast<Eigen::Index>(c) * k * k + ky * k + kx, col);
        }
      }
    }
  }
}

}  // namespace

Var Tape::conv2d(Var x, Var w, Var b, int H, int W, int k, int stride, int pad) {
  check_same_tape(x);
  check_same_tape(w);
  check_same_tape(b);
  const int cin = static_cast<int>(x.value().rows());
  require(x.value().cols() == static_cast<Eigen::Index>(H) * W, "conv2d: map size mismatch");
  require(w.value().cols() == static_cast<Eigen::Index>(cin) * k * k,
          "conv2d: weight shape mismatch");
  const int cout = static_cast<int>(w.value().rows());
  require(b.value().rows() == cout && b.value().cols() == 1, "conv2d: bias shape mismatch");
  const int Ho = conv_out_dim(H, k, stride, pad);
  const int Wo = conv_out_dim(W, k, stride, pad);
  int ix = x.index(), iw = w.index(), ib = b.index();
  bool ng = nodes_[ix].needs_grad || nodes_[iw].needs_grad || nodes_[ib].needs_grad;

  Mat cols = im2col(x.value(), H, W, k, stride, pad, Ho, Wo);
  Mat y = w.value() * cols;
  y.colwise() += Eigen::VectorXd(b.value().col(0));

  // The patch matrix is rebuilt in backward to keep peak tape memory low.
  int idx = push(std::move(y), ng, [ix, iw, ib, H, W, k, stride, pad, Ho, Wo](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    if (t.nodes_[ib].needs_grad) t.accum(ib, g.rowwise().sum());
    const bool need_w = t.nodes_[iw].needs_grad;
    const bool need_x = t.nodes_[ix].needs_grad;
    if (!need_w && !need_x) return;
    Mat cols = im2col(t.nodes_[ix].value, H, W, k, stride, pad, Ho, Wo);
    if (need_w) t.accum(iw, g * cols.transpose());
    if (need_x) {
      Mat dcols = t.nodes_[iw].value.transpose() * g;
      Mat dx = Mat::Zero(t.nodes_[ix].value.rows(), t.nodes_[ix].value.cols());
      col2im_accum(dx, dcols, H, W, k, stride, pad, Ho, Wo);
      t.accum(ix, dx);
    }
  });
  return Var(this, idx);
}

Var Tape::upsample2(Var x, int H, int W) {
  check_same_tape(x);
  require(x.value().cols() == static_cast<Eigen::Index>(H) * W, "upsample2: map size mismatch");
  int ixn = x.index();
  const int C = static_cast<int>(x.value().rows());
  const int H2 = H * 2, W2 = W * 2;
  Mat y(C, static_cast<Eigen::Index>(H2) * W2);
  for (int iy = 0; iy < H2; ++iy)
    for (int ix = 0; ix < W2; ++ix)
      y.col(static_cast<Eigen::Index>(iy) * W2 + ix) =
          x.value().col(static_cast<Eigen::Index>(iy / 2) * W + ix / 2);
  int idx = push(std::move(y), nodes_[ixn].needs_grad, [ixn, H, W, H2, W2](Tape& t, int self) {
    const Mat& g = t.nodes_[self].grad;
    Mat dx = Mat::Zero(t.nodes_[ixn].value.rows(), t.nodes_[ixn].value.cols());
    for (int iy = 0; iy < H2; ++iy)
      for (int ix = 0; ix < W2; ++ix)
        dx.col(static_cast<Eigen::Index>(iy / 2) * W + ix / 2) +=
            g.col(static_cast<Eigen::Index>(iy) * W2 + ix);
    t.accum(ixn, dx);
  });
  return Var(this, idx);
}

Var Tape::roi_align(Var x, int H, int W, const std::vector<RoiBox>& boxes, int grid) {
  check_same_tape(x);
  require(x.value().cols() == static_cast<Eigen::Index>(H) * W, "roi_align: map size mismatch");
  const int C = static_cast<int>(x.value().rows());
  const int B = static_cast<int>(boxes.size());
  const int G = grid;
  int ixn = x.index();

  // One bilinear sample at each bin centre; pixel (i,j) has its centre at
  // continuous coordinates (j + 0.5, i + 0.5).
  struct Samp {
    int p00, p01, p10, p11;
    double w00, w01, w10, w11;
  };
  auto make_samp = [&](double cx, double cy) {
    double fx = cx - 0.5, fy = cy - 0.5;
    int x0 = static_cast<int>(std::floor(fx));
    int y0 = static_cast<int>(std::floor(fy));
    double ax = fx - x0, ay = fy - y0;
    auto cl = [](int v, int hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };
    int x0c = cl(x0, W), x1c = cl(x0 + 1, W), y0c = cl(y0, H), y1c = cl(y0 + 1, H);
    Samp s;
    s.p00 = y0c * W + x0c;
    s.p01 = y0c * W + x1c;
    s.p10 = y1c * W + x0c;
    s.p11 = y1c * W + x1c;
    s.w00 = (1 - ax) * (1 - ay);
    s.w01 = ax * (1 - ay);
    s.w10 = (1 - ax) * ay;
    s.w11 = ax * ay;
    return s;
  };

  std::vector<Samp> samples;
  samples.reserve(static_cast<size_t>(B) * G * G);
  for (const RoiBox& bx : boxes) {
    const double bw = (bx.x1 - bx.x0) / G;
    const double bh = (bx.y1 - bx.y0) / G;
    for (int gy = 0; gy < G; ++gy)
      for (int gx = 0; gx < G; ++gx)
        samples.push_back(
            make_samp(bx.x0 + (gx + 0.5) * bw, bx.y0 + (gy + 0.5) * bh));
  }

  Mat y(static_cast<Eigen::Index>(C) * G * G, B);
  for (int b = 0; b < B; ++b)
    for (int cell = 0; cell < G * G; ++cell) {
      const Samp& s = samples[static_cast<size_t>(b) * G * G + cell];
      const Mat& v = x.value();
      for (int c = 0; c < C; ++c)
        y(static_cast<Eigen::Index>(c) * G * G + cell, b) =
            s.w00 * v(c, s.p00) + s.w01 * v(c, s.p01) + s.w10 * v(c, s.p10) + s.w11 * v(c, s.p11);
    }

  int idx = push(std::move(y), nodes_[ixn].needs_grad,
                 [ixn, C, B, G, samples = std::move(samples)](Tape& t, int self) {
                   const Mat& g = t.nodes_[self].grad;
                   Mat dx = Mat::Zero(t.nodes_[ixn].value.rows(), t.nodes_[ixn].value.cols());
                   for (int b = 0; b < B; ++b)
                     for (int cell = 0; cell < G * G; ++cell) {
                       const auto& s = samples[static_cast<size_t>(b) * G * G + cell];
                       for (int c = 0; c < C; ++c) {
                         double gg = g(static_cast<Eigen::Index>(c) * G * G + cell, b);
                         dx(c, s.p00) += gg * s.w00;
                         dx(c, s.p01) += gg * s.w01;
                         dx(c, s.p10) += gg * s.w10;
                         dx(c, s.p11) += gg * s.w11;
                       }
                     }
                   t.accum(ixn, dx);
                 });
  return Var(this, idx);
}

}  // namespace toc::nn
