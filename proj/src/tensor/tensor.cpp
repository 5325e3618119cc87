#include "rfgml/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "rfgml/kernels.hpp"

namespace rfgml {

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ContractError("tensor: dimension must be positive, got " +
                                    shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto p = std::make_shared<TensorData>();
  p->value.assign(numel(shape), 0.0);
  p->shape = std::move(shape);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::full(std::vector<int> shape, double fill, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.p_->value.begin(), t.p_->value.end(), fill);
  return t;
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
  if (numel(shape) != values.size())
    throw ContractError("tensor: " + std::to_string(values.size()) +
                        " values do not fill shape " + shape_str(shape));
  auto p = std::make_shared<TensorData>();
  p->shape = std::move(shape);
  p->value = std::move(values);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_values({1}, {v}, requires_grad);
}

const std::vector<int>& Tensor::shape() const {
  if (!p_) throw ContractError("tensor: undefined");
  return p_->shape;
}

std::size_t Tensor::size() const {
  if (!p_) throw ContractError("tensor: undefined");
  return p_->value.size();
}

double* Tensor::data() {
  if (!p_) throw ContractError("tensor: undefined");
  return p_->value.data();
}

const double* Tensor::data() const {
  if (!p_) throw ContractError("tensor: undefined");
  return p_->value.data();
}

double Tensor::item() const {
  if (size() != 1)
    throw ContractError("tensor: item() on non-scalar shape " +
                        shape_str(p_->shape));
  return p_->value[0];
}

bool Tensor::requires_grad() const { return p_ && p_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
  if (!p_) throw ContractError("tensor: undefined");
  p_->requires_grad = v;
}

bool Tensor::has_grad() const { return p_ && !p_->grad.empty(); }

double* Tensor::grad() {
  if (!has_grad()) throw ContractError("tensor: gradient not populated");
  return p_->grad.data();
}

const double* Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor: gradient not populated");
  return p_->grad.data();
}

void Tensor::zero_grad() {
  if (p_) p_->grad.clear();
}

Tensor Tensor::clone() const {
  if (!p_) throw ContractError("tensor: undefined");
  auto p = std::make_shared<TensorData>();
  p->shape = p_->shape;
  p->value = p_->value;
  p->requires_grad = p_->requires_grad;
  return Tensor(std::move(p));
}

Tensor random_uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                      bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  double* d = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = rng.uniform(lo, hi);
  return t;
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ContractError("activation: unknown kind '" + name +
                      "' (expected relu or sigmoid)");
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

void Graph::ensure_grad(const std::shared_ptr<TensorData>& t) {
  if (t->grad.empty()) t->grad.assign(t->value.size(), 0.0);
}

int Graph::id_of(const Tensor& t) {
  if (!t.defined()) throw ContractError("graph: undefined tensor input");
  auto it = ids_.find(t.ptr().get());
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(GraphNode{"leaf", {}, t.ptr(), nullptr, t.requires_grad()});
  ids_.emplace(t.ptr().get(), id);
  return id;
}

Tensor Graph::leaf(const Tensor& t) {
  id_of(t);
  return t;
}

Tensor Graph::make_node(std::string op, std::vector<int> input_ids,
                        std::vector<int> out_shape,
                        std::function<void()> backward_fn, bool needs_grad) {
  Tensor out = Tensor::zeros(std::move(out_shape));
  out.ptr()->requires_grad = needs_grad;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(GraphNode{std::move(op), std::move(input_ids), out.ptr(),
                             needs_grad ? std::move(backward_fn) : nullptr,
                             needs_grad});
  ids_.emplace(out.ptr().get(), id);
  return out;
}

Tensor Graph::conv2d(const Tensor& input, const Tensor& kernels,
                     const Tensor& bias, std::pair<int, int> stride,
                     std::pair<int, int> padding) {
  const auto& xs = input.shape();
  const auto& ks = kernels.shape();
  if (xs.size() != 3)
    throw ContractError("conv2d: input must be C x H x W, got " +
                        shape_str(xs));
  if (ks.size() != 4)
    throw ContractError("conv2d: kernels must be O x C x kh x kw, got " +
                        shape_str(ks));
  const int C = xs[0], H = xs[1], W = xs[2];
  const int O = ks[0], KC = ks[1], kh = ks[2], kw = ks[3];
  if (KC != C)
    throw ContractError("conv2d: kernel input channels (" +
                        std::to_string(KC) + ") do not match input channels (" +
                        std::to_string(C) + ")");
  if (bias.shape() != std::vector<int>{O})
    throw ContractError("conv2d: bias shape " + shape_str(bias.shape()) +
                        " does not match output channels (" +
                        std::to_string(O) + ")");
  const int sh = stride.first, sw = stride.second;
  const int ph = padding.first, pw = padding.second;
  if (sh < 1 || sw < 1) throw ContractError("conv2d: stride must be >= 1");
  if (ph < 0 || pw < 0) throw ContractError("conv2d: padding must be >= 0");
  if (kh > H + 2 * ph)
    throw ContractError("conv2d: kernel height " + std::to_string(kh) +
                        " exceeds padded input height " +
                        std::to_string(H + 2 * ph));
  if (kw > W + 2 * pw)
    throw ContractError("conv2d: kernel width " + std::to_string(kw) +
                        " exceeds padded input width " +
                        std::to_string(W + 2 * pw));
  const int Ho = (H + 2 * ph - kh) / sh + 1;
  const int Wo = (W + 2 * pw - kw) / sw + 1;
  const std::size_t K = static_cast<std::size_t>(C) * kh * kw;
  const std::size_t P = static_cast<std::size_t>(Ho) * Wo;

  // im2col: row r = (c*kh + ki)*kw + kj holds the input values each kernel
  // tap sees, laid out over output positions. All three gradient products
  // then reduce to unit-stride axpy/dot over P.
  auto col = std::make_shared<std::vector<double>>(K * P, 0.0);
  {
    const double* x = input.data();
    for (int c = 0; c < C; ++c) {
      for (int ki = 0; ki < kh; ++ki) {
        for (int kj = 0; kj < kw; ++kj) {
          const std::size_t r = (static_cast<std::size_t>(c) * kh + ki) * kw + kj;
          double* dst = col->data() + r * P;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * sh + ki - ph;
            if (iy < 0 || iy >= H) continue;
            const double* src = x + (static_cast<std::size_t>(c) * H + iy) * W;
            double* drow = dst + static_cast<std::size_t>(oy) * Wo;
            if (sw == 1) {
              const int x0 = std::max(0, pw - kj);
              const int x1 = std::min(Wo, W + pw - kj);
              if (x1 > x0)
                std::memcpy(drow + x0, src + (x0 + kj - pw),
                            static_cast<std::size_t>(x1 - x0) * sizeof(double));
            } else {
              for (int ox = 0; ox < Wo; ++ox) {
                const int ix = ox * sw + kj - pw;
                if (ix >= 0 && ix < W) drow[ox] = src[ix];
              }
            }
          }
        }
      }
    }
  }

  const bool needs = input.requires_grad() || kernels.requires_grad() ||
                     bias.requires_grad();
  auto xp = input.ptr();
  auto wp = kernels.ptr();
  auto bp = bias.ptr();
  Tensor out = make_node(
      "conv2d", {id_of(input), id_of(kernels), id_of(bias)}, {O, Ho, Wo},
      nullptr, needs);
  auto op = out.ptr();

  {  // forward
    double* y = op->value.data();
    const double* w = wp->value.data();
    const double* b = bp->value.data();
    for (int o = 0; o < O; ++o) {
      double* yo = y + static_cast<std::size_t>(o) * P;
      std::fill(yo, yo + P, b[o]);
      const double* wo = w + static_cast<std::size_t>(o) * K;
      for (std::size_t k = 0; k < K; ++k)
        kernels::axpy(P, wo[k], col->data() + k * P, yo);
    }
  }

  if (needs) {
    GraphNode& node = nodes_.back();
    node.backward = [xp, wp, bp, op, col, C, H, W, O, kh, kw, sh, sw, ph, pw,
                     Ho, Wo, K, P]() {
      const double* dy = op->grad.data();
      if (bp->requires_grad) {
        ensure_grad(bp);
        for (int o = 0; o < O; ++o)
          bp->grad[o] += kernels::sum(P, dy + static_cast<std::size_t>(o) * P);
      }
      if (wp->requires_grad) {
        ensure_grad(wp);
        for (int o = 0; o < O; ++o) {
          const double* dyo = dy + static_cast<std::size_t>(o) * P;
          double* dwo = wp->grad.data() + static_cast<std::size_t>(o) * K;
          for (std::size_t k = 0; k < K; ++k)
            dwo[k] += kernels::dot(P, dyo, col->data() + k * P);
        }
      }
      if (xp->requires_grad) {
        ensure_grad(xp);
        std::vector<double> dcol(K * P, 0.0);
        const double* w = wp->value.data();
        for (int o = 0; o < O; ++o) {
          const double* dyo = dy + static_cast<std::size_t>(o) * P;
          const double* wo = w + static_cast<std::size_t>(o) * K;
          for (std::size_t k = 0; k < K; ++k)
            kernels::axpy(P, wo[k], dyo, dcol.data() + k * P);
        }
        // col2im scatter-add
        double* dx = xp->grad.data();
        for (int c = 0; c < C; ++c) {
          for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
              const std::size_t r =
                  (static_cast<std::size_t>(c) * kh + ki) * kw + kj;
              const double* srow = dcol.data() + r * P;
              for (int oy = 0; oy < Ho; ++oy) {
                const int iy = oy * sh + ki - ph;
                if (iy < 0 || iy >= H) continue;
                double* drow =
                    dx + (static_cast<std::size_t>(c) * H + iy) * W;
                const double* s = srow + static_cast<std::size_t>(oy) * Wo;
                for (int ox = 0; ox < Wo; ++ox) {
                  const int ix = ox * sw + kj - pw;
                  if (ix >= 0 && ix < W) drow[ix] += s[ox];
                }
              }
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor Graph::activation(const Tensor& x, Activation kind) {
  return kind == Activation::relu ? relu(x) : sigmoid(x);
}

Tensor Graph::relu(const Tensor& x) {
  auto xp = x.ptr();
  Tensor out = make_node("relu", {id_of(x)}, x.shape(), nullptr,
                         x.requires_grad());
  auto op = out.ptr();
  kernels::relu(xp->value.size(), xp->value.data(), op->value.data());
  if (x.requires_grad()) {
    nodes_.back().backward = [xp, op]() {
      ensure_grad(xp);
      kernels::relu_backward(xp->value.size(), xp->value.data(),
                             op->grad.data(), xp->grad.data());
    };
  }
  return out;
}

Tensor Graph::sigmoid(const Tensor& x) {
  auto xp = x.ptr();
  Tensor out = make_node("sigmoid", {id_of(x)}, x.shape(), nullptr,
                         x.requires_grad());
  auto op = out.ptr();
  kernels::sigmoid(xp->value.size(), xp->value.data(), op->value.data());
  if (x.requires_grad()) {
    nodes_.back().backward = [xp, op]() {
      ensure_grad(xp);
      kernels::sigmoid_backward(op->value.size(), op->value.data(),
                                op->grad.data(), xp->grad.data());
    };
  }
  return out;
}

Tensor Graph::linear(const Tensor& x, const Tensor& weight,
                     const Tensor& bias) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 1)
    throw ContractError("linear: input must be a vector, got " +
                        shape_str(xs));
  if (ws.size() != 2)
    throw ContractError("linear: weight must be m x n, got " + shape_str(ws));
  const int n = xs[0], m = ws[0];
  if (ws[1] != n)
    throw ContractError("linear: weight columns (" + std::to_string(ws[1]) +
                        ") do not match input size (" + std::to_string(n) +
                        ")");
  if (bias.shape() != std::vector<int>{m})
    throw ContractError("linear: bias shape " + shape_str(bias.shape()) +
                        " does not match output size (" + std::to_string(m) +
                        ")");
  const bool needs =
      x.requires_grad() || weight.requires_grad() || bias.requires_grad();
  auto xp = x.ptr();
  auto wp = weight.ptr();
  auto bp = bias.ptr();
  Tensor out = make_node("linear", {id_of(x), id_of(weight), id_of(bias)}, {m},
                         nullptr, needs);
  auto op = out.ptr();
  for (int i = 0; i < m; ++i) {
    op->value[i] =
        bp->value[i] +
        kernels::dot(n, wp->value.data() + static_cast<std::size_t>(i) * n,
                     xp->value.data());
  }
  if (needs) {
    nodes_.back().backward = [xp, wp, bp, op, m, n]() {
      const double* dy = op->grad.data();
      if (bp->requires_grad) {
        ensure_grad(bp);
        for (int i = 0; i < m; ++i) bp->grad[i] += dy[i];
      }
      if (wp->requires_grad) {
        ensure_grad(wp);
        for (int i = 0; i < m; ++i)
          kernels::axpy(n, dy[i], xp->value.data(),
                        wp->grad.data() + static_cast<std::size_t>(i) * n);
      }
      if (xp->requires_grad) {
        ensure_grad(xp);
        for (int i = 0; i < m; ++i)
          kernels::axpy(n, dy[i],
                        wp->value.data() + static_cast<std::size_t>(i) * n,
                        xp->grad.data());
      }
    };
  }
  return out;
}

Tensor Graph::global_avg_pool(const Tensor& x) {
  const auto& xs = x.shape();
  if (xs.size() != 3)
    throw ContractError("global_avg_pool: input must be C x H x W, got " +
                        shape_str(xs));
  const int C = xs[0];
  const std::size_t hw = static_cast<std::size_t>(xs[1]) * xs[2];
  auto xp = x.ptr();
  Tensor out =
      make_node("global_avg_pool", {id_of(x)}, {C}, nullptr, x.requires_grad());
  auto op = out.ptr();
  for (int c = 0; c < C; ++c)
    op->value[c] = kernels::sum(hw, xp->value.data() + c * hw) /
                   static_cast<double>(hw);
  if (x.requires_grad()) {
    nodes_.back().backward = [xp, op, C, hw]() {
      ensure_grad(xp);
      for (int c = 0; c < C; ++c) {
        const double g = op->grad[c] / static_cast<double>(hw);
        double* dx = xp->grad.data() + c * hw;
        for (std::size_t i = 0; i < hw; ++i) dx[i] += g;
      }
    };
  }
  return out;
}

Tensor Graph::avg_pool2d(const Tensor& x, int kh, int kw, int stride,
                         int pad) {
  const auto& xs = x.shape();
  if (xs.size() != 3)
    throw ContractError("avg_pool2d: input must be C x H x W, got " +
                        shape_str(xs));
  if (kh < 1 || kw < 1) throw ContractError("avg_pool2d: kernel must be >= 1");
  if (stride < 1) throw ContractError("avg_pool2d: stride must be >= 1");
  if (pad < 0) throw ContractError("avg_pool2d: padding must be >= 0");
  const int C = xs[0], H = xs[1], W = xs[2];
  if (kh > H + 2 * pad || kw > W + 2 * pad)
    throw ContractError("avg_pool2d: window exceeds padded input");
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  auto xp = x.ptr();
  Tensor out = make_node("avg_pool2d", {id_of(x)}, {C, Ho, Wo}, nullptr,
                         x.requires_grad());
  auto op = out.ptr();
  const double inv = 1.0 / (static_cast<double>(kh) * kw);
  for (int c = 0; c < C; ++c) {
    const double* xc = xp->value.data() + static_cast<std::size_t>(c) * H * W;
    double* yc = op->value.data() + static_cast<std::size_t>(c) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        double acc = 0.0;
        for (int ki = 0; ki < kh; ++ki) {
          const int iy = oy * stride + ki - pad;
          if (iy < 0 || iy >= H) continue;
          for (int kj = 0; kj < kw; ++kj) {
            const int ix = ox * stride + kj - pad;
            if (ix >= 0 && ix < W) acc += xc[static_cast<std::size_t>(iy) * W + ix];
          }
        }
        yc[static_cast<std::size_t>(oy) * Wo + ox] = acc * inv;
      }
    }
  }
  if (x.requires_grad()) {
    nodes_.back().backward = [xp, op, C, H, W, Ho, Wo, kh, kw, stride, pad,
                              inv]() {
      ensure_grad(xp);
      for (int c = 0; c < C; ++c) {
        double* dxc = xp->grad.data() + static_cast<std::size_t>(c) * H * W;
        const double* dyc =
            op->grad.data() + static_cast<std::size_t>(c) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          for (int ox = 0; ox < Wo; ++ox) {
            const double g = dyc[static_cast<std::size_t>(oy) * Wo + ox] * inv;
            for (int ki = 0; ki < kh; ++ki) {
              const int iy = oy * stride + ki - pad;
              if (iy < 0 || iy >= H) continue;
              for (int kj = 0; kj < kw; ++kj) {
                const int ix = ox * stride + kj - pad;
                if (ix >= 0 && ix < W)
                  dxc[static_cast<std::size_t>(iy) * W + ix] += g;
              }
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor Graph::concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ContractError("concat_channels: no inputs");
  int C = 0;
  const int H = xs[0].shape().size() == 3 ? xs[0].shape()[1] : -1;
  const int W = xs[0].shape().size() == 3 ? xs[0].shape()[2] : -1;
  bool needs = false;
  std::vector<int> ids;
  for (const auto& x : xs) {
    const auto& s = x.shape();
    if (s.size() != 3)
      throw ContractError("concat_channels: inputs must be C x H x W, got " +
                          shape_str(s));
    if (s[1] != H || s[2] != W)
      throw ContractError(
          "concat_channels: spatial dims mismatch: " + shape_str(s) +
          " vs (*, " + std::to_string(H) + ", " + std::to_string(W) + ")");
    C += s[0];
    needs = needs || x.requires_grad();
    ids.push_back(id_of(x));
  }
  Tensor out = make_node("concat_channels", ids, {C, H, W}, nullptr, needs);
  auto op = out.ptr();
  std::vector<std::shared_ptr<TensorData>> ps;
  ps.reserve(xs.size());
  for (const auto& x : xs) ps.push_back(x.ptr());
  {
    std::size_t off = 0;
    for (const auto& p : ps) {
      std::memcpy(op->value.data() + off, p->value.data(),
                  p->value.size() * sizeof(double));
      off += p->value.size();
    }
  }
  if (needs) {
    nodes_.back().backward = [ps, op]() {
      std::size_t off = 0;
      for (const auto& p : ps) {
        if (p->requires_grad) {
          ensure_grad(p);
          kernels::axpy(p->value.size(), 1.0, op->grad.data() + off,
                        p->grad.data());
        }
        off += p->value.size();
      }
    };
  }
  return out;
}

Tensor Graph::channel_scale(const Tensor& x, const Tensor& scales) {
  const auto& xs = x.shape();
  if (xs.size() != 3)
    throw ContractError("channel_scale: input must be C x H x W, got " +
                        shape_str(xs));
  const int C = xs[0];
  const std::size_t hw = static_cast<std::size_t>(xs[1]) * xs[2];
  if (scales.shape() != std::vector<int>{C})
    throw ContractError("channel_scale: scales shape " +
                        shape_str(scales.shape()) + " does not match channels (" +
                        std::to_string(C) + ")");
  const bool needs = x.requires_grad() || scales.requires_grad();
  auto xp = x.ptr();
  auto sp = scales.ptr();
  Tensor out = make_node("channel_scale", {id_of(x), id_of(scales)}, xs,
                         nullptr, needs);
  auto op = out.ptr();
  for (int c = 0; c < C; ++c) {
    const double s = sp->value[c];
    const double* xc = xp->value.data() + c * hw;
    double* yc = op->value.data() + c * hw;
    for (std::size_t i = 0; i < hw; ++i) yc[i] = xc[i] * s;
  }
  if (needs) {
    nodes_.back().backward = [xp, sp, op, C, hw]() {
      const double* dy = op->grad.data();
      if (sp->requires_grad) {
        ensure_grad(sp);
        for (int c = 0; c < C; ++c)
          sp->grad[c] +=
              kernels::dot(hw, dy + c * hw, xp->value.data() + c * hw);
      }
      if (xp->requires_grad) {
        ensure_grad(xp);
        for (int c = 0; c < C; ++c)
          kernels::axpy(hw, sp->value[c], dy + c * hw, xp->grad.data() + c * hw);
      }
    };
  }
  return out;
}

Tensor Graph::select(const Tensor& x, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= x.size())
    throw ContractError("select: index " + std::to_string(index) +
                        " out of range for " + std::to_string(x.size()) +
                        " elements");
  auto xp = x.ptr();
  Tensor out =
      make_node("select", {id_of(x)}, {1}, nullptr, x.requires_grad());
  auto op = out.ptr();
  op->value[0] = xp->value[static_cast<std::size_t>(index)];
  if (x.requires_grad()) {
    nodes_.back().backward = [xp, op, index]() {
      ensure_grad(xp);
      xp->grad[static_cast<std::size_t>(index)] += op->grad[0];
    };
  }
  return out;
}

Tensor Graph::scale(const Tensor& x, double c) {
  auto xp = x.ptr();
  Tensor out =
      make_node("scale", {id_of(x)}, x.shape(), nullptr, x.requires_grad());
  auto op = out.ptr();
  for (std::size_t i = 0; i < xp->value.size(); ++i)
    op->value[i] = c * xp->value[i];
  if (x.requires_grad()) {
    nodes_.back().backward = [xp, op, c]() {
      ensure_grad(xp);
      kernels::axpy(xp->value.size(), c, op->grad.data(), xp->grad.data());
    };
  }
  return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ContractError("add: shape mismatch " + shape_str(a.shape()) +
                        " vs " + shape_str(b.shape()));
  const bool needs = a.requires_grad() || b.requires_grad();
  auto ap = a.ptr();
  auto bp = b.ptr();
  Tensor out = make_node("add", {id_of(a), id_of(b)}, a.shape(), nullptr,
                         needs);
  auto op = out.ptr();
  for (std::size_t i = 0; i < ap->value.size(); ++i)
    op->value[i] = ap->value[i] + bp->value[i];
  if (needs) {
    nodes_.back().backward = [ap, bp, op]() {
      if (ap->requires_grad) {
        ensure_grad(ap);
        kernels::axpy(ap->value.size(), 1.0, op->grad.data(), ap->grad.data());
      }
      if (bp->requires_grad) {
        ensure_grad(bp);
        kernels::axpy(bp->value.size(), 1.0, op->grad.data(), bp->grad.data());
      }
    };
  }
  return out;
}

Tensor Graph::sum(const Tensor& x) {
  auto xp = x.ptr();
  Tensor out = make_node("sum", {id_of(x)}, {1}, nullptr, x.requires_grad());
  auto op = out.ptr();
  op->value[0] = kernels::sum(xp->value.size(), xp->value.data());
  if (x.requires_grad()) {
    nodes_.back().backward = [xp, op]() {
      ensure_grad(xp);
      const double g = op->grad[0];
      for (std::size_t i = 0; i < xp->grad.size(); ++i) xp->grad[i] += g;
    };
  }
  return out;
}

Tensor Graph::mean(const Tensor& x) {
  auto xp = x.ptr();
  const double inv = 1.0 / static_cast<double>(x.size());
  Tensor out = make_node("mean", {id_of(x)}, {1}, nullptr, x.requires_grad());
  auto op = out.ptr();
  op->value[0] = kernels::sum(xp->value.size(), xp->value.data()) * inv;
  if (x.requires_grad()) {
    nodes_.back().backward = [xp, op, inv]() {
      ensure_grad(xp);
      const double g = op->grad[0] * inv;
      for (std::size_t i = 0; i < xp->grad.size(); ++i) xp->grad[i] += g;
    };
  }
  return out;
}

Tensor Graph::logistic_nll(const Tensor& mu, const Tensor& log_a,
                           double score) {
  if (mu.size() != 1 || log_a.size() != 1)
    throw ContractError("logistic_nll: mu and log_a must be scalars");
  const bool needs = mu.requires_grad() || log_a.requires_grad();
  auto mp = mu.ptr();
  auto lp = log_a.ptr();
  Tensor out = make_node("logistic_nll", {id_of(mu), id_of(log_a)}, {1},
                         nullptr, needs);
  auto op = out.ptr();
  const double m = mp->value[0];
  const double la = lp->value[0];
  const double a = std::exp(la);
  const double z = (score - m) / (2.0 * a);
  // 2*log(cosh(z)) evaluated without overflow:
  // cosh(z) = exp(|z|) * (1 + exp(-2|z|)) / 2.
  const double az = std::fabs(z);
  const double logcosh = az + std::log1p(std::exp(-2.0 * az)) - std::log(2.0);
  op->value[0] = la + std::log(4.0) + 2.0 * logcosh;
  if (needs) {
    nodes_.back().backward = [mp, lp, op, z, a]() {
      const double g = op->grad[0];
      const double th = std::tanh(z);
      if (mp->requires_grad) {
        ensure_grad(mp);
        mp->grad[0] += g * (-th / a);
      }
      if (lp->requires_grad) {
        ensure_grad(lp);
        lp->grad[0] += g * (1.0 - 2.0 * z * th);
      }
    };
  }
  return out;
}

void Graph::backward(const Tensor& loss) {
  if (ran_backward_)
    throw ContractError("graph: backward already ran on this graph");
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("graph: backward requires a scalar loss");
  auto it = ids_.find(loss.ptr().get());
  if (it == ids_.end())
    throw ContractError("graph: loss tensor does not belong to this graph");
  ran_backward_ = true;
  ensure_grad(loss.ptr());
  loss.ptr()->grad[0] += 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    GraphNode& node = nodes_[i];
    if (!node.needs_grad || !node.backward) continue;
    if (node.out->grad.empty()) continue;  // not on any path to the loss
    node.backward();
  }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState::AdamState(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) ||
      !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0))
    throw ContractError("adam: betas must lie in [0, 1)");
  if (!(cfg_.epsilon > 0.0)) throw ContractError("adam: epsilon must be > 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamState::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double step_size = cfg_.lr / bc1;
  const double inv_bc2 = 1.0 / bc2;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) p.ptr()->grad.assign(p.size(), 0.0);
    const double* g = p.grad();
    if (!kernels::all_finite(p.size(), g))
      throw NumericError("adam_step: non-finite gradient");
    kernels::adam_update(p.size(), p.data(), g, m_[i].data(), v_[i].data(),
                         cfg_.beta1, cfg_.beta2, cfg_.epsilon, step_size,
                         inv_bc2);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& build,
                  const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be > 0");
  Tensor xa = x.clone();
  xa.set_requires_grad(true);
  std::vector<double> ga;
  {
    Graph g;
    Tensor out = build(g, xa);
    if (out.size() != 1)
      throw ContractError("grad_check: build must return a scalar");
    g.backward(out);
    ga = xa.has_grad()
             ? std::vector<double>(xa.grad(), xa.grad() + xa.size())
             : std::vector<double>(xa.size(), 0.0);
  }
  double max_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x.clone();
    xp.data()[i] += eps;
    Tensor xm = x.clone();
    xm.data()[i] -= eps;
    double fp, fm;
    {
      Graph g;
      fp = build(g, xp).item();
    }
    {
      Graph g;
      fm = build(g, xm).item();
    }
    const double gn = (fp - fm) / (2.0 * eps);
    const double err = std::fabs(ga[i] - gn) / std::max(1.0, std::fabs(gn));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace rfgml
