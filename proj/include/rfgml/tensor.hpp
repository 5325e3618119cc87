#pragma once

// Reverse-mode automatic differentiation over dense double-precision tensors.
// Graphs are single-use tapes: build the forward pass, call backward() once,
// then discard the graph. Construction order is the topological order, and
// backward visits each node exactly once in reverse. Gradients accumulate
// (+=) into leaf tensors, so running several graphs between zero_grad() calls
// implements batch gradient accumulation.

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rfgml/common.hpp"

namespace rfgml {

struct TensorData {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until backward touches this tensor
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double fill,
                     bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(p_); }
  const std::vector<int>& shape() const;
  std::size_t size() const;
  double* data();
  const double* data() const;
  double item() const;  // throws unless the tensor is scalar
  bool requires_grad() const;
  void set_requires_grad(bool v);
  bool has_grad() const;
  double* grad();
  const double* grad() const;
  void zero_grad();          // clears accumulated gradient
  Tensor clone() const;      // deep copy of values (grad not copied)

  std::shared_ptr<TensorData> ptr() const { return p_; }

 private:
  explicit Tensor(std::shared_ptr<TensorData> p) : p_(std::move(p)) {}
  std::shared_ptr<TensorData> p_;
  friend class Graph;
};

std::size_t numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Uniform init in [lo, hi); used for PyTorch-style fan-in initialization.
Tensor random_uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                      bool requires_grad = false);

enum class Activation { relu, sigmoid };
Activation activation_from_string(const std::string& name);

struct GraphNode {
  std::string op;
  std::vector<int> inputs;  // node ids
  std::shared_ptr<TensorData> out;
  std::function<void()> backward;
  bool needs_grad = false;
};

class Graph {
 public:
  // Registers a tensor as an input node (done implicitly by ops).
  Tensor leaf(const Tensor& t);

  // input: C x H x W, kernels: O x C x kh x kw, bias: O.
  // Cross-correlation with zero padding.
  Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                std::pair<int, int> stride, std::pair<int, int> padding);
  Tensor activation(const Tensor& x, Activation kind);
  Tensor relu(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  // x: n, weight: m x n, bias: m -> m
  Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
  // C x H x W -> C
  Tensor global_avg_pool(const Tensor& x);
  // Average pooling, zeros padded cells counted in the divisor.
  Tensor avg_pool2d(const Tensor& x, int kh, int kw, int stride, int pad);
  Tensor concat_channels(const std::vector<Tensor>& xs);
  // y[c,h,w] = x[c,h,w] * s[c]
  Tensor channel_scale(const Tensor& x, const Tensor& scales);
  Tensor select(const Tensor& x, int index);  // flat index -> scalar
  Tensor scale(const Tensor& x, double c);
  Tensor add(const Tensor& a, const Tensor& b);  // same shape, elementwise
  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);
  // Negative log-likelihood of `score` under the logistic density with
  // location mu and scale exp(log_a); both parameters are scalar tensors.
  Tensor logistic_nll(const Tensor& mu, const Tensor& log_a, double score);

  void backward(const Tensor& loss);
  std::size_t node_count() const { return nodes_.size(); }
  const GraphNode& node(std::size_t i) const { return nodes_[i]; }

 private:
  int id_of(const Tensor& t);
  Tensor make_node(std::string op, std::vector<int> input_ids,
                   std::vector<int> out_shape,
                   std::function<void()> backward_fn, bool needs_grad);
  static void ensure_grad(const std::shared_ptr<TensorData>& t);

  std::vector<GraphNode> nodes_;
  std::unordered_map<TensorData*, int> ids_;
  bool ran_backward_ = false;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. step() reads each parameter's accumulated
// gradient; parameters without a gradient are treated as zero-gradient.
class AdamState {
 public:
  AdamState(std::vector<Tensor> params, AdamConfig cfg);
  void step();
  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

// Max relative error between the analytic gradient of build(g, x) w.r.t. x
// and central finite differences: max_i |ga_i - gn_i| / max(1, |gn_i|).
double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& build,
                  const Tensor& x, double eps = 1e-5);

}  // namespace rfgml
