#include <cmath>

#include "kernels_internal.hpp"

// Reference kernels. Plain loops, no intrinsics; this TU is compiled without
// arch flags so the compiler cannot contract into FMA and the results stay a
// stable baseline for the SIMD equivalence tests.

namespace rfgml::kernels::scalar_impl {

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum(std::size_t n, const double* x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void relu(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(std::size_t n, const double* x, const double* dy,
                   double* dx) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

void sigmoid(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) {
    // Split on sign so exp never overflows.
    if (x[i] >= 0.0) {
      y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    } else {
      const double e = std::exp(x[i]);
      y[i] = e / (1.0 + e);
    }
  }
}

void sigmoid_backward(std::size_t n, const double* y, const double* dy,
                      double* dx) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
}

void adam_update(std::size_t n, double* p, const double* g, double* m,
                 double* v, double beta1, double beta2, double eps,
                 double step_size, double inv_bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
  }
}

bool all_finite(std::size_t n, const double* x) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

}  // namespace rfgml::kernels::scalar_impl
