#pragma once

#include <cstddef>

// Data-parallel inner loops used by the tensor engine and the DSP frontend.
// Each primitive has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active variant is selected at runtime from CPUID and
// can be forced with the RFGML_KERNELS environment variable ("scalar",
// "avx2", "auto") or set_backend(). Both variants are deterministic; they may
// differ from each other in the last few ulps (FMA contraction, multi-
// accumulator reduction order), which the equivalence tests bound.

namespace rfgml::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_available(Backend b);
void set_backend(Backend b);  // throws ContractError if unavailable
const char* backend_name(Backend b);

// y += a * x
void axpy(std::size_t n, double a, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
void relu(std::size_t n, const double* x, double* y);
// dx += dy where x > 0
void relu_backward(std::size_t n, const double* x, const double* dy,
                   double* dx);
void sigmoid(std::size_t n, const double* x, double* y);
// dx += dy * y * (1 - y), y = sigmoid(x)
void sigmoid_backward(std::size_t n, const double* y, const double* dy,
                      double* dx);
// Fused Adam update: m,v moment update + bias-corrected parameter step.
//   m = beta1*m + (1-beta1)*g
//   v = beta2*v + (1-beta2)*g^2
//   p -= step_size * m / (sqrt(v * inv_bc2) + eps)
// where step_size = lr / (1 - beta1^t) and inv_bc2 = 1 / (1 - beta2^t).
void adam_update(std::size_t n, double* p, const double* g, double* m,
                 double* v, double beta1, double beta2, double eps,
                 double step_size, double inv_bc2);
bool all_finite(std::size_t n, const double* x);

}  // namespace rfgml::kernels
