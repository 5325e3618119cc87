#pragma once

#include <cstddef>

// Per-backend entry points. The dispatcher in kernels.cpp wires one set into
// the public API; the equivalence tests switch backends and call through the
// public API so both paths stay covered.

namespace rfgml::kernels::scalar_impl {
void axpy(std::size_t n, double a, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
void relu(std::size_t n, const double* x, double* y);
void relu_backward(std::size_t n, const double* x, const double* dy,
                   double* dx);
void sigmoid(std::size_t n, const double* x, double* y);
void sigmoid_backward(std::size_t n, const double* y, const double* dy,
                      double* dx);
void adam_update(std::size_t n, double* p, const double* g, double* m,
                 double* v, double beta1, double beta2, double eps,
                 double step_size, double inv_bc2);
bool all_finite(std::size_t n, const double* x);
}  // namespace rfgml::kernels::scalar_impl

#if defined(RFGML_HAVE_AVX2)
namespace rfgml::kernels::avx2_impl {
void axpy(std::size_t n, double a, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
double sum(std::size_t n, const double* x);
void relu(std::size_t n, const double* x, double* y);
void relu_backward(std::size_t n, const double* x, const double* dy,
                   double* dx);
void sigmoid(std::size_t n, const double* x, double* y);
void sigmoid_backward(std::size_t n, const double* y, const double* dy,
                      double* dx);
void adam_update(std::size_t n, double* p, const double* g, double* m,
                 double* v, double beta1, double beta2, double eps,
                 double step_size, double inv_bc2);
bool all_finite(std::size_t n, const double* x);
}  // namespace rfgml::kernels::avx2_impl
#endif
