#include "rfgml/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

#include "kernels_internal.hpp"
#include "rfgml/common.hpp"

namespace rfgml::kernels {

namespace {

struct Vtable {
  void (*axpy)(std::size_t, double, const double*, double*);
  double (*dot)(std::size_t, const double*, const double*);
  double (*sum)(std::size_t, const double*);
  void (*relu)(std::size_t, const double*, double*);
  void (*relu_backward)(std::size_t, const double*, const double*, double*);
  void (*sigmoid)(std::size_t, const double*, double*);
  void (*sigmoid_backward)(std::size_t, const double*, const double*, double*);
  void (*adam_update)(std::size_t, double*, const double*, double*, double*,
                      double, double, double, double, double);
  bool (*all_finite)(std::size_t, const double*);
};

constexpr Vtable kScalar = {
    scalar_impl::axpy,           scalar_impl::dot,
    scalar_impl::sum,            scalar_impl::relu,
    scalar_impl::relu_backward,  scalar_impl::sigmoid,
    scalar_impl::sigmoid_backward, scalar_impl::adam_update,
    scalar_impl::all_finite,
};

#if defined(RFGML_HAVE_AVX2)
constexpr Vtable kAvx2 = {
    avx2_impl::axpy,           avx2_impl::dot,
    avx2_impl::sum,            avx2_impl::relu,
    avx2_impl::relu_backward,  avx2_impl::sigmoid,
    avx2_impl::sigmoid_backward, avx2_impl::adam_update,
    avx2_impl::all_finite,
};
#endif

bool cpu_has_avx2() {
#if defined(RFGML_HAVE_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct Dispatch {
  Backend backend;
  const Vtable* vt;

  Dispatch() {
    backend = Backend::scalar;
    vt = &kScalar;
    bool want_avx2 = cpu_has_avx2();
    if (const char* env = std::getenv("RFGML_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) {
        want_avx2 = false;
      } else if (std::strcmp(env, "avx2") == 0) {
        if (!cpu_has_avx2())
          throw ContractError("RFGML_KERNELS=avx2 but AVX2 is unavailable");
      } else if (std::strcmp(env, "auto") != 0 && env[0] != '\0') {
        throw ContractError(std::string("RFGML_KERNELS: unknown backend '") +
                            env + "' (expected scalar, avx2 or auto)");
      }
    }
#if defined(RFGML_HAVE_AVX2)
    if (want_avx2) {
      backend = Backend::avx2;
      vt = &kAvx2;
    }
#endif
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

bool backend_available(Backend b) {
  if (b == Backend::scalar) return true;
  return cpu_has_avx2();
}

void set_backend(Backend b) {
  Dispatch& d = dispatch();
  if (b == Backend::scalar) {
    d.backend = Backend::scalar;
    d.vt = &kScalar;
    return;
  }
#if defined(RFGML_HAVE_AVX2)
  if (b == Backend::avx2 && cpu_has_avx2()) {
    d.backend = Backend::avx2;
    d.vt = &kAvx2;
    return;
  }
#endif
  throw ContractError("set_backend: requested backend is unavailable");
}

const char* backend_name(Backend b) {
  return b == Backend::scalar ? "scalar" : "avx2";
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  dispatch().vt->axpy(n, a, x, y);
}
double dot(std::size_t n, const double* x, const double* y) {
  return dispatch().vt->dot(n, x, y);
}
double sum(std::size_t n, const double* x) { return dispatch().vt->sum(n, x); }
void relu(std::size_t n, const double* x, double* y) {
  dispatch().vt->relu(n, x, y);
}
void relu_backward(std::size_t n, const double* x, const double* dy,
                   double* dx) {
  dispatch().vt->relu_backward(n, x, dy, dx);
}
void sigmoid(std::size_t n, const double* x, double* y) {
  dispatch().vt->sigmoid(n, x, y);
}
void sigmoid_backward(std::size_t n, const double* y, const double* dy,
                      double* dx) {
  dispatch().vt->sigmoid_backward(n, y, dy, dx);
}
void adam_update(std::size_t n, double* p, const double* g, double* m,
                 double* v, double beta1, double beta2, double eps,
                 double step_size, double inv_bc2) {
  dispatch().vt->adam_update(n, p, g, m, v, beta1, beta2, eps, step_size,
                             inv_bc2);
}
bool all_finite(std::size_t n, const double* x) {
  return dispatch().vt->all_finite(n, x);
}

}  // namespace rfgml::kernels
