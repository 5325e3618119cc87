#include "rfgml/score.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rfgml {

double ScoreDistribution::a() const { return std::exp(log_a); }

double nll(const ScoreDistribution& d, double score) {
  const double a = d.a();
  if (!(a > 0.0) || !std::isfinite(a))
    throw NumericError("nll: scale exp(log_a) is not positive and finite");
  const double z = (score - d.mu) / (2.0 * a);
  const double az = std::fabs(z);
  const double logcosh = az + std::log1p(std::exp(-2.0 * az)) - std::log(2.0);
  // log(4a) = log 4 + log_a, evaluated from log_a directly.
  return d.log_a + std::log(4.0) + 2.0 * logcosh;
}

double std_of(const ScoreDistribution& d) {
  return 3.14159265358979323846 * d.a() / std::sqrt(3.0);
}

double sample(const ScoreDistribution& d, Rng& rng) {
  const double u = rng.uniform();  // open (0,1), so the logit is finite
  return d.mu + d.a() * std::log(u / (1.0 - u));
}

std::pair<double, double> confidence_interval(const ScoreDistribution& d,
                                              int n_listeners, double level) {
  if (n_listeners < 2)
    throw ContractError("confidence_interval: need at least 2 listeners, got " +
                        std::to_string(n_listeners));
  if (!(level >= 0.0 && level < 1.0))
    throw ContractError("confidence_interval: level must lie in [0, 1)");
  const double q = t_quantile((1.0 + level) / 2.0,
                              static_cast<double>(n_listeners - 1));
  const double half = q * std_of(d) / std::sqrt(static_cast<double>(n_listeners));
  return {d.mu - half, d.mu + half};
}

// ---------------------------------------------------------------------------
// Incomplete beta / Student t
// ---------------------------------------------------------------------------

namespace {

// Continued fraction for I_x(a,b) (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ContractError("incomplete_beta: a and b must be > 0");
  if (!(x >= 0.0 && x <= 1.0))
    throw ContractError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
  // Use the symmetric form on whichever side converges fast.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ContractError("t_cdf: df must be > 0");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double t_quantile(double p, double df) {
  if (!(df >= 1.0)) throw ContractError("t_quantile: df must be >= 1");
  if (!(p > 0.0 && p < 1.0))
    throw ContractError("t_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double pu = upper ? p : 1.0 - p;  // solve in the upper half
  // Bracket the root, then bisect with Newton acceleration on the CDF.
  double lo = 0.0;
  double hi = 2.0;
  while (t_cdf(hi, df) < pu) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericError("t_quantile: failed to bracket quantile");
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = t_cdf(t, df) - pu;
    if (f > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    // t pdf = Gamma((df+1)/2) / (sqrt(df*pi) Gamma(df/2)) (1+t^2/df)^-((df+1)/2)
    const double lpdf = std::lgamma((df + 1.0) / 2.0) -
                        std::lgamma(df / 2.0) -
                        0.5 * std::log(df * 3.14159265358979323846) -
                        ((df + 1.0) / 2.0) * std::log1p(t * t / df);
    const double pdf = std::exp(lpdf);
    double next = t - f / pdf;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - t) < 1e-12 * (1.0 + std::fabs(t))) {
      t = next;
      break;
    }
    t = next;
  }
  return upper ? t : -t;
}

}  // namespace rfgml
