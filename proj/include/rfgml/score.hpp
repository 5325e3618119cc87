#pragma once

// Per-item score model: a two-parameter logistic distribution over MUSHRA
// scores, parameterized by location mu and log-scale log_a. The density is
//   p(s) = sech^2((s - mu) / (2a)) / (4a),   a = exp(log_a)
// so the negative log-likelihood is log(4a) + 2 log cosh((s - mu) / (2a)).

#include <cstdint>
#include <utility>

#include "rfgml/common.hpp"

namespace rfgml {

struct ScoreDistribution {
  double mu = 0.0;     // expected in [0, 100] when produced by the model
  double log_a = 0.0;  // log of the logistic scale parameter

  double a() const;    // exp(log_a)
};

// Negative log-likelihood of a score under the distribution, evaluated in a
// form that stays finite for |s - mu| up to overflow range:
//   2 log cosh(z) = 2 (|z| + log1p(exp(-2|z|)) - log 2).
double nll(const ScoreDistribution& d, double score);

// Standard deviation of the logistic distribution: pi * a / sqrt(3).
double std_of(const ScoreDistribution& d);

// Inverse-CDF sampling: s = mu + a * ln(u / (1 - u)), u ~ U(0,1).
// Draws are NOT clamped to [0, 100]; clamping is a reporting choice.
double sample(const ScoreDistribution& d, Rng& rng);

// Two-sided confidence interval for the mean of n listener scores drawn from
// the distribution: mu +/- t_{(1+level)/2, n-1} * std / sqrt(n).
// Requires n >= 2 and 0 <= level < 1.
std::pair<double, double> confidence_interval(const ScoreDistribution& d,
                                              int n_listeners, double level);

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation (also the basis of the Student t CDF below).
double incomplete_beta(double a, double b, double x);

// CDF of Student's t with df degrees of freedom.
double t_cdf(double t, double df);

// Quantile of Student's t: smallest t with CDF(t) = p, found by inverting
// the incomplete beta via bracketing + bisection/Newton. df >= 1, 0 < p < 1.
double t_quantile(double p, double df);

}  // namespace rfgml
