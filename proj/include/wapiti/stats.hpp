#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wapiti {

// P[Z >= z] for standard normal Z, via the complementary error function.
double normal_sf(double z);

// Upper tail P[Binomial(T, gamma) >= count], exact via stable log-space
// summation. Returns 1 for count <= 0 and 0 for count > T.
double binomial_sf(int64_t count, int64_t trials, double gamma);

// Regularized upper incomplete gamma Q(a, x) = P[Gamma(shape=a, scale=1) >= x].
// Series for x < a+1, continued fraction otherwise.
double gamma_q(double a, double x);

// Sup distance between the empirical CDF of `pvalues` and Uniform(0,1).
// Every value must lie in [0,1].
double ks_uniformity(std::span<const double> pvalues);

// Asymptotic two-sided KS critical value with the Stephens small-sample
// correction. Approximate; tests against a pinned constant where exactness
// matters.
double ks_critical(size_t n, double alpha);

// Mann-Whitney AUROC: fraction of (positive, negative) pairs with
// positive > negative, ties counted 0.5.
double auroc(std::span<const double> positives, std::span<const double> negatives);

// Spearman rank correlation with midranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

double median(std::span<const double> values);

}  // namespace wapiti
