#include "wapiti/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wapiti/core.hpp"

namespace wapiti {

double normal_sf(double z) {
  double p = 0.5 * std::erfc(z / std::sqrt(2.0));
  return std::clamp(p, 0.0, 1.0);
}

double binomial_sf(int64_t count, int64_t trials, double gamma) {
  if (trials < 1) throw ValidationError("binomial_sf needs trials >= 1");
  if (gamma <= 0.0 || gamma >= 1.0)
    throw ValidationError("binomial_sf needs gamma in (0,1)");
  if (count <= 0) return 1.0;
  if (count > trials) return 0.0;
  double lg = std::log(gamma), lq = std::log1p(-gamma);
  double lgt = std::lgamma(static_cast<double>(trials) + 1.0);
  // log P[X = i] for i in [count, trials], summed from its maximum for
  // stability.
  double max_term = -HUGE_VAL;
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(trials - count) + 1);
  for (int64_t i = count; i <= trials; ++i) {
    double t = lgt - std::lgamma(static_cast<double>(i) + 1.0) -
               std::lgamma(static_cast<double>(trials - i) + 1.0) +
               static_cast<double>(i) * lg + static_cast<double>(trials - i) * lq;
    terms.push_back(t);
    max_term = std::max(max_term, t);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - max_term);
  double p = std::exp(max_term) * s;
  return std::clamp(p, 0.0, 1.0);
}

namespace {

double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double n = a;
  for (int i = 0; i < 1000; ++i) {
    n += 1.0;
    term *= x / n;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  double lg = std::log(sum) + a * std::log(x) - x - std::lgamma(a);
  return std::exp(lg);
}

double gamma_q_contfrac(double a, double x) {
  // Lentz's method for the continued fraction of Q(a, x).
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(a * std::log(x) - x - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (a <= 0.0) throw ValidationError("gamma_q needs shape a > 0");
  if (x < 0.0) throw ValidationError("gamma_q needs x >= 0");
  if (x == 0.0) return 1.0;
  double q = x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_contfrac(a, x);
  return std::clamp(q, 0.0, 1.0);
}

double ks_uniformity(std::span<const double> pvalues) {
  if (pvalues.empty()) throw ValidationError("ks_uniformity needs at least one value");
  std::vector<double> x(pvalues.begin(), pvalues.end());
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError("ks_uniformity values must lie in [0,1]");
  std::sort(x.begin(), x.end());
  double n = static_cast<double>(x.size());
  double d = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - x[i]);
    d = std::max(d, x[i] - static_cast<double>(i) / n);
  }
  return d;
}

double ks_critical(size_t n, double alpha) {
  if (n == 0 || alpha <= 0.0 || alpha >= 1.0)
    throw ValidationError("ks_critical needs n >= 1 and alpha in (0,1)");
  double c = std::sqrt(0.5 * std::log(2.0 / alpha));
  double sn = std::sqrt(static_cast<double>(n));
  return c / (sn + 0.12 + 0.11 / sn);
}

namespace {

// Midranks of the concatenation, returned aligned with the input order.
std::vector<double> midranks(std::span<const double> v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

}  // namespace

double auroc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty())
    throw ValidationError("auroc needs non-empty positive and negative score lists");
  std::vector<double> all(positives.begin(), positives.end());
  all.insert(all.end(), negatives.begin(), negatives.end());
  std::vector<double> r = midranks(all);
  double rank_sum = 0.0;
  for (size_t i = 0; i < positives.size(); ++i) rank_sum += r[i];
  double np = static_cast<double>(positives.size());
  double nn = static_cast<double>(negatives.size());
  double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ValidationError("spearman needs two equal-length lists of size >= 2");
  std::vector<double> rx = midranks(x), ry = midranks(y);
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw ValidationError("spearman undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

double median(std::span<const double> values) {
  if (values.empty()) throw ValidationError("median of empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace wapiti
