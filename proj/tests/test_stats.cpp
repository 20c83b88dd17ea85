#include <cmath>
#include <vector>

#include <doctest.h>

#include "wapiti/core.hpp"
#include "wapiti/prng.hpp"
#include "wapiti/stats.hpp"

using namespace wapiti;
using doctest::Approx;

TEST_CASE("normal survival at textbook points") {
  CHECK(normal_sf(0.0) == Approx(0.5).epsilon(1e-15));
  CHECK(normal_sf(1.0) == Approx(0.15865525393145707).epsilon(1e-14));
  CHECK(normal_sf(2.0) == Approx(0.02275013194817922).epsilon(1e-14));
  CHECK(normal_sf(-1.0) == Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(normal_sf(50.0) >= 0.0);
  CHECK(normal_sf(-50.0) == Approx(1.0));
}

TEST_CASE("binomial tail exact small cases") {
  CHECK(binomial_sf(1, 4, 0.25) == Approx(0.68359375).epsilon(1e-14));
  CHECK(binomial_sf(4, 4, 0.25) == Approx(0.00390625).epsilon(1e-14));
  CHECK(binomial_sf(0, 4, 0.25) == 1.0);
  CHECK(binomial_sf(-3, 4, 0.25) == 1.0);
  CHECK(binomial_sf(5, 4, 0.25) == 0.0);
}

TEST_CASE("binomial tail matches exact rational computation at T=200") {
  CHECK(binomial_sf(80, 200, 0.25) ==
        Approx(2.2251883747785036e-06).epsilon(1e-12));
}

TEST_CASE("binomial tail stays in range deep in the tail") {
  double p = binomial_sf(200, 200, 0.25);
  CHECK(p > 0.0);
  CHECK(p <= 1.0);
  CHECK(p == Approx(std::pow(0.25, 200)).epsilon(1e-10));
}

TEST_CASE("regularized upper incomplete gamma") {
  CHECK(gamma_q(1.0, std::log(2.0)) == Approx(0.5).epsilon(1e-13));
  CHECK(gamma_q(2.0, 2.0) == Approx(0.4060058497098381).epsilon(1e-13));
  // x > a+1 exercises the continued-fraction branch
  CHECK(gamma_q(2.0, 10.0) == Approx(0.0004993992273873334).epsilon(1e-12));
  // x < a+1 exercises the series branch
  CHECK(gamma_q(5.0, 2.5) == Approx(0.8911780189141512).epsilon(1e-13));
  CHECK(gamma_q(3.0, 0.0) == 1.0);
}

TEST_CASE("ks statistic forced geometries") {
  size_t n = 8;
  std::vector<double> grid;
  for (size_t i = 1; i <= n; ++i)
    grid.push_back((static_cast<double>(i) - 0.5) / static_cast<double>(n));
  CHECK(ks_uniformity(grid) == Approx(0.5 / static_cast<double>(n)).epsilon(1e-15));

  std::vector<double> all_half(100, 0.5);
  CHECK(ks_uniformity(all_half) == Approx(0.5).epsilon(1e-15));
}

TEST_CASE("ks statistic rejects out-of-range values") {
  std::vector<double> bad{0.2, 1.5};
  CHECK_THROWS_AS(ks_uniformity(bad), ValidationError);
  std::vector<double> empty;
  CHECK_THROWS_AS(ks_uniformity(empty), ValidationError);
}

TEST_CASE("ks critical value, Stephens correction") {
  CHECK(ks_critical(1000, 0.005) == Approx(0.05452039545334109).epsilon(1e-12));
  CHECK(ks_critical(500, 0.005) == Approx(0.07697452814200019).epsilon(1e-12));
}

TEST_CASE("uniform stream passes its own ks test") {
  std::vector<double> us = uniform_stream(2024, 1000);
  CHECK(ks_uniformity(us) < ks_critical(1000, 0.005));
  double m = 0.0;
  std::vector<double> copy = us;
  m = median(copy);
  CHECK(m > 0.45);
  CHECK(m < 0.55);
}

TEST_CASE("auroc hand example and edge cases") {
  std::vector<double> pos{3.0, 1.0};
  std::vector<double> neg{2.0, 0.0};
  CHECK(auroc(pos, neg) == Approx(0.75).epsilon(1e-15));

  std::vector<double> tied{1.0, 1.0};
  CHECK(auroc(tied, tied) == Approx(0.5).epsilon(1e-15));

  std::vector<double> hi{10.0, 11.0};
  std::vector<double> lo{1.0, 2.0};
  CHECK(auroc(hi, lo) == 1.0);
  CHECK(auroc(lo, hi) == 0.0);

  std::vector<double> empty;
  CHECK_THROWS_AS(auroc(empty, lo), ValidationError);
}

TEST_CASE("spearman rank correlation") {
  std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> inc{2.0, 4.0, 9.0, 16.0, 100.0};
  std::vector<double> dec{5.0, 4.0, 3.0, 2.0, 1.0};
  CHECK(spearman(x, inc) == Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, dec) == Approx(-1.0).epsilon(1e-15));

  std::vector<double> ties_y{1.0, 1.0, 2.0, 2.0, 3.0};
  double r = spearman(x, ties_y);
  CHECK(r > 0.9);
  CHECK(r <= 1.0);

  std::vector<double> constant(5, 7.0);
  CHECK_THROWS_AS(spearman(x, constant), ValidationError);
  std::vector<double> shorter{1.0, 2.0};
  CHECK_THROWS_AS(spearman(x, shorter), ValidationError);
}

TEST_CASE("median of odd and even counts") {
  std::vector<double> odd{5.0, 1.0, 3.0};
  CHECK(median(odd) == 3.0);
  std::vector<double> even{4.0, 1.0, 3.0, 2.0};
  CHECK(median(even) == Approx(2.5).epsilon(1e-15));
  std::vector<double> empty;
  CHECK_THROWS_AS(median(empty), ValidationError);
}
