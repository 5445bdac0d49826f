#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "exact_dp.hpp"
#include "lpp/errors.hpp"
#include "lpp/product_dist.hpp"

using namespace lpp;
using lpp_test::exact_lpp_cdf;
using lpp_test::geom_sum_cdf;

namespace {

ModelParams product(int n, double r, double sq) {
    ModelParams p;
    p.N = n;
    p.r = r;
    p.sqrt_q = sq;
    p.variant = Variant::ProductStationary;
    return p;
}

std::function<double(int, int)> product_weights(double r, double sq) {
    return [=](int i, int j) -> double {
        if (i == 1 && j == 1) return 0.0;
        if (i == j) return r * sq;
        if (j == 1) return sq / r;
        return sq * sq;
    };
}

// G^stat_{r,r}(n + 1, n + 1) - G^stat_{r,r}(2, 2) from the two-parameter weights.
std::int64_t two_param_diff_sample(int n, double r, double sq, Rng& rng) {
    const int m = n + 1;
    std::vector<std::vector<std::int64_t>> w(m + 1, std::vector<std::int64_t>(m + 1, 0));
    for (int j = 1; j <= m; ++j)
        for (int i = j; i <= m; ++i) {
            double x = sq * sq;
            if (j == 1) x = i <= 2 ? 0.0 : sq / r;
            else if (i == j) x = i == 2 ? r * r : r * sq;
            else if (j == 2) x = sq * r;
            w[i][j] = sample_geom(x, rng);
        }
    return lpp_value(w, m) - w[2][2];
}

}  // namespace

TEST_CASE("N = 1: G = 0") {
    const auto cdf = cdf_product_table(product(1, 0.8, 0.5), 0, 6);
    for (double v : cdf) CHECK(std::abs(v - 1.0) < 1e-10);
    GeoContext ctx(product(1, 0.8, 0.5), 0, 6);
    for (int d = 0; d <= 6; ++d) CHECK(ctx.e_r(d) == doctest::Approx(d + 1).epsilon(1e-10));
    GeoContext one(product(1, 1.0, 0.5), 0, 4);
    for (int d = 0; d <= 4; ++d) CHECK(one.e_r(d) == doctest::Approx(d + 1).epsilon(1e-10));
}

TEST_CASE("N = 2: convolution of two geometrics") {
    const double sq = 0.5;
    for (double r : {0.7, 1.0, 1.3}) {
        const auto cdf = cdf_product_table(product(2, r, sq), 0, 10);
        const double a = sq / r, b = r * sq;
        for (int d = 0; d <= 10; ++d) {
            double ex;
            if (std::abs(a - b) < 1e-12) ex = geom_sum_cdf({a, b}, d)[d];
            else ex = 1 - (std::pow(a, d + 2) * (1 - b) - std::pow(b, d + 2) * (1 - a)) / (a - b);
            CHECK(std::abs(cdf[d] - ex) < 1e-8);
        }
    }
}

TEST_CASE("N = 3, 4 against exact enumeration") {
    const double sq = 0.5;
    for (int n : {3, 4})
        for (double r : {0.7, 0.9, 1.3}) {
            CAPTURE(n);
            CAPTURE(r);
            const int dm = n == 3 ? 8 : 6;
            const auto cdf = cdf_product_table(product(n, r, sq), 0, dm);
            const auto ex = exact_lpp_cdf(n, dm, product_weights(r, sq));
            for (int d = 0; d <= dm; ++d) CHECK(std::abs(cdf[d] - ex[d]) < 1e-9);
        }
}

TEST_CASE("h: the r = 1 branch and its neighbourhood") {
    const double sq = 0.5;
    for (int d : {0, 3})
        for (int k = d + 1; k <= d + 6; ++k) {
            const double h1 = h_product(1.0, sq, 3, d, k);
            CHECK(h1 == doctest::Approx(2 * k - 2 * d - 1));
            const double lo = h_product(1 - 1e-5, sq, 3, d, k);
            const double hi = h_product(1 + 1e-5, sq, 3, d, k);
            CHECK(std::min(lo, hi) <= h1 + 1e-9);
            CHECK(std::max(lo, hi) >= h1 - 1e-9);
            CHECK(std::abs(hi - lo) < 1e-3);
        }
    CHECK(h_product(1.0, sq, 4, 2, 3) == doctest::Approx(1.0));
    CHECK(h_product(1.0 + 1e-9, sq, 4, 2, 3) == doctest::Approx(1.0));
}

TEST_CASE("kernel antisymmetry and the sign term") {
    GeoContext ctx(product(4, 0.9, 0.5), 0, 4);
    for (int k = ctx.k_first(); k < ctx.k_first() + 10; ++k) {
        const auto kk = ctx.kbar_geo(k, k);
        CHECK(std::abs(kk(0, 0)) < 1e-12);
        CHECK(std::abs(kk(1, 1)) < 1e-12);
        for (int l = ctx.k_first(); l < ctx.k_first() + 10; ++l) {
            const auto a = ctx.kbar_geo(k, l), b = ctx.kbar_geo(l, k);
            CHECK(std::abs(a(0, 0) + b(0, 0)) < 1e-9);
            CHECK(std::abs(a(1, 1) + b(1, 1)) < 1e-9);
            CHECK(std::abs(a(1, 0) + b(0, 1)) < 1e-9);
        }
    }
    const auto blocks = ctx.kbar(2);
    CHECK((blocks.k11 + blocks.k11.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((blocks.k22 + blocks.k22.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ctx.imag_residue() < 1e-9);
}

TEST_CASE("node doubling and truncation self-convergence") {
    const auto p = product(4, 0.9, 0.5);
    GeoContext base(p, 3, 3);
    ProductOptions o1, o2;
    o1.nodes = base.nodes_per_circle();
    o2.nodes = 2 * base.nodes_per_circle();
    GeoContext c1(p, 3, 3, o1), c2(p, 3, 3, o2);
    for (int k = c1.k_first(); k < c1.k_first() + 8; ++k)
        for (int l = c1.k_first(); l < c1.k_first() + 8; ++l)
            CHECK((c1.kbar_geo(k, l) - c2.kbar_geo(k, l)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(c1.theta(3) - c2.theta(3)) < 1e-9);

    const int m = (base.k_last() - 3) / 2;
    CHECK(std::abs(base.pf_kbar_truncated(3, m) - base.pf_kbar(3)) < 1e-6);
    ProductOptions big;
    big.kmax = base.k_last() + 40;
    CHECK(std::abs(theta(p, 3, big) - base.theta(3)) < 1e-9);
}

TEST_CASE("CDF values are monotone and bounded") {
    const auto cdf = cdf_product_table(product(5, 1.2, 0.5), 0, 14);
    double prev = 0;
    for (double v : cdf) {
        CHECK(v >= prev - 1e-10);
        CHECK(v <= 1 + 1e-10);
        prev = v;
    }
}

TEST_CASE("Monte Carlo at N = 4, r = 0.9") {
    const auto p = product(4, 0.9, 0.5);
    const auto run = empirical_cdf(p, 500000, 71, 0, 12);
    const auto cdf = cdf_product_table(p, 0, 12);
    for (const auto& [d, v] : run.empirical_cdf) {
        CAPTURE(d);
        CHECK(std::abs(v - cdf[d]) <= run.ci_halfwidth.at(d) + 1e-12);
    }
}

TEST_CASE("two-parameter model at r = s, one size up, minus its corner") {
    const int n = 3;
    const double r = 0.8, sq = 0.5;
    const long samples = 200000;
    std::vector<std::int64_t> diff(samples);
    for (long k = 0; k < samples; ++k) {
        Rng rng(91, static_cast<std::uint64_t>(k));
        diff[k] = two_param_diff_sample(n, r, sq, rng);
    }
    const auto cdf = cdf_product_table(product(n, r, sq), 0, 10);
    for (int d = 0; d <= 10; ++d) {
        double emp = 0;
        for (auto v : diff) emp += v <= d;
        emp /= samples;
        CHECK(std::abs(emp - cdf[d]) < 1e-2);
    }
    CHECK(ks_two_sample(diff, draw_samples(product(n, r, sq), samples, 92)).p_value > 0.01);
}

TEST_CASE("domain checks") {
    CHECK_THROWS_AS(GeoContext(product(3, 0.4, 0.5), 0, 2), InvalidParameters);
    CHECK_THROWS_AS(GeoContext(product(3, 2.5, 0.5), 0, 2), InvalidParameters);
    CHECK_THROWS_AS(GeoContext(product(0, 0.9, 0.5), 0, 2), InvalidParameters);
    CHECK(theta(product(3, 0.9, 0.5), -1) == 0.0);
}
