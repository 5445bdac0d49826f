#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "exact_dp.hpp"
#include "lpp/errors.hpp"
#include "lpp/model.hpp"

using namespace lpp;
using lpp_test::exact_lpp_cdf;
using lpp_test::geom_sum_cdf;

namespace {

double geom_mean(double x, long n, std::uint64_t seed) {
    double acc = 0;
    for (long k = 0; k < n; ++k) {
        Rng rng(seed, k);
        acc += static_cast<double>(sample_geom(x, rng));
    }
    return acc / n;
}

ModelParams two_param(int n, double s, double r, double sq) {
    ModelParams p;
    p.N = n;
    p.s = s;
    p.r = r;
    p.sqrt_q = sq;
    p.variant = Variant::TwoParamStationary;
    return p;
}

// Max over all up-right paths from (1,1) to (n,n) staying in j <= i.
std::int64_t brute_force_lpp(const std::vector<std::vector<std::int64_t>>& w, int n) {
    std::function<std::int64_t(int, int)> best = [&](int i, int j) -> std::int64_t {
        if (i == n && j == n) return w[i][j];
        std::int64_t b = std::numeric_limits<std::int64_t>::min();
        if (i + 1 <= n) b = std::max(b, best(i + 1, j));
        if (j + 1 <= i) b = std::max(b, best(i, j + 1));
        return w[i][j] + b;
    };
    return best(1, 1);
}

void check_cdf_within_3sigma(const McRun& run, const std::vector<double>& exact) {
    for (const auto& [d, pr] : run.empirical_cdf) {
        const double hw = std::max(run.ci_halfwidth.at(d), 3.0 / run.n_samples);
        CHECK_MESSAGE(std::abs(pr - exact[d]) <= hw, "d=" << d << " mc=" << pr << " exact=" << exact[d]);
    }
}

}  // namespace

TEST_CASE("geometric sampler moments") {
    CHECK(geom_mean(0.5, 1000000, 1) == doctest::Approx(1.0).epsilon(0.01));
    long zeros = 0, le2 = 0;
    const long n = 200000;
    for (long k = 0; k < n; ++k) {
        Rng a(2, k), b(3, k);
        zeros += sample_geom(0.3, a) == 0;
        le2 += sample_geom(0.25, b) <= 2;
    }
    const double p0 = 0.7, p2 = 1.0 - std::pow(0.25, 3);
    CHECK(std::abs(zeros / double(n) - p0) < 3 * std::sqrt(p0 * (1 - p0) / n));
    CHECK(std::abs(le2 / double(n) - p2) < 3 * std::sqrt(p2 * (1 - p2) / n));
    Rng z(0, 0);
    CHECK(sample_geom(0.0, z) == 0);
    CHECK_THROWS_AS(sample_geom(1.0, z), InvalidParameters);
}

TEST_CASE("streams are reproducible and order independent") {
    const auto p = two_param(4, 0.8, 0.4, 0.5);
    const auto a = draw_samples(p, 2000, 99);
    const auto b = draw_samples(p, 2000, 99);
    CHECK(a == b);
    Rng r17(99, 17);
    CHECK(sample_variant(p, r17) == a[17]);
    CHECK(draw_samples(p, 2000, 100) != a);
}

TEST_CASE("stationary initial path") {
    auto p = two_param(3, 0.8, 0.4, 0.5);
    Rng rng(5, 0);
    const auto path = sample_stationary_initial(p, 0, rng);
    CHECK(path.values == std::vector<std::int64_t>{0});

    // rs = 1: the path is a Geom(sqrt q / r) walk.
    const long n = 40000;
    auto pc = two_param(3, 0.8, 1.25, 0.5);
    std::vector<std::int64_t> i3(n), walk(n);
    for (long k = 0; k < n; ++k) {
        Rng a(6, k), b(7, k);
        const auto pa = sample_stationary_initial(pc, 3, a);
        CHECK(pa.y_infinite);
        i3[k] = pa.values[3];
        walk[k] = sample_geom(0.5 / 1.25, b) + sample_geom(0.5 / 1.25, b) + sample_geom(0.5 / 1.25, b);
    }
    CHECK(ks_two_sample(i3, walk).p_value > 0.01);

    // r = s: the same Geom(sqrt q / r) walk law.
    auto pe = two_param(3, 0.8, 0.8, 0.5);
    std::vector<std::int64_t> e1(n), e4(n), w1(n), w4(n);
    for (long k = 0; k < n; ++k) {
        Rng a(8, k), b(9, k);
        const auto pa = sample_stationary_initial(pe, 4, a);
        e1[k] = pa.values[1];
        e4[k] = pa.values[4];
        std::int64_t acc = 0;
        for (int x = 1; x <= 4; ++x) {
            acc += sample_geom(0.5 / 0.8, b);
            if (x == 1) w1[k] = acc;
        }
        w4[k] = acc;
    }
    CHECK(ks_two_sample(e1, w1).p_value > 0.01);
    CHECK(ks_two_sample(e4, w4).p_value > 0.01);
}

TEST_CASE("recurrence agrees with path enumeration") {
    for (int n = 1; n <= 4; ++n) {
        for (int trial = 0; trial < 50; ++trial) {
            Rng rng(11, trial * 10 + n);
            std::vector<std::vector<std::int64_t>> w(n + 1, std::vector<std::int64_t>(n + 1, 0));
            for (int i = 1; i <= n; ++i)
                for (int j = 1; j <= i; ++j) w[i][j] = sample_geom(0.6, rng);
            CHECK(lpp_value(w, n) == brute_force_lpp(w, n));
        }
    }
    std::vector<std::vector<std::int64_t>> zero(4, std::vector<std::int64_t>(4, 0));
    CHECK(lpp_value(zero, 3) == 0);

    auto p = two_param(1, 0.8, 0.4, 0.5);
    Rng rng(1, 1);
    CHECK(lpp_solve({0}, 7, p, rng) == 7);
}

TEST_CASE("transfer recursion oracle agrees with enumeration") {
    // N = 2 by direct summation over the three weights.
    const double a = 0.3, b = 0.5, c = 0.2;
    auto cdf = exact_lpp_cdf(2, 6, [&](int i, int j) { return i == 1 ? a : (j == 1 ? b : c); });
    for (int d = 0; d <= 6; ++d) {
        // G(2,2) = w11 + w21 + w22 in the triangle with N = 2.
        CHECK(cdf[d] == doctest::Approx(geom_sum_cdf({a, b, c}, 6)[d]).epsilon(1e-13));
    }
    // N = 3 against Monte Carlo of the recurrence.
    auto x = [](int i, int j) { return 0.1 * i + 0.05 * j; };
    auto cdf3 = exact_lpp_cdf(3, 8, x);
    const long n = 200000;
    std::vector<long> counts(9, 0);
    for (long k = 0; k < n; ++k) {
        Rng rng(12, k);
        std::vector<std::vector<std::int64_t>> w(4, std::vector<std::int64_t>(4, 0));
        for (int i = 1; i <= 3; ++i)
            for (int j = 1; j <= i; ++j) w[i][j] = sample_geom(x(i, j), rng);
        const auto g = lpp_value(w, 3);
        if (g <= 8) ++counts[g];
    }
    long acc = 0;
    for (int d = 0; d <= 8; ++d) {
        acc += counts[d];
        const double pr = acc / double(n);
        CHECK(std::abs(pr - cdf3[d]) <= 3 * std::sqrt(cdf3[d] * (1 - cdf3[d]) / n) + 1e-9);
    }
}

TEST_CASE("two-parameter stationary samples") {
    // N = 2: G = w22 ~ Geom(rs).
    auto p2 = two_param(2, 0.8, 0.4, 0.5);
    auto run = empirical_cdf(p2, 100000, 21, 0, 8);
    std::vector<double> exact(9);
    for (int d = 0; d <= 8; ++d) exact[d] = 1 - std::pow(0.32, d + 1);
    check_cdf_within_3sigma(run, exact);

    auto p3 = two_param(3, 0.6, 0.8, 0.4);
    auto run3 = empirical_cdf(p3, 200000, 22, 0, 0);
    const double p0 = (1 - 0.48) * (1 - 0.32) * (1 - 0.24) * (1 - 0.4 / 0.6);
    CHECK(p0 == doctest::Approx(0.0896).epsilon(0.01));
    CHECK(std::abs(run3.empirical_cdf[0] - p0) <= run3.ci_halfwidth[0]);

    // Same params through the exact oracle.
    auto cdf = exact_lpp_cdf(3, 0, [](int i, int j) {
        if (j == 1) return i <= 2 ? 0.0 : 0.4 / 0.6;
        if (i == j) return i == 2 ? 0.48 : 0.32;
        return j == 2 ? 0.24 : 0.16;
    });
    CHECK(cdf[0] == doctest::Approx(p0).epsilon(1e-12));
}

TEST_CASE("theorem initial condition matches the stationary model one size up") {
    auto pt = two_param(3, 0.8, 0.4, 0.5);
    pt.variant = Variant::TheoremInitial;
    auto ps = two_param(4, 0.8, 0.4, 0.5);
    const auto a = draw_samples(pt, 100000, 31);
    const auto b = draw_samples(ps, 100000, 32);
    CHECK(ks_two_sample(a, b).p_value > 0.01);
}

TEST_CASE("product stationary and approximating models") {
    ModelParams p;
    p.N = 2;
    p.sqrt_q = 0.5;
    p.r = 0.7;
    p.variant = Variant::ProductStationary;
    auto run = empirical_cdf(p, 100000, 41, 0, 10);
    check_cdf_within_3sigma(run, geom_sum_cdf({0.5 / 0.7, 0.7 * 0.5}, 10));

    ModelParams g;
    g.N = 4;
    g.sqrt_q = 0.5;
    g.r = 0.4;
    g.s = 0.9;
    g.variant = Variant::ApproxProduct;
    ModelParams gs = g;
    std::swap(gs.r, gs.s);
    CHECK(ks_two_sample(draw_samples(g, 100000, 42), draw_samples(gs, 100000, 43)).p_value > 0.01);
}

TEST_CASE("inhomogeneous model") {
    ModelParams p;
    p.N = 2;
    p.sqrt_q = 0.5;
    p.r = 0.4;
    p.s = 0.8;
    p.t = 0.0;
    p.variant = Variant::Inhomogeneous;
    // t = 0 empties the first row, leaving w22 ~ Geom(rs).
    auto run = empirical_cdf(p, 50000, 51, 0, 6);
    std::vector<double> exact(7);
    for (int d = 0; d <= 6; ++d) exact[d] = 1 - std::pow(0.32, d + 1);
    check_cdf_within_3sigma(run, exact);

    p.N = 3;
    p.t = 0.9;
    auto run3 = empirical_cdf(p, 100000, 52, 0, 12);
    const double t = 0.9;
    auto cdf = exact_lpp_cdf(3, 12, [&](int i, int j) {
        if (i == 1) return 0.4 * t;
        if (i == 2 && j == 1) return 0.8 * t;
        if (i == 2) return 0.32;
        if (i == j) return 0.2;
        return j == 1 ? 0.5 * t : 0.4;
    });
    check_cdf_within_3sigma(run3, cdf);
    p.t.reset();
    CHECK_THROWS_AS(validate_sampler_params(p), InvalidParameters);
}

TEST_CASE("Monte Carlo tables") {
    auto p = two_param(3, 0.8, 0.4, 0.5);
    const auto a = empirical_cdf(p, 4000, 1, 0, 10);
    const auto b = empirical_cdf(p, 16000, 1, 0, 10);
    double prev = 0;
    for (const auto& [d, v] : a.empirical_cdf) {
        CHECK(v >= prev);
        prev = v;
        if (v > 0 && v < 1) CHECK(b.ci_halfwidth.at(d) < 0.75 * a.ci_halfwidth.at(d));
    }
    CHECK_THROWS_AS(empirical_cdf(p, 10, 1, 0, 3), InvalidParameters);
}

TEST_CASE("increment stationarity") {
    auto p = two_param(2, 0.8, 0.4, 0.5);
    const auto rep = stationarity_check(p, {2, 5, 10}, 3, 50000, 61);
    CHECK(rep.pairs.size() == 3);
    CHECK(rep.min_p_value > 0.01);
}

TEST_CASE("phase diagram") {
    CHECK(classify_phase(0.4, 0.8) == Phase::HighDensity);
    CHECK(classify_phase(2.0, 0.9) == Phase::LowDensity);
    CHECK(classify_phase(0.5, 1.5) == Phase::MaximalCurrent);
    CHECK(classify_phase(1.6, 1.0 / 1.6) == Phase::Coexistence);
    CHECK(phase_name(classify_phase(1.6, 1.0 / 1.6)) == "rs=1 coexistence line");
    CHECK(classify_phase(0.7, 0.7) == Phase::BoundaryRS);
    CHECK(classify_phase(0.7, 1.0) == Phase::BoundaryS1);
    CHECK(rho_to_s(0.5 / 0.5, 0.5) == doctest::Approx(1.0));
    CHECK(rho_to_s(0.3 / 0.7, 0.3) == doctest::Approx(1.0));
}
