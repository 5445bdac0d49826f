#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "lpp/asymptotics.hpp"
#include "lpp/errors.hpp"
#include "lpp/finite_dist.hpp"

using namespace lpp;

namespace {

ScaledParams scaled(double st, double rt, double dt) {
    ScaledParams p;
    p.s_tilde = st;
    p.r_tilde = rt;
    p.d_tilde = dt;
    return p;
}

}  // namespace

TEST_CASE("f~ and E~ elementary identities") {
    for (double u : {-2.0, 0.0, 1.5}) CHECK(f_tilde(0.0, u) == doctest::Approx(1.0));
    CHECK(f_tilde(0.7, 1.2) * f_tilde(-0.7, 1.2) == doctest::Approx(1.0));
    CHECK(f_tilde(0.5, 2.0) == doctest::Approx(std::exp(-0.125 / 3 + 1.0)));
    for (double x : {-1.0, 0.3, 2.0}) {
        CHECK(e_tilde(x, x, 0.4) == 0.0);
        for (double y : {-0.5, 1.1}) CHECK(e_tilde(x, y, 0.4) == doctest::Approx(-e_tilde(y, x, 0.4)));
    }
    CHECK(e_tilde(0.0, 1.0, -0.5) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("scale maps round trip") {
    const auto m = scale_maps(216, 0.5);
    CHECK(m.kappa == doctest::Approx(2.0 / (1.0 - 0.5) * 0.5));
    CHECK(m.sigma == doctest::Approx(std::cbrt(12.0 * 216 / 2)));
    CHECK(m.dt_of(m.d_of(1.3)) == doctest::Approx(1.3));
    CHECK(m.st_of(m.s_of(-0.8)) == doctest::Approx(-0.8));
    CHECK(m.rt_of(m.r_of(0.2)) == doctest::Approx(0.2));
}

TEST_CASE("two-parameter kernel is antisymmetric") {
    TildeContext t(scaled(-1.0, 0.2, 0.0));
    for (double x : {0.2, 1.0, 3.5})
        for (double y : {0.5, 2.0}) {
            CHECK(std::abs(t.A11(x, y) + t.A11(y, x)) < 1e-8);
            CHECK(std::abs(t.A22(x, y) + t.A22(y, x)) < 1e-8);
        }
    const auto k = t.smooth_kernel();
    CHECK((k.k11 + k.k11.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((k.k22 + k.k22.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(t.imag_residue() < 1e-8);
}

TEST_CASE("linear term") {
    // d~ - s~^2 - 2 r~/(s~^2 - r~^2) from expanding the finite-N constant.
    CHECK(TildeContext(scaled(-1.0, 0.0, 0.0)).linear() == doctest::Approx(-1.0));
    CHECK(TildeContext(scaled(-1.0, 0.2, 0.5)).linear() ==
          doctest::Approx(0.5 - 1.0 - 0.4 / 0.96));
}

TEST_CASE("L does not depend on where the rays cross") {
    const auto p = scaled(-1.0, 0.2, 0.5);
    TildeOptions shifted;
    shifted.z_shift = 0.3;
    shifted.w_shift = 0.3;
    CHECK(std::abs(TildeContext(p).L() - TildeContext(p, shifted).L()) < 1e-8);
}

TEST_CASE("window and node doubling settle L") {
    const auto p = scaled(-1.0, 0.2, 0.0);
    TildeOptions wide;
    wide.window = 28;
    wide.nodes = 96;
    CHECK(std::abs(L_of(p) - TildeContext(p, wide).L()) < 1e-7);
}

// Gaps between scaled finite-N entries and their limits, at d~ ~ 0 and X ~ 0.5, 1.5, 3.
std::vector<double> prelimit_gaps(int n) {
    const double st = -1.0, rt = 0.2, sq = 0.5;
    const auto m = scale_maps(n, sq);
    ModelParams p;
    p.N = n;
    p.s = m.s_of(st);
    p.r = m.r_of(rt);
    p.sqrt_q = sq;
    const int d = static_cast<int>(std::lround(m.d_of(0.0)));
    HatContext h(p, d, d);
    TildeContext t(scaled(st, rt, m.dt_of(d)));
    std::vector<double> gaps;
    for (double X : {0.5, 1.5, 3.0}) {
        const int k = static_cast<int>(std::lround(m.d_of(X)));
        const double x = m.dt_of(k);
        gaps.push_back(m.sigma * h.G(true, k) - t.G(-st, x));
        gaps.push_back(m.sigma * h.G(false, k) - t.G(st, x));
        gaps.push_back(h.R(true, k) - t.R(-st, x));
        gaps.push_back(h.R(false, k) - t.R(st, x));
        gaps.push_back(m.sigma * h.Q(k) - t.Q(x));
        gaps.push_back(h.P(k) - t.P(x));
    }
    gaps.push_back(h.scalar_terms(d).mu / m.sigma - t.mu());
    gaps.push_back(h.scalar_terms(d).nu / m.sigma - t.nu());
    gaps.push_back(h.pf0(d) - t.pf0());
    return gaps;
}

TEST_CASE("scaled finite-N entries approach the limit at rate 1/sigma") {
    // sigma doubles from N = 216 to N = 1728; 2 g(8N) - g(N) removes the 1/sigma term.
    const auto g1 = prelimit_gaps(216), g2 = prelimit_gaps(1728);
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CAPTURE(i);
        CHECK(std::abs(g2[i]) < 0.7 * std::abs(g1[i]) + 5e-3);
        CHECK(std::abs(2 * g2[i] - g1[i]) < 0.05);
    }
}

TEST_CASE("limiting two-parameter CDF is a distribution function") {
    double prev = 0;
    for (double dt : {-4.0, -2.0, 0.0, 2.0, 4.0}) {
        const double v = limiting_cdf_two_param(scaled(-1.0, 0.2, dt));
        CAPTURE(dt);
        CHECK(v >= prev - 1e-6);
        CHECK(v <= 1 + 1e-6);
        prev = v;
    }
    CHECK(limiting_cdf_two_param(scaled(-1.0, 0.2, 6.0)) >= 0.98);
}

TEST_CASE("two-parameter domain checks") {
    CHECK_THROWS_AS(validate_scaled_two_param(scaled(0.5, 0.0, 0.0)), InvalidParameters);
    CHECK_THROWS_AS(validate_scaled_two_param(scaled(-1.0, 1.5, 0.0)), InvalidParameters);
    CHECK_THROWS_AS(validate_scaled_two_param(scaled(-1.0, -1.0, 0.0)), DegenerateParams);
    CHECK_NOTHROW(validate_scaled_two_param(scaled(-1.0, -1.5, 0.0)));
}

TEST_CASE("product: h limit at r~ = 0") {
    XiContext x(0.0, 0.5);
    for (double X : {0.7, 2.0, 4.0}) CHECK(x.j(X) == doctest::Approx(2 * (X - 0.5)));
}

TEST_CASE("product kernel is antisymmetric") {
    XiContext x(0.3, 0.0);
    for (double a : {0.2, 1.3})
        for (double b : {0.6, 2.4}) {
            CHECK(std::abs(x.A11(a, b) + x.A11(b, a)) < 1e-8);
            CHECK(std::abs(x.A22(a, b) + x.A22(b, a)) < 1e-8);
        }
    CHECK(x.imag_residue() < 1e-8);
}

TEST_CASE("limiting product CDF is a distribution function") {
    double prev = 0;
    for (double dt : {-3.0, -1.0, 1.0, 3.0, 5.0}) {
        const double v = limiting_cdf_product(0.3, dt);
        CAPTURE(dt);
        CHECK(v >= prev - 0.05);
        CHECK(v >= -0.05);
        CHECK(v <= 1.05);
        prev = v;
    }
}
