#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lpp/pfaffian.hpp"

using namespace lpp;

namespace {

Eigen::MatrixXd random_skew(int n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            a(i, j) = nd(gen);
            a(j, i) = -a(i, j);
        }
    return a;
}

}  // namespace

TEST_CASE("pfaffian of small matrices") {
    Eigen::MatrixXd a(4, 4);
    a << 0, 1, 2, 3, -1, 0, 4, 5, -2, -4, 0, 6, -3, -5, -6, 0;
    CHECK(pfaffian(a) == doctest::Approx(1 * 6 - 2 * 5 + 3 * 4));
    CHECK(pfaffian(Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 3))) == 0.0);
}

TEST_CASE("pfaffian squares to the determinant") {
    for (int n : {2, 6, 12, 40}) {
        Eigen::MatrixXd a = random_skew(n, 7u + n);
        double pf = pfaffian(a);
        double det = a.determinant();
        CHECK(std::abs(pf * pf - det) <= 1e-10 * std::max(1.0, std::abs(det)));
    }
    Eigen::MatrixXcd c = random_skew(8, 3).cast<std::complex<double>>() +
                         std::complex<double>(0, 1) * random_skew(8, 4);
    auto pf = pfaffian(c);
    CHECK(std::abs(pf * pf - c.determinant()) < 1e-9 * std::abs(c.determinant()));
}

TEST_CASE("rank-two update identity") {
    const int n = 10;
    Eigen::MatrixXd a = random_skew(n, 11);
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    Eigen::VectorXd u(n), v(n);
    for (int i = 0; i < n; ++i) {
        u(i) = nd(gen);
        v(i) = nd(gen);
    }
    double lhs = pfaffian(Eigen::MatrixXd(a - (u * v.transpose() - v * u.transpose())));
    double rhs = pfaffian(a) * (1.0 - v.dot(a.fullPivLu().solve(u)));
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::max(1.0, std::abs(rhs)));
}

TEST_CASE("balancing leaves the pfaffian unchanged") {
    const int n = 6;
    KernelBlocks k{random_skew(n, 1), Eigen::MatrixXd::Random(n, n), random_skew(n, 2)};
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 0.3);
    Eigen::VectorXd lam(n);
    for (int i = 0; i < n; ++i) lam(i) = std::pow(1.7, i);
    CHECK(pf_j_minus_k(k, w, &lam) == doctest::Approx(pf_j_minus_k(k, w)).epsilon(1e-12));
}

TEST_CASE("discrete fredholm pfaffian with vanishing K11 is a determinant") {
    // Pf(J - K) = det(I - K12) when K11 = 0; K12 rank one.
    SkewKernel2 k;
    k.k11 = [](double, double) { return 0.0; };
    k.k12 = [](double x, double y) { return std::pow(0.5, x + y); };
    k.k22 = [](double x, double y) { return std::sin(x - y); };
    int d = 1;
    double expect = 1.0 - std::pow(0.25, d + 1) / 0.75;
    CHECK(std::abs(fredholm_pf_discrete(k, d, 1e-14) - expect) < 1e-12);
}

TEST_CASE("continuum fredholm pfaffian") {
    SkewKernel2 k;
    k.continuum = true;
    k.k11 = [](double, double) { return 0.0; };
    k.k12 = [](double x, double y) { return std::exp(-x - y); };
    k.k22 = [](double x, double y) { return (x - y) * std::exp(-x * x - y * y); };
    double d = 0.2;
    double expect = 1.0 - std::exp(-2 * d) / 2.0;
    CHECK(std::abs(fredholm_pf_continuum(k, d, 40.0, 1e-13) - expect) < 1e-11);
}

TEST_CASE("perturb_rank2 matches the explicit update") {
    SkewKernel2 k;
    k.k11 = [](double x, double y) { return (x - y) * std::exp(-x - y); };
    k.k12 = [](double x, double y) { return 0.3 * std::exp(-x - 2 * y); };
    k.k22 = [](double x, double y) { return 0.1 * (x - y) * std::exp(-0.5 * (x + y)); };
    PairFn u{[](double x) { return std::exp(-x); }, [](double x) { return 0.2 * std::exp(-2 * x); }};
    PairFn v{[](double x) { return std::exp(-0.5 * x); }, [](double x) { return -0.1 * std::exp(-x); }};
    SkewKernel2 p = perturb_rank2(k, u, v, 0.7);
    // Antisymmetry of the 11 and 22 blocks survives.
    CHECK(p.k11(1.0, 2.0) == doctest::Approx(-p.k11(2.0, 1.0)));
    CHECK(p.k22(1.5, 0.5) == doctest::Approx(-p.k22(0.5, 1.5)));
    // Entry check against a = (u2, -u1).
    double x = 1.0, y = 2.0;
    double a1x = u.second(x), a1y = u.second(y), a2y = -u.first(y);
    CHECK(p.k12(x, y) ==
          doctest::Approx(k.k12(x, y) + 0.7 * (a1x * v.second(y) - v.first(x) * a2y)));
    CHECK(p.k11(x, y) ==
          doctest::Approx(k.k11(x, y) + 0.7 * (a1x * v.first(y) - v.first(x) * a1y)));
}

TEST_CASE("split pfaffian handles the sign-jump kernel") {
    double rho = 0.3, d = -0.5, len = 20.0;
    auto build = [&](const Grid& g) {
        const int n = int(g.x.size());
        KernelBlocks k{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double x = g.x(i), y = g.x(j);
                k.k11(i, j) = 0.4 * (x - y) * std::exp(-x * x - y * y);
                k.k12(i, j) = 0.5 * std::exp(-x * x - 0.5 * y);
                k.k22(i, j) = 0.2 * (x - y) * std::exp(-0.3 * (x * x + y * y));
            }
        return k;
    };
    Grid g64 = make_grid(d, d + len, 64), g128 = make_grid(d, d + len, 128);
    SplitPfaffian s64(g64, build(g64), rho), s128(g128, build(g128), rho);
    CHECK(std::abs(s64.pf() - s128.pf()) < 1e-10);
    // Direct Nystrom converges slowly through the jump but approaches the same value.
    Grid g600 = make_grid(d, d + len, 600);
    SplitPfaffian s600(g600, build(g600), rho);
    CHECK(std::abs(s600.direct_pf() - s128.pf()) < 2e-4);

    // Jump operator applied to e^{-u}: closed form.
    Eigen::VectorXd f = (-g128.x.array()).exp();
    Eigen::VectorXd ef = s128.apply_jump(f);
    double x = g128.x(40), a = g128.a, b = g128.b;
    double lower = -std::exp(rho * x) * (std::exp(-(1 + rho) * a) - std::exp(-(1 + rho) * x)) / (1 + rho);
    double upper = std::exp(-rho * x) * (std::exp((rho - 1) * b) - std::exp((rho - 1) * x)) / (rho - 1);
    CHECK(std::abs(ef(40) - (lower + upper)) < 1e-10);
}

TEST_CASE("split pfaffian bilinear form matches the perturbed matrix pfaffian") {
    Grid g = make_grid(0.0, 12.0, 48);
    const int n = 48;
    KernelBlocks k{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
    Eigen::VectorXd u1(n), u2(n), v1(n), v2(n);
    for (int i = 0; i < n; ++i) {
        double x = g.x(i);
        u1(i) = std::exp(-x);
        u2(i) = 0.3 * std::exp(-0.5 * x);
        v1(i) = std::exp(-0.7 * x);
        v2(i) = -0.2 * std::exp(-x);
        for (int j = 0; j < n; ++j) {
            double y = g.x(j);
            k.k11(i, j) = 0.4 * (x - y) * std::exp(-x - y);
            k.k12(i, j) = 0.3 * std::exp(-x - 0.8 * y);
            k.k22(i, j) = 0.2 * (x - y) * std::exp(-0.6 * (x + y));
        }
    }
    SplitPfaffian s(g, k, std::nullopt);
    CHECK(s.pf() == doctest::Approx(pf_j_minus_k(k, g.w)).epsilon(1e-12));
    double direct = pf_j_minus_k(add_rank2(k, u1, u2, v1, v2), g.w);
    CHECK(s.perturbed_pf(u1, u2, v1, v2) == doctest::Approx(direct).epsilon(1e-11));
}
