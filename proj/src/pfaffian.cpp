#include "lpp/pfaffian.hpp"

#include <cmath>

#include "lpp/errors.hpp"
#include "lpp/quadrature.hpp"

namespace lpp {

namespace {

template <class Mat>
typename Mat::Scalar pfaffian_ltl(Mat a) {
    using S = typename Mat::Scalar;
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw InvalidParameters("pfaffian: matrix must be square");
    if (n % 2 == 1) return S(0);
    S pf(1);
    for (Eigen::Index k = 0; k + 1 < n; k += 2) {
        Eigen::Index kp;
        a.col(k).tail(n - k - 1).cwiseAbs().maxCoeff(&kp);
        kp += k + 1;
        if (kp != k + 1) {
            a.row(k + 1).swap(a.row(kp));
            a.col(k + 1).swap(a.col(kp));
            pf = -pf;
        }
        if (a(k + 1, k) == S(0)) return S(0);
        pf *= a(k, k + 1);
        if (k + 2 < n) {
            const Eigen::Index m = n - k - 2;
            Eigen::Matrix<S, Eigen::Dynamic, 1> tau = a.row(k).tail(m).transpose() / a(k, k + 1);
            Eigen::Matrix<S, Eigen::Dynamic, 1> col = a.col(k + 1).tail(m);
            a.bottomRightCorner(m, m) += tau * col.transpose() - col * tau.transpose();
        }
    }
    return pf;
}

}  // namespace

double pfaffian(Eigen::MatrixXd a) { return pfaffian_ltl(std::move(a)); }
std::complex<double> pfaffian(Eigen::MatrixXcd a) { return pfaffian_ltl(std::move(a)); }

namespace {

template <class Mat, class Blocks>
Mat assemble_impl(const Blocks& k, const Eigen::VectorXd& w, const Eigen::VectorXd* balance) {
    const Eigen::Index n = w.size();
    Eigen::VectorXd sw = w.cwiseSqrt();
    Mat m(2 * n, 2 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = sw(i) * sw(j);
            double li = balance ? (*balance)(i) : 1.0;
            double lj = balance ? (*balance)(j) : 1.0;
            m(2 * i, 2 * j) = -s * k.k11(i, j) * li * lj;
            m(2 * i, 2 * j + 1) = -s * k.k12(i, j) * li / lj;
            m(2 * i + 1, 2 * j) = s * k.k12(j, i) * lj / li;
            m(2 * i + 1, 2 * j + 1) = -s * k.k22(i, j) / (li * lj);
        }
        m(2 * j, 2 * j + 1) += 1.0;
        m(2 * j + 1, 2 * j) -= 1.0;
    }
    return m;
}

}  // namespace

Eigen::MatrixXd assemble_j_minus_k(const KernelBlocks& k, const Eigen::VectorXd& w,
                                   const Eigen::VectorXd* balance) {
    return assemble_impl<Eigen::MatrixXd>(k, w, balance);
}

double pf_j_minus_k(const KernelBlocks& k, const Eigen::VectorXd& w,
                    const Eigen::VectorXd* balance) {
    return pfaffian(assemble_j_minus_k(k, w, balance));
}

std::complex<double> pf_j_minus_k(const KernelBlocksC& k, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd* balance) {
    return pfaffian(assemble_impl<Eigen::MatrixXcd>(k, w, balance));
}

KernelBlocks add_rank2(KernelBlocks k, const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                       const Eigen::VectorXd& v1, const Eigen::VectorXd& v2) {
    k.k11 += u1 * v1.transpose() - v1 * u1.transpose();
    k.k12 += u1 * v2.transpose() - v1 * u2.transpose();
    k.k22 += u2 * v2.transpose() - v2 * u2.transpose();
    return k;
}

SkewKernel2 perturb_rank2(const SkewKernel2& k, const PairFn& u, const PairFn& v, double beta) {
    // a = (u2, -u1); K + beta (|a><v| - |v><a|)
    SkewKernel2 out = k;
    auto a1 = u.second;
    auto a2 = [f = u.first](double x) { return -f(x); };
    auto v1 = v.first, v2 = v.second;
    out.k11 = [=](double x, double y) { return k.k11(x, y) + beta * (a1(x) * v1(y) - v1(x) * a1(y)); };
    out.k12 = [=](double x, double y) { return k.k12(x, y) + beta * (a1(x) * v2(y) - v1(x) * a2(y)); };
    out.k22 = [=](double x, double y) { return k.k22(x, y) + beta * (a2(x) * v2(y) - v2(x) * a2(y)); };
    return out;
}

namespace {

KernelBlocks sample(const SkewKernel2& k, const Eigen::VectorXd& pts) {
    const Eigen::Index n = pts.size();
    KernelBlocks b{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            b.k11(i, j) = k.k11(pts(i), pts(j));
            b.k12(i, j) = k.k12(pts(i), pts(j));
            b.k22(i, j) = k.k22(pts(i), pts(j));
        }
    return b;
}

double discrete_pf(const SkewKernel2& k, int d, int m) {
    Eigen::VectorXd pts(m);
    for (int i = 0; i < m; ++i) pts(i) = d + 1 + i;
    return pf_j_minus_k(sample(k, pts), Eigen::VectorXd::Ones(m));
}

}  // namespace

double fredholm_pf_discrete(const SkewKernel2& k, int d, double tol, int m0, int m_max,
                            PfInfo* info) {
    double prev = discrete_pf(k, d, m0);
    for (int m = 2 * m0; m <= m_max; m *= 2) {
        double cur = discrete_pf(k, d, m);
        if (std::abs(cur - prev) <= tol) {
            if (info) *info = {m, std::abs(cur - prev)};
            return cur;
        }
        prev = cur;
    }
    throw TruncationNotConverged("fredholm_pf_discrete: truncation did not converge", prev);
}

Grid make_grid(double a, double b, int n) {
    Grid g;
    g.a = a;
    g.b = b;
    std::vector<double> x, w;
    gauss_legendre(n, a, b, x, w);
    g.x = Eigen::Map<Eigen::VectorXd>(x.data(), n);
    g.w = Eigen::Map<Eigen::VectorXd>(w.data(), n);
    return g;
}

double fredholm_pf_continuum(const SkewKernel2& k, double d, double length, double tol, int n0,
                             int n_max, PfInfo* info) {
    auto eval = [&](int n) {
        Grid g = make_grid(d, d + length, n);
        return pf_j_minus_k(sample(k, g.x), g.w);
    };
    double prev = eval(n0);
    for (int n = 2 * n0; n <= n_max; n *= 2) {
        double cur = eval(n);
        if (std::abs(cur - prev) <= tol) {
            if (info) *info = {n, std::abs(cur - prev)};
            return cur;
        }
        prev = cur;
    }
    throw QuadratureNotConverged("fredholm_pf_continuum: Nystrom did not converge", prev);
}

Eigen::MatrixXd jump_operator(const Grid& g, double rho, int sub_order) {
    const int n = int(g.x.size());
    const int m = sub_order > 0 ? sub_order : n;
    const double half = 0.5 * (g.b - g.a), mid = 0.5 * (g.a + g.b);
    // Barycentric weights of the Legendre nodes.
    Eigen::VectorXd t = (g.x.array() - mid) / half;
    Eigen::VectorXd lam(n);
    for (int j = 0; j < n; ++j)
        lam(j) = ((j % 2) ? -1.0 : 1.0) * std::sqrt((1.0 - t(j) * t(j)) * g.w(j) / half);
    auto basis_row = [&](double u, Eigen::Ref<Eigen::RowVectorXd> row) {
        double tu = (u - mid) / half;
        for (int j = 0; j < n; ++j)
            if (std::abs(tu - t(j)) < 1e-15) {
                row.setZero();
                row(j) = 1.0;
                return;
            }
        double den = 0.0;
        for (int j = 0; j < n; ++j) {
            row(j) = lam(j) / (tu - t(j));
            den += row(j);
        }
        row /= den;
    };
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> qx, qw;
    Eigen::RowVectorXd row(n);
    for (int i = 0; i < n; ++i) {
        const double xi = g.x(i);
        gauss_legendre(m, g.a, xi, qx, qw);
        for (int q = 0; q < m; ++q) {
            basis_row(qx[q], row);
            p.row(i) -= qw[q] * std::exp(rho * (xi - qx[q])) * row;
        }
        gauss_legendre(m, xi, g.b, qx, qw);
        for (int q = 0; q < m; ++q) {
            basis_row(qx[q], row);
            p.row(i) += qw[q] * std::exp(rho * (qx[q] - xi)) * row;
        }
    }
    return p;
}

SplitPfaffian::SplitPfaffian(const Grid& g, const KernelBlocks& ks, std::optional<double> rho)
    : g_(g) {
    const Eigen::Index n = g.x.size();
    ejump_ = rho ? jump_operator(g, *rho) : Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd k21 = -ks.k12.transpose();
    Eigen::MatrixXd m(2 * n, 2 * n);
    m.topLeftCorner(n, n) = -ejump_ * ks.k11 - k21;
    m.topRightCorner(n, n) = -ejump_ * ks.k12 - ks.k22;
    m.bottomLeftCorner(n, n) = ks.k11;
    m.bottomRightCorner(n, n) = ks.k12;
    Eigen::VectorXd w2(2 * n);
    w2 << g.w, g.w;
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n) - m * w2.asDiagonal();
    lu_.compute(s);
    double det = lu_.determinant();

    KernelBlocks full = ks;
    if (rho) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (i != j) {
                    double dx = g.x(i) - g.x(j);
                    full.k22(i, j) += (dx > 0 ? -1.0 : 1.0) * std::exp(*rho * std::abs(dx));
                }
    }
    direct_pf_ = pf_j_minus_k(full, g.w);
    double mag = std::sqrt(std::max(det, 0.0));
    pf_ = direct_pf_ < 0 ? -mag : mag;
}

Eigen::VectorXd SplitPfaffian::apply_jump(const Eigen::VectorXd& f) const { return ejump_ * f; }

double SplitPfaffian::bilinear(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2,
                               const Eigen::VectorXd& u1, const Eigen::VectorXd& u2) const {
    const Eigen::Index n = g_.x.size();
    Eigen::VectorXd b(2 * n);
    b.head(n) = -ejump_ * u1 - u2;
    b.tail(n) = u1;
    Eigen::VectorXd y = lu_.solve(b);
    return (g_.w.array() * (v1.array() * y.head(n).array() + v2.array() * y.tail(n).array())).sum();
}

double SplitPfaffian::perturbed_pf(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                                   const Eigen::VectorXd& v1, const Eigen::VectorXd& v2) const {
    return pf_ * (1.0 - bilinear(v1, v2, u1, u2));
}

}  // namespace lpp
