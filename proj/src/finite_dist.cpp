#include "lpp/finite_dist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "lpp/errors.hpp"

namespace lpp {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

cplx h_log(cplx z, double sq, int h_exp) {
    // Integer power, so the branch of the logarithm does not matter.
    return static_cast<double>(h_exp) * std::log((1.0 - sq / z) / (1.0 - sq * z));
}

double max_abs_imag(const MatrixXcd& m) { return m.imag().cwiseAbs().maxCoeff(); }
double max_abs_imag(const VectorXcd& v) { return v.imag().cwiseAbs().maxCoeff(); }

}  // namespace

Structure structure_functions(cplx z, double sqrt_q, int h_exp, double s, double t) {
    if (z == cplx(0.0) || std::abs(1.0 - sqrt_q * z) == 0.0 || std::abs(1.0 - s * z) == 0.0 ||
        std::abs(1.0 - t * z) == 0.0)
        throw InvalidParameters("structure_functions: pole hit");
    Structure out;
    out.H = std::pow((1.0 - sqrt_q / z) / (1.0 - sqrt_q * z), h_exp);
    out.S = (1.0 - s / z) / (1.0 - s * z);
    out.T = (1.0 - t / z) / (1.0 - t * z);
    out.F = out.H * out.S * out.T;
    return out;
}

double h_real(double x, double sqrt_q, int h_exp) {
    return std::pow((1.0 - sqrt_q / x) / (1.0 - sqrt_q * x), h_exp);
}

double E_kernel(int k, int l, double r) {
    if (k == l) return 0.0;
    if (k > l) return -std::pow(r, k - l - 1);
    return std::pow(r, l - k - 1);
}

double c0(double sqrt_q) {
    return 2.0 * sqrt_q * (1.0 + sqrt_q) / std::pow(1.0 - sqrt_q, 3);
}

double fluctuation_scale(int n, double sqrt_q) { return std::cbrt(c0(sqrt_q) * n / 2.0); }

void validate_two_param_formula(const ModelParams& p) {
    const double sq = p.sqrt_q, r = p.r, s = p.s;
    if (!(sq > 0.0 && sq < 1.0)) throw InvalidParameters("sqrt_q must lie in (0, 1)");
    if (p.N < 2) throw InvalidParameters("the two-parameter formula needs N >= 2");
    if (s == 1.0) throw InvalidParameters("s = 1 is outside the formula's range");
    if (!(s > sq && s < 1.0)) throw InvalidParameters("s must lie in (sqrt_q, 1)");
    if (!(r > 0.0 && r < 1.0 / s)) throw InvalidParameters("r must lie in (0, 1/s)");
    if (std::abs(r - s) < 1e-6 || std::abs(r - 1.0 / s) < 1e-6)
        throw DegenerateParams("r too close to s or 1/s");
}

// ---------------------------------------------------------------------------
// HatContext

HatContext::HatContext(const ModelParams& p, int d_lo, int d_hi, const HatOptions& opt)
    : p_(p), d_lo_(d_lo), d_hi_(d_hi), tol_(opt.tol) {
    validate_two_param_formula(p);
    if (d_lo < 0 || d_hi < d_lo) throw InvalidParameters("HatContext: bad d range");
    const double sq = p.sqrt_q, r = p.r, s = p.s;
    const int n_big = p.N;
    const int hexp = n_big - 2;

    const double scale = fluctuation_scale(n_big, sq);
    const double gap = 1.0 / scale;

    int m;
    if (opt.kmax > 0) {
        m = opt.kmax;
    } else {
        const double rho = std::min(0.97, std::max({r * s, sq / s, sq * std::max(1.0, r), s * sq}));
        const double rate = std::ceil(std::log(opt.tol * (1.0 - rho)) / std::log(rho));
        const double kappa = 2.0 * sq / (1.0 - sq);
        const double ext = std::max(0.0, std::ceil(kappa * n_big + 6.0 * scale) - (d_lo + 1));
        m = static_cast<int>(std::max(48.0, rate) + ext);
    }
    k0_ = d_lo + 1;
    k1_ = d_hi + m;
    const int nk = k1_ - k0_ + 1;

    std::vector<cplx> ex_z = {0.0, 1.0, -1.0, s, 1.0 / s, 1.0 / r};
    if (r > 1.0) ex_z.emplace_back(r);  // keeps |z|^{-k} r^k bounded after balancing
    std::vector<cplx> ex_w = {0.0, 1.0, -1.0, s, 1.0 / s, r, 1.0 / r};
    cz_ = enclosing_contour(1.0 / sq, {}, ex_z, gap);
    cw_ = enclosing_contour(sq, {}, ex_w, gap);

    auto build = [&](int n) {
        const NodeSet zs = contour_nodes(cz_, n), ws = contour_nodes(cw_, n);
        zn_ = zs.z;
        zw_ = zs.w;
        wn_ = ws.z;
        ww_ = ws.w;
        const int nz = static_cast<int>(zn_.size()), nw = static_cast<int>(wn_.size());
        zk_.resize(nk, nz);
        wk_.resize(nk, nw);
        for (int a = 0; a < nz; ++a) {
            const cplx base = std::log(zw_[a]) + h_log(zn_[a], sq, hexp);
            const cplx lz = std::log(zn_[a]);
            for (int i = 0; i < nk; ++i) zk_(i, a) = std::exp(base - double(k0_ + i + 2) * lz);
        }
        for (int b = 0; b < nw; ++b) {
            const cplx base = std::log(ww_[b]) - h_log(wn_[b], sq, hexp);
            const cplx lw = std::log(wn_[b]);
            for (int i = 0; i < nk; ++i) wk_(i, b) = std::exp(base + double(k0_ + i + 1) * lw);
        }
    };
    auto probe = [&]() {
        VectorXcd zf(zn_.size()), wf(wn_.size());
        for (std::size_t a = 0; a < zn_.size(); ++a) {
            const cplx z = zn_[a];
            zf(a) = (z - s) * (z - r) / ((1.0 - s * z) * (z * z - 1.0));
        }
        for (std::size_t b = 0; b < wn_.size(); ++b) {
            const cplx w = wn_[b];
            wf(b) = (1.0 - s * w) / ((w - s) * (w - r)) + 1.0 / (1.0 - w * r);
        }
        VectorXcd out(2 * nk);
        out << zk_ * zf, wk_ * wf;
        return out;
    };

    int n = opt.nodes > 0 ? opt.nodes : 64;
    build(n);
    if (opt.nodes <= 0) {
        VectorXcd prev = probe();
        for (;;) {
            if (2 * n > 8192)
                throw QuadratureNotConverged("HatContext: circle quadrature did not converge", 0);
            build(2 * n);
            VectorXcd cur = probe();
            const double err = (cur - prev).cwiseAbs().maxCoeff();
            const double mag = std::max(1.0, cur.cwiseAbs().maxCoeff());
            n *= 2;
            if (err <= opt.tol * mag) break;
            prev = cur;
        }
    }

    const int nz = static_cast<int>(zn_.size()), nw = static_cast<int>(wn_.size());
    VectorXcd zg_s(nz), zg_1s(nz), zq(nz);
    for (int a = 0; a < nz; ++a) {
        const cplx z = zn_[a];
        zg_s(a) = (z - s) * (z - r) / ((1.0 - s * z) * (z * z - 1.0));
        zg_1s(a) = (z - 1.0 / s) * (z - r) / ((1.0 - z / s) * (z * z - 1.0));
        zq(a) = -(1.0 - r * z) / (1.0 - z * z);
    }
    VectorXcd wr_s(nw), wr_1s(nw), wp(nw);
    for (int b = 0; b < nw; ++b) {
        const cplx w = wn_[b];
        wr_s(b) = -(1.0 - s * w) / ((w - s) * (w - r));
        wr_1s(b) = -(1.0 - w / s) / ((w - 1.0 / s) * (w - r));
        wp(b) = 1.0 / (1.0 - w * r);
    }
    const VectorXcd cgs = zk_ * zg_s, cg1s = zk_ * zg_1s, cq = zk_ * zq;
    const VectorXcd crs = wk_ * wr_s, cr1s = wk_ * wr_1s, cp = wk_ * wp;
    for (const auto* v : {&cgs, &cg1s, &cq, &crs, &cr1s, &cp}) imag_ = std::max(imag_, max_abs_imag(*v));
    gs_ = cgs.real();
    g1s_ = cg1s.real();
    q_hat_ = cq.real();
    rs_ = crs.real();
    r1s_ = cr1s.real();
    p_hat_ = cp.real();

    MatrixXcd c11(nz, nw), c12(nz, nw), cb(nz, nw);
    for (int a = 0; a < nz; ++a) {
        const cplx z = zn_[a];
        for (int b = 0; b < nw; ++b) {
            const cplx w = wn_[b];
            const cplx zw1 = z * w - 1.0, zmw = z - w;
            c11(a, b) = zw1 * (z - r) * (1.0 - w * r) / ((z * z - 1.0) * (1.0 - w * w) * zmw);
            c12(a, b) = zw1 * (z - r) / ((z * z - 1.0) * (w - r) * zmw);
            cb(a, b) = zw1 / (zmw * (1.0 - z * r) * (w - r));
        }
    }
    const MatrixXcd wkt = wk_.transpose();
    const MatrixXcd m11 = -(zk_ * c11) * wkt;
    const MatrixXcd m12 = -(zk_ * c12) * wkt;
    const MatrixXcd mb = -(zk_ * cb) * wkt;
    imag_ = std::max({imag_, max_abs_imag(m11), max_abs_imag(m12), max_abs_imag(mb)});

    VectorXd fr(nk), fs(nk);
    for (int i = 0; i < nk; ++i) {
        fr(i) = f_pow(r, k0_ + i);
        fs(i) = f_pow(s, k0_ + i);
    }
    a11_ = m11.real();
    a12_ = m12.real() + q_hat_ * fr.transpose();
    b_ = mb.real();
    a22_ = fr * p_hat_.transpose() - p_hat_ * fr.transpose() + b_;
    g1_ = gs_ - (1.0 - s * r) * fs;
    d2_ = (1.0 - s * s) / (s - r) * fs - (1.0 - s * r) / (s - r) * fr - rs_;
}

double HatContext::f_pow(double x, int k) const { return std::pow(x, k + 1) / H(x); }

VectorXd HatContext::slice(const VectorXd& v, int d) const {
    if (d < d_lo_ || d > d_hi_) throw InvalidParameters("HatContext: d outside the prepared range");
    return v.segment(d + 1 - k0_, k1_ - d);
}

MatrixXd HatContext::slice(const MatrixXd& mat, int d) const {
    if (d < d_lo_ || d > d_hi_) throw InvalidParameters("HatContext: d outside the prepared range");
    const int o = d + 1 - k0_, m = k1_ - d;
    return mat.block(o, o, m, m);
}

VectorXd HatContext::fvec(double x, int d) const {
    const int m = k1_ - d;
    VectorXd v(m);
    for (int i = 0; i < m; ++i) v(i) = f_pow(x, d + 1 + i);
    return v;
}

MatrixXd HatContext::e_matrix(int d) const {
    const int m = k1_ - d;
    MatrixXd e(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) e(i, j) = E_kernel(i, j, p_.r);
    return e;
}

VectorXd HatContext::balance(int d, int m) const {
    (void)d;
    VectorXd lam(m);
    const double base = std::max(1.0, p_.r);
    for (int i = 0; i < m; ++i) lam(i) = std::pow(base, i);
    return lam;
}

VectorXd HatContext::J(int d) const {
    const double s = p_.s, r = p_.r;
    const int nz = static_cast<int>(zn_.size()), nw = static_cast<int>(wn_.size());
    // w^{d+2}/H(w) with weights is the k = d + 1 row of wk_.
    const VectorXcd wd = wk_.row(d + 1 - k0_).transpose();
    VectorXcd inner(nz);
    for (int a = 0; a < nz; ++a) {
        const cplx z = zn_[a];
        cplx acc = 0.0;
        for (int b = 0; b < nw; ++b) {
            const cplx w = wn_[b];
            acc += wd(b) * (z * w - 1.0) * (z - r) /
                   ((z * z - 1.0) * (w - s) * (w - r) * (z - w));
        }
        inner(a) = acc;
    }
    const VectorXcd full = -(zk_ * inner);
    return slice(VectorXd(full.real()), d);
}

KernelBlocks HatContext::khat(int d) const {
    KernelBlocks k;
    k.k11 = slice(a11_, d);
    k.k12 = slice(a12_, d);
    k.k22 = slice(a22_, d) + e_matrix(d);
    return k;
}

ScalarTerms HatContext::scalar_terms(int d) const {
    const double s = p_.s, r = p_.r, sq = p_.sqrt_q;
    const int n_big = p_.N;
    const VectorXcd wd = wk_.row(d + 1 - k0_).transpose();
    cplx mu_int = 0.0, nu_int = 0.0, c_int = 0.0;
    for (std::size_t b = 0; b < wn_.size(); ++b) {
        const cplx w = wn_[b];
        mu_int += wd(b) * (1.0 - w * s) * (1.0 - w * r) / ((w - s) * (w - s) * (1.0 - w * w));
        nu_int += wd(b) * (1.0 - s * w) / ((w - r) * (w - s) * (w - s));
    }
    for (std::size_t a = 0; a < zn_.size(); ++a) {
        const cplx z = zn_[a];
        const cplx zd = zw_[a] * std::exp(h_log(z, sq, n_big - 2) - double(d + 2) * std::log(z));
        c_int += zd * (z - s) * (z - s) / ((1.0 - s * z) * (1.0 - s * z) * (z * z - 1.0));
    }
    const double hs = H(s), sd = std::pow(s, d + 1);
    ScalarTerms out;
    out.mu = hs / ((1.0 - s * r) * sd) * mu_int.real();
    out.nu = (s - r) / (1.0 - s * s) * hs / sd * nu_int.real() +
             (1.0 - s * r) / ((s - r) * (1.0 - s * s)) * std::pow(r, d + 2) / sd * hs / H(r);
    out.c = 1.0 / (1.0 - s * s) * hs / sd * c_int.real();
    out.linear = (d + 2) -
                 (n_big - 2) * sq * (1.0 / s + s - 2.0 * sq) / ((1.0 - sq / s) * (1.0 - sq * s)) -
                 s * (1.0 - r * r) / ((1.0 - s * r) * (s - r));
    return out;
}

BracketTerms HatContext::bracket_terms(int d) const {
    const double s = p_.s, r = p_.r;
    const double hs = H(s);
    const double csr = hs / std::pow(s, d + 1);
    const double crr = hs * std::pow(r, d + 2) / (H(r) * std::pow(s, d + 1));
    const VectorXd g1 = slice(g1_, d), d2 = slice(d2_, d), jv = J(d), q = slice(q_hat_, d),
                   pv = slice(p_hat_, d), g1s = slice(g1s_, d), r1s = slice(r1s_, d);
    const VectorXd fr = fvec(r, d), f1s = fvec(1.0 / s, d);
    const MatrixXd a11 = slice(a11_, d), a12 = slice(a12_, d), b = slice(b_, d);
    const double ss = 1.0 - s * s, sr = 1.0 - s * r;
    BracketTerms out;
    out.a = (s - r) / ss * csr * jv.dot(d2) - crr / ss * q.dot(d2) + s / ss * g1s.dot(d2);
    out.b = s / ss * r1s.dot(g1) + s * (s - r) / (ss * sr) * fr.dot(g1) + crr / ss * pv.dot(g1) +
            (s - r) / ss * f1s.dot(b * g1) - (s - r) / ss * f1s.dot(pv) * fr.dot(g1);
    out.d = 1.0 / sr * f1s.dot(a11 * d2) + s / ss * g1s.dot(d2);
    out.e = 1.0 / sr * f1s.dot(a12 * g1) + (s - r) * s / (ss * sr) * fr.dot(g1) +
            s / ss * r1s.dot(g1);
    return out;
}

std::pair<VectorXd, VectorXd> HatContext::v_functions(int d) const {
    const double s = p_.s, r = p_.r;
    const double hs = H(s);
    const double csr = hs / std::pow(s, d + 1);
    const double crr = hs * std::pow(r, d + 2) / (H(r) * std::pow(s, d + 1));
    const VectorXd jv = J(d), q = slice(q_hat_, d), pv = slice(p_hat_, d),
                   g1s = slice(g1s_, d), r1s = slice(r1s_, d);
    const VectorXd fr = fvec(r, d), f1s = fvec(1.0 / s, d);
    const MatrixXd a11 = slice(a11_, d), a12 = slice(a12_, d), b = slice(b_, d);
    const MatrixXd a21 = -a12.transpose();
    const MatrixXd a22e = slice(a22_, d) + e_matrix(d);
    const MatrixXd e = e_matrix(d);
    const int m = k1_ - d;
    const double ss = 1.0 - s * s, sr = 1.0 - s * r;

    // H(s) h(k) = c_sr r^{k-d-1} + (1 - s^2)/(s - r) f^{1/s}(k)
    VectorXd hh(m);
    for (int i = 0; i < m; ++i) hh(i) = csr * std::pow(r, i) + ss / (s - r) * f1s(i);

    // Row vectors f^T A are computed as A^T f.
    const double f1s_p = f1s.dot(pv);
    const VectorXd f1s_b = b.transpose() * f1s;
    const VectorXd f1s_a11 = a11.transpose() * f1s;
    const VectorXd f1s_a12 = a12.transpose() * f1s;

    VectorXd v1 = (s - r) / ss * csr * (a21.transpose() * jv) - crr / ss * (a21.transpose() * q) -
                  crr / ss * (a11.transpose() * pv) + (s - r) / ss * f1s_p * (a11.transpose() * fr) -
                  (s - r) / ss * (a11.transpose() * f1s_b) + s / ss * g1s -
                  2.0 * s / ss * (a11.transpose() * r1s) -
                  2.0 * s * (s - r) / (ss * sr) * (a11.transpose() * fr) +
                  (s - r) / (ss * sr) * (a11.transpose() * hh) +
                  2.0 * s / ss * (a21.transpose() * g1s) + 1.0 / sr * (a21.transpose() * f1s_a11) -
                  1.0 / sr * (a11.transpose() * f1s_a12);

    VectorXd v2 = (s - r) / ss * csr * (a22e.transpose() * jv) - crr / ss * (a22e.transpose() * q) -
                  crr / ss * (a12.transpose() * pv) + (s - r) / ss * f1s_p * (a12.transpose() * fr) -
                  (s - r) / ss * (a12.transpose() * f1s_b) - 2.0 * s / ss * (a12.transpose() * r1s) -
                  2.0 * s * (s - r) / (ss * sr) * (a12.transpose() * fr) +
                  2.0 * s / ss * (a22e.transpose() * g1s) +
                  (s - r) / (sr * ss) * (a12.transpose() * hh) + (s - r) * s / (sr * ss) * fr +
                  s / ss * r1s + 1.0 / sr * (slice(a22_, d).transpose() * f1s_a11) +
                  1.0 / sr * (e.transpose() * f1s_a11) - 1.0 / sr * (a12.transpose() * f1s_a12);
    return {v1, v2};
}

double HatContext::pf_blocks(const KernelBlocks& k, int d) const {
    const int m = static_cast<int>(k.k11.rows());
    const VectorXd w = VectorXd::Ones(m);
    const VectorXd lam = balance(d, m);
    return pf_j_minus_k(k, w, &lam);
}

double HatContext::pf0(int d) const { return pf_blocks(khat(d), d); }

double HatContext::pf0_truncated(int d, int m) const {
    KernelBlocks k = khat(d);
    m = std::min<int>(m, static_cast<int>(k.k11.rows()));
    KernelBlocks t{k.k11.topLeftCorner(m, m), k.k12.topLeftCorner(m, m), k.k22.topLeftCorner(m, m)};
    return pf_blocks(t, d);
}

double HatContext::psi(int d) const {
    if (d < 0) return 0.0;
    const KernelBlocks k = khat(d);
    const double pf0v = pf_blocks(k, d);
    const ScalarTerms sc = scalar_terms(d);
    const BracketTerms br = bracket_terms(d);
    const auto [v1, v2] = v_functions(d);
    const VectorXd g1 = slice(g1_, d), d2 = slice(d2_, d);
    const KernelBlocks pert = add_rank2(k, g1, -d2, v1, v2);
    const double pf1 = pf_blocks(pert, d);
    const double sum = sc.mu + sc.nu + br.a + br.b + sc.c + br.d + br.e + sc.linear;
    return pf0v * sum - pf0v + pf1;
}

// ---------------------------------------------------------------------------

std::vector<double> psi_table(const ModelParams& p, int d_min, int d_max, const HatOptions& opt) {
    std::vector<double> out;
    const int lo = std::max(0, d_min);
    std::optional<HatContext> ctx;
    if (d_max >= 0) ctx.emplace(p, lo, std::max(lo, d_max), opt);
    for (int d = d_min; d <= d_max; ++d) out.push_back(d < 0 ? 0.0 : ctx->psi(d));
    return out;
}

double psi(const ModelParams& p, int d, const HatOptions& opt) {
    if (d < 0) return 0.0;
    return HatContext(p, d, d, opt).psi(d);
}

std::vector<double> cdf_stat_diag_table(const ModelParams& p, int d_min, int d_max,
                                        const HatOptions& opt) {
    if (d_max < d_min) throw InvalidParameters("empty d range");
    if (p.N == 1) {
        validate_two_param_formula([&] { auto q = p; q.N = 2; return q; }());
        std::vector<double> out;
        for (int d = d_min; d <= d_max; ++d) out.push_back(d >= 0 ? 1.0 : 0.0);
        return out;
    }
    const double s = p.s, r = p.r;
    const auto ps = psi_table(p, d_min - 2, d_max, opt);
    std::vector<double> out;
    for (int d = d_min; d <= d_max; ++d) {
        const int i = d - (d_min - 2);
        out.push_back(s / (s - r) * ps[i] - (r + s) / (s - r) * ps[i - 1] + r / (s - r) * ps[i - 2]);
    }
    return out;
}

double cdf_stat_diag(const ModelParams& p, int d, const HatOptions& opt) {
    return cdf_stat_diag_table(p, d, d, opt)[0];
}

double cdf_theorem_initial(const ModelParams& p, int d, const HatOptions& opt) {
    ModelParams q = p;
    q.N = p.N + 1;
    return cdf_stat_diag(q, d, opt);
}


// ---------------------------------------------------------------------------
// Inhomogeneous kernel

namespace {

struct InhomCore {
    MatrixXcd k11, k12, k22;
    double lambda = 1.0;  // balancing ratio per index
};

// Kernel on k0..k1 for complex t; contours are circles around the origin.
InhomCore inhom_core(double sq, double r, double s, cplx t, int hexp, int k0, int k1, int nodes,
                     double tol) {
    const double at = std::abs(t);
    const double r_out = std::min({at > 0 ? 1.0 / at : 1e300, 1.0 / s, 1.0 / sq});
    const double m_in = std::max({r, at, s, sq});
    const double lo = std::max(1.0, m_in);
    if (!(lo < r_out)) throw ContourInfeasible("kernel_inhom: no admissible contour radii");
    const double rho_z = lo + 0.6 * (r_out - lo);
    const double rho_w = m_in < 1.0 ? m_in + 0.5 * (1.0 - m_in) : m_in + 0.5 * (rho_z - m_in);
    const double rho_22 = lo + 0.1 * (r_out - lo);
    const int nk = k1 - k0 + 1;

    auto log_f = [&](cplx z) {
        return h_log(z, sq, hexp) + std::log((1.0 - s / z) / (1.0 - s * z)) +
               std::log((1.0 - t / z) / (1.0 - t * z));
    };
    // Rows of the k-index to build; the full set for the result, a few probes for
    // the convergence test.
    auto compute = [&](int n, const std::vector<int>& rows) {
        const int nr = static_cast<int>(rows.size());
        const NodeSet cz = circle_nodes({0.0, rho_z}, n), cw = circle_nodes({0.0, rho_w}, n),
                      c2 = circle_nodes({0.0, rho_22}, n);
        MatrixXcd za(nk, n), wb(nk, n), z2(nk, n);
        for (int a = 0; a < n; ++a) {
            const cplx lz = std::log(cz.z[a]), lfz = log_f(cz.z[a]), lwz = std::log(cz.w[a]);
            const cplx lw = std::log(cw.z[a]), lfw = log_f(cw.z[a]), lww = std::log(cw.w[a]);
            const cplx l2 = std::log(c2.z[a]), lf2 = log_f(c2.z[a]), l2w = std::log(c2.w[a]);
            for (int i = 0; i < nk; ++i) {
                const double k = k0 + i;
                za(i, a) = std::exp(lwz + lfz - k * lz);         // z^{-k} F(z)
                wb(i, a) = std::exp(lww - lfw + (k - 1.0) * lw);  // w^{l-1} / F(w)
                z2(i, a) = std::exp(l2w - lf2 + (k - 1.0) * l2);  // z^{k-1} / F(z)
            }
        }
        MatrixXcd c11(n, n), c12(n, n), c22(n, n);
        for (int b = 0; b < n; ++b) {
            for (int a = 0; a < n; ++a) {
                const cplx z = cz.z[a], w = cz.z[b];
                c11(a, b) = (z - w) * (z - r) * (w - r) / ((z * z - 1.0) * (w * w - 1.0) * (z * w - 1.0));
                const cplx w2 = cw.z[b];
                c12(a, b) = (z * w2 - 1.0) * (z - r) / ((z * z - 1.0) * (z - w2) * (w2 - r));
                const cplx x = c2.z[a], y = c2.z[b];
                c22(a, b) = (x - y) / ((x * y - 1.0) * (x - r) * (y - r));
            }
        }
        MatrixXcd zr(nr, n), z2r(nr, n);
        for (int i = 0; i < nr; ++i) {
            zr.row(i) = za.row(rows[i]);
            z2r.row(i) = z2.row(rows[i]);
        }
        InhomCore out;
        out.k11 = (zr * c11) * za.transpose();
        out.k12 = (zr * c12) * wb.transpose();
        out.k22 = (z2r * c22) * z2.transpose();
        out.lambda = std::max(1.0, std::sqrt(r_out * m_in));
        return out;
    };
    std::vector<int> all(nk);
    for (int i = 0; i < nk; ++i) all[i] = i;
    if (nodes > 0) return compute(nodes, all);

    const std::vector<int> probe{0, nk / 2, nk - 1};
    int n = 64;
    while (n < 2 * (k1 + 16)) n *= 2;
    InhomCore prev = compute(n, probe);
    for (;;) {
        if (2 * n > 16384) throw QuadratureNotConverged("kernel_inhom: quadrature did not converge", 0);
        InhomCore cur = compute(2 * n, probe);
        // Compare in the balanced frame, where the entries that matter are O(1).
        double err = 0, mag = 1;
        for (int pi = 0; pi < 3; ++pi) {
            const int i = probe[pi];
            for (int j = 0; j < nk; ++j) {
                const double lij = std::pow(cur.lambda, i + j), lr = std::pow(cur.lambda, i - j);
                err = std::max({err, std::abs(cur.k11(pi, j) - prev.k11(pi, j)) * lij,
                                std::abs(cur.k12(pi, j) - prev.k12(pi, j)) * lr,
                                std::abs(cur.k22(pi, j) - prev.k22(pi, j)) / lij});
                mag = std::max(mag, std::abs(cur.k12(pi, j)) * lr);
            }
        }
        if (err <= tol * mag) return compute(n, all);
        prev = std::move(cur);
        n *= 2;
    }
}

int inhom_truncation(double sq, double r, double s, double at, int n_big, int d_lo, double tol) {
    const double r_out = std::min({at > 0 ? 1.0 / at : 1e300, 1.0 / s, 1.0 / sq});
    const double m_in = std::max({r, at, s, sq});
    const double rho = std::min(0.97, std::max(std::sqrt(m_in / r_out), std::max(m_in, 1.0 / r_out)));
    const double rate = std::ceil(std::log(tol * (1.0 - rho)) / std::log(rho));
    const double kappa = 2.0 * sq / (1.0 - sq);
    const double ext =
        std::max(0.0, std::ceil(kappa * n_big + 6.0 * fluctuation_scale(n_big, sq)) - (d_lo + 1));
    return static_cast<int>(std::max(32.0, rate) + ext);
}

cplx pf_core(const InhomCore& c, int k0, int d, int m_keep = -1) {
    const int o = d + 1 - k0;
    int m = static_cast<int>(c.k11.rows()) - o;
    if (m_keep > 0) m = std::min(m, m_keep);
    KernelBlocksC b{c.k11.block(o, o, m, m), c.k12.block(o, o, m, m), c.k22.block(o, o, m, m)};
    VectorXd lam(m);
    for (int i = 0; i < m; ++i) lam(i) = std::pow(c.lambda, i);
    return pf_j_minus_k(b, VectorXd::Ones(m), &lam);
}

void validate_inhom(const ModelParams& p) {
    if (!(p.sqrt_q > 0.0 && p.sqrt_q < 1.0)) throw InvalidParameters("sqrt_q must lie in (0, 1)");
    if (p.N < 2) throw InvalidParameters("kernel_inhom needs N >= 2");
    if (!p.t) throw InvalidParameters("kernel_inhom needs t");
    if (!(p.s > 0.0 && p.s < 1.0) || p.r < 0.0) throw InvalidParameters("need s in (0, 1), r >= 0");
}

}  // namespace

InhomKernel::InhomKernel(const ModelParams& p, int d_lo, int d_hi, const InhomOptions& opt) : p_(p) {
    validate_inhom(p);
    const double t = *p.t;
    if (!(t >= 0.0 && t < 1.0)) throw InvalidParameters("kernel_inhom needs t in [0, 1)");
    if (d_lo < 0 || d_hi < d_lo) throw InvalidParameters("kernel_inhom: bad d range");
    const int hexp = opt.h_exp >= 0 ? opt.h_exp : p.N - 2;
    const int m = opt.kmax > 0 ? opt.kmax
                               : inhom_truncation(p.sqrt_q, p.r, p.s, t, p.N, d_lo, opt.tol);
    k0_ = d_lo + 1;
    k1_ = d_hi + m;
    InhomCore c = inhom_core(p.sqrt_q, p.r, p.s, t, hexp, k0_, k1_, opt.nodes, opt.tol);
    k11_ = c.k11.real();
    k12_ = c.k12.real();
    k22_ = c.k22.real();
    lambda_ = c.lambda;
}

double InhomKernel::pf_truncated(int d, int m) const {
    const int o = d + 1 - k0_;
    if (o < 0 || o >= k11_.rows()) throw InvalidParameters("kernel_inhom: d outside prepared range");
    m = std::min<int>(m, static_cast<int>(k11_.rows()) - o);
    KernelBlocks b{k11_.block(o, o, m, m), k12_.block(o, o, m, m), k22_.block(o, o, m, m)};
    VectorXd lam(m);
    for (int i = 0; i < m; ++i) lam(i) = std::pow(lambda_, i);
    return pf_j_minus_k(b, VectorXd::Ones(m), &lam);
}

double InhomKernel::pf(int d) const { return pf_truncated(d, 1 << 30); }

std::vector<double> cdf_inhom_table(const ModelParams& p, int d_min, int d_max,
                                    const InhomOptions& opt) {
    if (d_max < d_min) throw InvalidParameters("empty d range");
    std::vector<double> out;
    const int lo = std::max(0, d_min);
    std::optional<InhomKernel> k;
    if (d_max >= 0) k.emplace(p, lo, std::max(lo, d_max), opt);
    for (int d = d_min; d <= d_max; ++d) out.push_back(d < 0 ? 0.0 : k->pf(d));
    return out;
}

double cdf_inhom(const ModelParams& p, int d, const InhomOptions& opt) {
    return cdf_inhom_table(p, d, d, opt)[0];
}

std::vector<double> cdf_inhom_continued(const ModelParams& p, int d_min, int d_max,
                                        const InhomOptions& opt) {
    validate_inhom(p);
    const double t = *p.t, sq = p.sqrt_q, r = p.r, s = p.s;
    if (!(t >= 0.0 && t * s < 1.0 && t * r < 1.0 && t * sq < 1.0))
        throw InvalidParameters("continuation needs rt, st, t sqrt_q < 1");
    if (d_max < d_min) throw InvalidParameters("empty d range");
    const int lo = std::max(0, d_min);
    const int hexp = opt.h_exp >= 0 ? opt.h_exp : p.N - 2;
    // P(L <= d) = (1 - rt)(1 - st)(1 - t sqrt q)^{N-2} p_d(t) with deg p_d <= d: the
    // first row carries all t dependence and its weights sum to at most L.
    // Any npts > d_max recovers the coefficients exactly; values at conjugate
    // points are conjugate, so only the upper half circle is evaluated.
    const int npts = 2 * (std::max(lo, d_max) / 2 + 1);
    const double rho_use = std::min(0.8, 0.9 / std::max(1.0, r));
    const int m = opt.kmax > 0 ? opt.kmax : inhom_truncation(sq, r, s, rho_use, p.N, lo, opt.tol);
    const int k0 = lo + 1, k1 = std::max(lo, d_max) + m;
    const int nd = d_max - lo + 1;
    std::vector<std::vector<cplx>> vals(nd, std::vector<cplx>(npts));
    for (int j = 0; j < npts / 2; ++j) {
        const cplx tj = std::polar(rho_use, 2.0 * std::numbers::pi * (j + 0.5) / npts);
        const InhomCore c = inhom_core(sq, r, s, tj, hexp, k0, k1, opt.nodes, opt.tol);
        const cplx pref = (1.0 - r * tj) * (1.0 - s * tj) * std::pow(1.0 - sq * tj, p.N - 2);
        for (int d = lo; d <= std::max(lo, d_max); ++d)
            if (d - lo < nd) {
                vals[d - lo][j] = pf_core(c, k0, d) / pref;
                vals[d - lo][npts - 1 - j] = std::conj(vals[d - lo][j]);
            }
    }
    std::vector<double> out;
    for (int d = d_min; d <= d_max; ++d) {
        if (d < 0) {
            out.push_back(0.0);
            continue;
        }
        // Cauchy coefficients of p_d on the circle, summed at the real point t.
        cplx acc = 0.0;
        for (int deg = 0; deg <= d; ++deg) {
            cplx c = 0.0;
            for (int j = 0; j < npts; ++j) {
                const cplx tj = std::polar(rho_use, 2.0 * std::numbers::pi * (j + 0.5) / npts);
                c += vals[d - lo][j] * std::pow(tj, -deg);
            }
            acc += c / double(npts) * std::pow(t, deg);
        }
        out.push_back(acc.real() * (1.0 - r * t) * (1.0 - s * t) * std::pow(1.0 - sq * t, p.N - 2));
    }
    return out;
}

double shift_transform(double cdf_d, double cdf_d1, double cdf_d2, int d, double r, double s,
                       double t) {
    const double den = (1.0 - s * t) * (1.0 - r * t);
    if (den == 0.0) throw DegenerateParams("shift_transform: st = 1 or rt = 1");
    if (d < 0) return 0.0;
    if (d == 0) return cdf_d / den;
    if (d == 1) return (cdf_d - (r * t + s * t) * cdf_d1) / den;
    return (cdf_d - (r * t + s * t) * cdf_d1 + r * s * t * t * cdf_d2) / den;
}

}  // namespace lpp
