#include "lpp/product_dist.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "lpp/errors.hpp"
#include "lpp/finite_dist.hpp"

namespace lpp {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

cplx h_log(cplx z, double sq, int h_exp) {
    return static_cast<double>(h_exp) * std::log((1.0 - sq / z) / (1.0 - sq * z));
}

std::vector<cplx> guards(const Contour& c) {
    std::vector<cplx> out;
    for (const auto& part : c.parts) {
        out.push_back(part.circle.center - part.circle.radius);
        out.push_back(part.circle.center + part.circle.radius);
    }
    return out;
}

void append(std::vector<cplx>& a, const std::vector<cplx>& b) { a.insert(a.end(), b.begin(), b.end()); }

void validate_product(const ModelParams& p) {
    const double sq = p.sqrt_q, r = p.r;
    if (!(sq > 0.0 && sq < 1.0)) throw InvalidParameters("sqrt_q must lie in (0, 1)");
    if (!(r > sq && r < 1.0 / sq)) throw InvalidParameters("r must lie in (sqrt_q, 1/sqrt_q)");
    if (p.N < 1) throw InvalidParameters("N must be at least 1");
}

// All contours of the product formula.  z contours keep the w contours they are
// paired with outside.
struct GeoContours {
    Contour wq, wqi, wir, wqr, zq, zqr, zg4;
};

GeoContours make_contours(double sq, double r, double gap, int hexp, int kmax) {
    // Around r or 1/r the integrands vary like exp(k' |z - x|), k' the log-derivative
    // of |z^{-k} H(z)|, so those circles stay within a few units of 1/k' to keep
    // the cancellation in the trapezoid sums bounded.
    const auto cap = [=](double x) {
        const double dlog_h = hexp * std::abs(sq / (x * x - sq * x) + sq / (1.0 - sq * x));
        return 4.0 / (kmax / x + dlog_h);
    };
    GeoContours c;
    c.wq = enclosing_contour(sq, {}, {1.0, -1.0, r, 1.0 / r}, gap);
    c.wqi = enclosing_contour(sq, {1.0 / r}, {-1.0, 1.0 / sq}, gap, 1.0 / r, cap);
    c.wir = enclosing_contour(std::nullopt, {1.0 / r}, {sq, 1.0 / sq}, gap, 1.0 / r, cap);
    c.wqr = enclosing_contour(sq, {r}, {-1.0, 1.0 / sq}, gap, r, cap);
    std::vector<cplx> ex = {0.0, 1.0, -1.0, r, 1.0 / r};
    append(ex, guards(c.wq));
    append(ex, guards(c.wqi));
    append(ex, guards(c.wir));
    c.zq = enclosing_contour(1.0 / sq, {}, ex, gap);
    std::vector<cplx> exr = {0.0};
    append(exr, guards(c.wq));
    c.zqr = enclosing_contour(1.0 / sq, {r}, exr, gap, r, cap);
    c.zg4 = enclosing_contour(1.0 / sq, {r, 1.0 / r}, {0.0}, gap, r, cap);
    return c;
}

// Node-weighted z^{-(k+1)} H(z) and w^k / H(w) for the listed k, times
// exp(bal (k - k0)) so that the balancing is applied before anything can overflow.
MatrixXcd z_basis(const NodeSet& ns, const std::vector<int>& ks, double sq, int hexp, int k0,
                  double bal) {
    MatrixXcd out(ks.size(), ns.size());
    for (std::size_t a = 0; a < ns.size(); ++a) {
        const cplx base = std::log(ns.w[a]) + h_log(ns.z[a], sq, hexp), lz = std::log(ns.z[a]);
        for (std::size_t i = 0; i < ks.size(); ++i)
            out(i, a) = std::exp(base - double(ks[i] + 1) * lz + bal * (ks[i] - k0));
    }
    return out;
}

MatrixXcd w_basis(const NodeSet& ns, const std::vector<int>& ks, double sq, int hexp, int k0,
                  double bal) {
    MatrixXcd out(ks.size(), ns.size());
    for (std::size_t b = 0; b < ns.size(); ++b) {
        const cplx base = std::log(ns.w[b]) - h_log(ns.z[b], sq, hexp), lw = std::log(ns.z[b]);
        for (std::size_t i = 0; i < ks.size(); ++i)
            out(i, b) = std::exp(base + double(ks[i]) * lw + bal * (ks[i] - k0));
    }
    return out;
}

template <class F>
VectorXcd diag_fn(const NodeSet& ns, F f) {
    VectorXcd v(ns.size());
    for (std::size_t a = 0; a < ns.size(); ++a) v(a) = f(ns.z[a]);
    return v;
}

template <class F>
MatrixXcd pair_fn(const NodeSet& zs, const NodeSet& ws, F f) {
    MatrixXcd m(zs.size(), ws.size());
    for (std::size_t b = 0; b < ws.size(); ++b)
        for (std::size_t a = 0; a < zs.size(); ++a) m(a, b) = f(zs.z[a], ws.z[b]);
    return m;
}

}  // namespace

double h_product(double r, double sqrt_q, int n_big, int d, int k) {
    if (std::abs(r - 1.0) < 1e-8) return 2.0 * k - 2.0 * d - 1.0;
    const double hr = h_real(r, sqrt_q, n_big - 1);
    return hr * (std::pow(r, k - 2 * d - 1) - std::pow(r, 1 - k)) / (r * r - 1.0) +
           std::pow(r, -k - 1) * (k - d) * hr;
}

GeoContext::GeoContext(const ModelParams& p, int d_lo, int d_hi, const ProductOptions& opt)
    : p_(p), d_lo_(d_lo), d_hi_(d_hi) {
    validate_product(p);
    if (d_lo < 0 || d_hi < d_lo) throw InvalidParameters("GeoContext: bad d range");
    const double sq = p.sqrt_q, r = p.r;
    const int hexp = p.N - 1;
    const double scale = fluctuation_scale(std::max(p.N, 1), sq);
    const double growth = std::max(r, 1.0 / r);

    int m;
    if (opt.kmax > 0) {
        m = opt.kmax;
    } else {
        const double rho = std::min(0.97, sq * growth);
        const double rate = std::ceil(std::log(opt.tol * (1.0 - rho)) / std::log(rho));
        const double kappa = 2.0 * sq / (1.0 - sq);
        const double ext = std::max(0.0, std::ceil(kappa * p.N + 6.0 * scale) - (d_lo + 1));
        m = static_cast<int>(std::max(48.0, rate) + ext);
    }
    k0_ = d_lo + 1;
    k1_ = d_hi + m;
    const int nk = k1_ - k0_ + 1;
    const GeoContours c = make_contours(sq, r, 1.0 / scale, hexp, k1_);
    // |w|^k on the circle around sqrt q grows at most like rho^k, rho its outer
    // edge: close to sqrt q for small N, close to 1 once the circle runs through
    // the saddle point.
    const Circle& wc = c.wq.parts.back().circle;
    lambda_ = std::sqrt(growth / (wc.center.real() + wc.radius));
    std::vector<int> all(nk);
    for (int i = 0; i < nk; ++i) all[i] = k0_ + i;

    auto f_c22 = [r](cplx z, cplx w) { return (z * w - 1.0) / ((r - z) * (w * r - 1.0) * (z - w)); };
    auto f_c12 = [r](cplx z, cplx w) {
        return (z * r - 1.0) * (z * w - 1.0) / ((w * r - 1.0) * (z * z - 1.0) * (z - w));
    };

    // Single integrals on every contour, used to pick the node count.  Rows are
    // balanced the way they enter the Pfaffian.
    const double lb = std::log(lambda_);
    auto probe = [&](int n) {
        const std::vector<int> ks = {k0_, k0_ + nk / 2, k1_};
        std::vector<VectorXcd> parts;
        auto zpart = [&](const Contour& ct, double bal, auto f) {
            const NodeSet ns = contour_nodes(ct, n);
            parts.push_back(z_basis(ns, ks, sq, hexp, k0_, bal) * diag_fn(ns, f));
        };
        auto wpart = [&](const Contour& ct, double bal, auto f) {
            const NodeSet ns = contour_nodes(ct, n);
            parts.push_back(w_basis(ns, ks, sq, hexp, k0_, bal) * diag_fn(ns, f));
        };
        zpart(c.zq, lb, [r](cplx z) { return (z - r) / (z * z - 1.0) + r / (z - r); });
        zpart(c.zqr, -lb, [r](cplx z) { return 1.0 / (r - z); });
        zpart(c.zg4, -lb, [r](cplx z) { return (z * z - 1.0) / ((z - r) * (z - r) * (1.0 - r * z)); });
        wpart(c.wq, lb, [r](cplx w) { return 1.0 / ((1.0 - w * w) * (w * r - 1.0)); });
        wpart(c.wqi, -lb, [r](cplx w) { return 1.0 / (w * r - 1.0); });
        wpart(c.wir, -lb, [r](cplx w) { return 1.0 / (w * r - 1.0); });
        wpart(c.wqr, -lb, [r](cplx w) { return 1.0 / (w - r); });
        Eigen::Index len = 0;
        for (const auto& v : parts) len += v.size();
        VectorXcd out(len);
        Eigen::Index o = 0;
        for (const auto& v : parts) {
            out.segment(o, v.size()) = v;
            o += v.size();
        }
        return out;
    };

    int n = opt.nodes > 0 ? opt.nodes : 64;
    if (opt.nodes <= 0) {
        VectorXcd prev = probe(n);
        for (;;) {
            if (2 * n > 16384)
                throw QuadratureNotConverged("GeoContext: circle quadrature did not converge", 0);
            VectorXcd cur = probe(2 * n);
            const double err = (cur - prev).cwiseAbs().maxCoeff();
            const double mag = std::max(1.0, cur.cwiseAbs().maxCoeff());
            n *= 2;
            if (err <= opt.tol * mag) break;
            prev = std::move(cur);
        }
    }
    n_ = n;

    const NodeSet zq = contour_nodes(c.zq, n), zqr = contour_nodes(c.zqr, n),
                  zg4 = contour_nodes(c.zg4, n);
    const NodeSet wq = contour_nodes(c.wq, n), wqi = contour_nodes(c.wqi, n),
                  wir = contour_nodes(c.wir, n), wqr = contour_nodes(c.wqr, n);
    // Component 1 indices carry lambda^{+i}, component 2 indices lambda^{-i}.
    const MatrixXcd zq_p = z_basis(zq, all, sq, hexp, k0_, lb), zq_m = z_basis(zq, all, sq, hexp, k0_, -lb),
                    zqr_m = z_basis(zqr, all, sq, hexp, k0_, -lb),
                    zg4_m = z_basis(zg4, all, sq, hexp, k0_, -lb);
    const MatrixXcd wq_p = w_basis(wq, all, sq, hexp, k0_, lb), wq_m = w_basis(wq, all, sq, hexp, k0_, -lb),
                    wqi_m = w_basis(wqi, all, sq, hexp, k0_, -lb),
                    wir_m = w_basis(wir, all, sq, hexp, k0_, -lb),
                    wqr_m = w_basis(wqr, all, sq, hexp, k0_, -lb),
                    wqr_0 = w_basis(wqr, all, sq, hexp, k0_, 0.0);

    // Balanced entries are O(1), so the dropped imaginary parts are measured
    // against max(1, block size).
    auto keep = [&](const MatrixXcd& mat) {
        imag_ = std::max(imag_, mat.imag().cwiseAbs().maxCoeff() /
                                    std::max(1.0, mat.real().cwiseAbs().maxCoeff()));
        return MatrixXd(mat.real());
    };
    auto keepv = [&](const VectorXcd& v) {
        imag_ = std::max(imag_, v.imag().cwiseAbs().maxCoeff() /
                                    std::max(1.0, v.real().cwiseAbs().maxCoeff()));
        return VectorXd(v.real());
    };

    const MatrixXcd c11 = pair_fn(zq, wq, [r](cplx z, cplx w) {
        return (r * z - 1.0) * (r - w) * (z * w - 1.0) / ((z * z - 1.0) * (1.0 - w * w) * (z - w));
    });
    k11_ = keep(-(zq_p * c11) * wq_p.transpose());
    zq_c12_ = zq_p * pair_fn(zq, wq, f_c12);
    kt12_ = keep(-zq_c12_ * wq_m.transpose());
    k12_ = keep(-(zq_p * pair_fn(zq, wqi, f_c12)) * wqi_m.transpose());
    zr_c22_ = zqr_m * pair_fn(zqr, wq, f_c22);
    kt22_ = keep(-zr_c22_ * wq_m.transpose());
    const MatrixXd second = keep(-(zq_m * pair_fn(zq, wir, f_c22)) * wir_m.transpose());
    k22_ = kt22_ + second;
    const double lr = std::log(r);
    for (int i = 0; i < nk; ++i)
        for (int j = 0; j < nk; ++j)
            if (i != j)
                k22_(i, j) -= (i > j ? 1.0 : -1.0) * std::exp(-(std::abs(i - j) + 1) * lr - (i + j) * lb);

    g1_ = keepv(zq_p * diag_fn(zq, [r](cplx z) { return (z - r) / (z * z - 1.0); }));
    g3_ = keepv(zq_p * diag_fn(zq, [r](cplx z) { return r / (z - r); }));
    g4_ = keepv(-(zg4_m * diag_fn(zg4, [r](cplx z) {
        return r * (z * z - 1.0) / ((z - r) * (z - r) * (1.0 - r * z));
    })));
    g2_ = keepv(wqr_m * diag_fn(wqr, [r](cplx w) { return 1.0 / (w - r); }));
    er_ = keepv(wqr_0 * diag_fn(wqr, [r](cplx w) { return 1.0 / ((w - r) * (w - r)); }));
    for (int i = 0; i < nk; ++i) er_(i) *= H(r) / std::pow(r, k0_ + i - 1);  // row k holds d = k - 1

    wq_ = wq.z;
    wq_w_ = wq.w;
}

double GeoContext::H(double x) const { return h_real(x, p_.sqrt_q, p_.N - 1); }

double GeoContext::f_pow(double x, int k) const { return std::pow(x, k) / H(x); }

int GeoContext::idx(int k) const {
    if (k < k0_ || k > k1_) throw InvalidParameters("GeoContext: index outside the prepared window");
    return k - k0_;
}

void GeoContext::check_d(int d) const {
    if (d < d_lo_ || d > d_hi_) throw InvalidParameters("GeoContext: d outside the prepared range");
}

double GeoContext::e_r(int d) const {
    check_d(d);
    return er_(idx(d + 1));
}

double GeoContext::lam(int i) const { return std::pow(lambda_, i); }

Eigen::Matrix2d GeoContext::kbar_geo(int k, int l) const {
    const int i = idx(k), j = idx(l);
    Eigen::Matrix2d m;
    m << k11_(i, j) / lam(i + j), k12_(i, j) * lam(j - i), -k12_(j, i) * lam(i - j),
        k22_(i, j) * lam(i + j);
    return m;
}

double GeoContext::ktilde(int kind, int k, int l) const {
    const int i = idx(k), j = idx(l);
    if (kind == 12) return kt12_(i, j) * lam(j - i);
    if (kind == 22) return kt22_(i, j) * lam(i + j);
    throw InvalidParameters("ktilde: kind must be 12 or 22");
}

VectorXd GeoContext::phi(int d, bool first) const {
    check_d(d);
    const double r = p_.r, sq = p_.sqrt_q;
    const int hexp = p_.N - 1;
    // sum_{l > d} w^l f^{1/r}(l) / H(w) in closed form; |w| < r on this contour.
    const double log_h1r = std::log(H(1.0 / r));
    VectorXcd sw(wq_.size());
    for (std::size_t b = 0; b < wq_.size(); ++b) {
        const cplx w = wq_[b];
        sw(b) = std::exp(std::log(wq_w_[b]) - h_log(w, sq, hexp) + double(d + 1) * std::log(w / r) -
                         log_h1r) /
                (1.0 - w / r);
    }
    const int o = d + 1 - k0_, m = k1_ - d;
    VectorXd out(m);
    if (first) {
        const VectorXd s22 = (-(zr_c22_ * sw)).real();
        for (int i = 0; i < m; ++i)
            out(i) = s22(o + i) - g4_(o + i) -
                     h_product(r, sq, p_.N, d, d + 1 + i) * std::exp(-(o + i) * std::log(lambda_));
    } else {
        const VectorXd s12 = (-(zq_c12_ * sw)).real();
        for (int i = 0; i < m; ++i) out(i) = s12(o + i) + g3_(o + i);
    }
    return out;
}

VectorXd GeoContext::phi1(int d) const {
    VectorXd v = phi(d, true);
    for (int i = 0; i < v.size(); ++i) v(i) *= lam(d + 1 - k0_ + i);
    return v;
}

VectorXd GeoContext::phi2(int d) const {
    VectorXd v = phi(d, false);
    for (int i = 0; i < v.size(); ++i) v(i) /= lam(d + 1 - k0_ + i);
    return v;
}

double GeoContext::aux(Aux kind, int d, int k) const {
    switch (kind) {
        case Aux::g1: return g1_(idx(k)) / lam(idx(k));
        case Aux::g2: return g2_(idx(k)) * lam(idx(k));
        case Aux::g3: return g3_(idx(k)) / lam(idx(k));
        case Aux::g4: return g4_(idx(k)) * lam(idx(k));
        case Aux::h: return h_product(p_.r, p_.sqrt_q, p_.N, d, k);
        case Aux::phi1: return phi1(d)(k - d - 1);
        case Aux::phi2: return phi2(d)(k - d - 1);
    }
    throw InvalidParameters("aux: unknown kind");
}

// Blocks are stored balanced: component 1 of index k0 + i scaled by lambda^i and
// component 2 by lambda^{-i}, which leaves Pf(J - K) unchanged.
KernelBlocks GeoContext::kbar(int d) const {
    check_d(d);
    const int o = d + 1 - k0_, m = k1_ - d;
    return {k11_.block(o, o, m, m), k12_.block(o, o, m, m), k22_.block(o, o, m, m)};
}

double GeoContext::pf_kbar(int d) const {
    const KernelBlocks k = kbar(d);
    return pf_j_minus_k(k, VectorXd::Ones(k.k11.rows()));
}

double GeoContext::pf_kbar_truncated(int d, int m) const {
    const KernelBlocks k = kbar(d);
    m = std::min<int>(m, static_cast<int>(k.k11.rows()));
    const KernelBlocks t{k.k11.topLeftCorner(m, m), k.k12.topLeftCorner(m, m), k.k22.topLeftCorner(m, m)};
    return pf_j_minus_k(t, VectorXd::Ones(m));
}

double GeoContext::theta(int d) const {
    if (d < 0) return 0.0;
    const KernelBlocks k = kbar(d);
    const int m = static_cast<int>(k.k11.rows());
    const VectorXd ones = VectorXd::Ones(m);
    const double pf0 = pf_j_minus_k(k, ones);
    const int o = d + 1 - k0_;
    const VectorXd g1 = g1_.segment(o, m), g2 = g2_.segment(o, m);
    const KernelBlocks pert = add_rank2(k, phi(d, false), phi(d, true), -g1, g2);
    return pf0 * (e_r(d) - 1.0) + pf_j_minus_k(pert, ones);
}

std::vector<double> theta_table(const ModelParams& p, int d_min, int d_max, const ProductOptions& opt) {
    if (d_max < d_min) throw InvalidParameters("empty d range");
    std::vector<double> out;
    const int lo = std::max(0, d_min);
    std::optional<GeoContext> ctx;
    if (d_max >= 0) ctx.emplace(p, lo, std::max(lo, d_max), opt);
    for (int d = d_min; d <= d_max; ++d) out.push_back(d < 0 ? 0.0 : ctx->theta(d));
    return out;
}

double theta(const ModelParams& p, int d, const ProductOptions& opt) {
    if (d < 0) return 0.0;
    return GeoContext(p, d, d, opt).theta(d);
}

std::vector<double> cdf_product_table(const ModelParams& p, int d_min, int d_max,
                                      const ProductOptions& opt) {
    if (d_max < d_min) throw InvalidParameters("empty d range");
    const auto th = theta_table(p, d_min - 1, d_max, opt);
    std::vector<double> out;
    for (std::size_t i = 1; i < th.size(); ++i) out.push_back(th[i] - th[i - 1]);
    return out;
}

double cdf_product(const ModelParams& p, int d, const ProductOptions& opt) {
    return cdf_product_table(p, d, d, opt)[0];
}

}  // namespace lpp
