#include "lpp/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lpp/errors.hpp"
#include "lpp/finite_dist.hpp"

namespace lpp {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

// Row i, column a: weight_a e^{zeta_a^3/3 - x_i zeta_a}.
MatrixXcd zeta_rows(const NodeSet& z, const VectorXd& x) {
    MatrixXcd m(x.size(), z.size());
    for (std::size_t a = 0; a < z.size(); ++a) {
        const cplx base = std::log(z.w[a]) + z.z[a] * z.z[a] * z.z[a] / 3.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) m(i, a) = std::exp(base - x(i) * z.z[a]);
    }
    return m;
}

// Row i, column b: weight_b e^{-omega_b^3/3 + x_i omega_b}.
MatrixXcd omega_rows(const NodeSet& w, const VectorXd& x) {
    MatrixXcd m(x.size(), w.size());
    for (std::size_t b = 0; b < w.size(); ++b) {
        const cplx base = std::log(w.w[b]) - w.z[b] * w.z[b] * w.z[b] / 3.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) m(i, b) = std::exp(base + x(i) * w.z[b]);
    }
    return m;
}

template <class F>
VectorXcd ray_sum(const MatrixXcd& rows, const NodeSet& n, F f) {
    VectorXcd v(n.size());
    for (std::size_t a = 0; a < n.size(); ++a) v(a) = f(n.z[a]);
    return rows * v;
}

template <class F>
MatrixXcd pair_sum(const MatrixXcd& zr, const MatrixXcd& wr, const NodeSet& z, const NodeSet& w,
                   F f) {
    MatrixXcd c(z.size(), w.size());
    for (std::size_t a = 0; a < z.size(); ++a)
        for (std::size_t b = 0; b < w.size(); ++b) c(a, b) = f(z.z[a], w.z[b]);
    return zr * c * wr.transpose();
}

VectorXd real_part(const VectorXcd& v, double& imag) {
    if (v.size()) imag = std::max(imag, v.imag().cwiseAbs().maxCoeff());
    return v.real();
}

MatrixXd real_part(const MatrixXcd& m, double& imag) {
    if (m.size()) imag = std::max(imag, m.imag().cwiseAbs().maxCoeff());
    return m.real();
}

VectorXd one(double x) { return VectorXd::Constant(1, x); }

// sinh(r u)/r, equal to u at r = 0.
double sinhc(double r, double u) { return std::abs(r) < 1e-12 ? u : std::sinh(r * u) / r; }

}  // namespace

ScaleMaps scale_maps(int n, double sqrt_q) {
    if (!(sqrt_q > 0.0 && sqrt_q < 1.0)) throw InvalidParameters("sqrt_q must lie in (0, 1)");
    if (n < 1) throw InvalidParameters("N must be positive");
    ScaleMaps m;
    m.n = n;
    m.kappa = 2.0 * sqrt_q / (1.0 - sqrt_q);
    m.sigma = fluctuation_scale(n, sqrt_q);
    return m;
}

double f_tilde(double y, double u) { return std::exp(-y * y * y / 3.0 + y * u); }

double e_tilde(double x, double y, double r_tilde) {
    if (x == y) return 0.0;
    return (x > y ? -1.0 : 1.0) * std::exp(r_tilde * std::abs(x - y));
}

RayPair make_ray_pair(double right_of, double x_min, const TildeOptions& opt) {
    RayPair rp;
    const double xs = std::max(0.0, -x_min);
    rp.z_ray = make_ray(right_of + 1.0 + opt.z_shift, RayDir::down, xs);
    rp.w_ray = make_ray(-right_of - 1.0 - opt.w_shift, RayDir::up, xs);
    if (opt.panels > 0) {
        rp.z = ray_nodes(rp.z_ray, opt.panels);
        rp.w = ray_nodes(rp.w_ray, opt.panels);
        return rp;
    }
    // Airy-type probes at both ends and the middle of the window.
    VectorXd xp(3);
    xp << x_min, x_min + 0.5 * opt.window, x_min + opt.window;
    const double zc = rp.z_ray.crossing, wc = rp.w_ray.crossing;
    auto probe = [&](int panels) {
        const NodeSet z = ray_nodes(rp.z_ray, panels), w = ray_nodes(rp.w_ray, panels);
        VectorXcd out(6);
        out << ray_sum(zeta_rows(z, xp), z, [&](cplx s) { return 1.0 / (s - zc + 1.0); }),
            ray_sum(omega_rows(w, xp), w, [&](cplx s) { return 1.0 / (s - wc - 1.0); });
        return out;
    };
    int p = 4;
    VectorXcd prev = probe(p);
    for (;;) {
        if (2 * p > 512) throw QuadratureNotConverged("make_ray_pair: ray panels did not converge", 0);
        VectorXcd cur = probe(2 * p);
        p *= 2;
        const double err = (cur - prev).cwiseAbs().maxCoeff();
        if (err <= opt.tol * std::max(1.0, cur.cwiseAbs().maxCoeff())) break;
        prev = cur;
    }
    rp.z = ray_nodes(rp.z_ray, p);
    rp.w = ray_nodes(rp.w_ray, p);
    return rp;
}

// ---------------------------------------------------------------------------
// Two-parameter limit

void validate_scaled_two_param(const ScaledParams& p) {
    const double s = p.s_tilde, r = p.r_tilde;
    if (!std::isfinite(s) || !std::isfinite(r) || !std::isfinite(p.d_tilde))
        throw InvalidParameters("scaled parameters must be finite");
    if (!(s < 0.0)) throw InvalidParameters("s~ must be negative");
    if (std::abs(s - r) < 1e-4 || std::abs(s + r) < 1e-4)
        throw DegenerateParams("r~ too close to s~ or -s~");
    if (!(r < -s)) throw InvalidParameters("r~ must lie below -s~");
}

namespace {

struct TwoParamFactors {
    double s, r;

    cplx G(double y, cplx z) const { return -(z - y) * (z - r) / ((z + y) * (2.0 * z)); }
    cplx R(double y, cplx w) const { return (w + y) / ((w - y) * (w - r)); }
    cplx P(cplx w) const { return -1.0 / (w + r); }
    cplx Q(cplx z) const { return -(z + r) / (2.0 * z); }
    cplx B(cplx z, cplx w) const { return (z + w) / ((z - w) * (z + r) * (w - r)); }
    cplx A11(cplx z, cplx w) const {
        return -(z + w) * (z - r) * (w + r) / (4.0 * z * w * (z - w));
    }
    cplx A12(cplx z, cplx w) const { return -(z + w) * (z - r) / ((2.0 * z) * (w - r) * (z - w)); }
    cplx J(cplx z, cplx w) const {
        return -(z + w) * (z - r) / ((2.0 * z) * (w - s) * (w - r) * (z - w));
    }
};

}  // namespace

TildeContext::TildeContext(const ScaledParams& p, const TildeOptions& opt) : p_(p), opt_(opt) {
    validate_scaled_two_param(p);
    const double s = p.s_tilde, r = p.r_tilde, d = p.d_tilde;
    const TwoParamFactors f{s, r};
    g_ = make_grid(d, d + opt.window, opt.nodes);
    rays_ = make_ray_pair(std::max({0.0, std::abs(s), std::abs(r)}), d, opt);
    const NodeSet &zn = rays_.z, &wn = rays_.w;
    const MatrixXcd zx = zeta_rows(zn, g_.x), wx = omega_rows(wn, g_.x);

    fr_ = fvec(r);
    fms_ = fvec(-s);
    const VectorXd fs = fvec(s);
    gms_ = real_part(ray_sum(zx, zn, [&](cplx z) { return f.G(-s, z); }), imag_);
    const VectorXd gs = real_part(ray_sum(zx, zn, [&](cplx z) { return f.G(s, z); }), imag_);
    rms_ = real_part(ray_sum(wx, wn, [&](cplx w) { return f.R(-s, w); }), imag_);
    const VectorXd rs = real_part(ray_sum(wx, wn, [&](cplx w) { return f.R(s, w); }), imag_);
    p_v_ = real_part(ray_sum(wx, wn, [&](cplx w) { return f.P(w); }), imag_);
    q_v_ = real_part(ray_sum(zx, zn, [&](cplx z) { return f.Q(z); }), imag_);

    b_ = real_part(pair_sum(zx, wx, zn, wn, [&](cplx z, cplx w) { return f.B(z, w); }), imag_);
    a11_ = real_part(pair_sum(zx, wx, zn, wn, [&](cplx z, cplx w) { return f.A11(z, w); }), imag_);
    a12_ = real_part(pair_sum(zx, wx, zn, wn, [&](cplx z, cplx w) { return f.A12(z, w); }), imag_) +
           q_v_ * fr_.transpose();
    a22_ = fr_ * p_v_.transpose() - p_v_ * fr_.transpose() + b_;

    g1_v_ = gs + (s + r) * fs;
    d2_v_ = -2.0 * s / (s - r) * fs + (s + r) / (s - r) * fr_ - rs;

    const MatrixXcd wd = omega_rows(wn, one(d));
    VectorXcd inner(zn.size());
    for (std::size_t a = 0; a < zn.size(); ++a) {
        cplx acc = 0.0;
        for (std::size_t b = 0; b < wn.size(); ++b) acc += wd(0, b) * f.J(zn.z[a], wn.z[b]);
        inner(a) = acc;
    }
    j_v_ = real_part(VectorXcd(zx * inner), imag_);

    split_.emplace(g_, smooth_kernel(), r);
}

VectorXd TildeContext::fvec(double y) const {
    VectorXd v(g_.x.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f_tilde(y, g_.x(i));
    return v;
}

VectorXd TildeContext::row(const VectorXd& f, const MatrixXd& m) const {
    return m.transpose() * wdot(f);
}

double TildeContext::dot(const VectorXd& f, const VectorXd& g) const { return wdot(f).dot(g); }

double TildeContext::G(double y, double x) const {
    const TwoParamFactors f{p_.s_tilde, p_.r_tilde};
    return real_part(ray_sum(zeta_rows(rays_.z, one(x)), rays_.z, [&](cplx z) { return f.G(y, z); }),
                     imag_)(0);
}

double TildeContext::R(double y, double x) const {
    const TwoParamFactors f{p_.s_tilde, p_.r_tilde};
    return real_part(ray_sum(omega_rows(rays_.w, one(x)), rays_.w, [&](cplx w) { return f.R(y, w); }),
                     imag_)(0);
}

double TildeContext::P(double x) const {
    const TwoParamFactors f{p_.s_tilde, p_.r_tilde};
    return real_part(ray_sum(omega_rows(rays_.w, one(x)), rays_.w, [&](cplx w) { return f.P(w); }),
                     imag_)(0);
}

double TildeContext::Q(double x) const {
    const TwoParamFactors f{p_.s_tilde, p_.r_tilde};
    return real_part(ray_sum(zeta_rows(rays_.z, one(x)), rays_.z, [&](cplx z) { return f.Q(z); }),
                     imag_)(0);
}

double TildeContext::B(double x, double y) const {
    const TwoParamFactors f{p_.s_tilde, p_.r_tilde};
    return real_part(pair_sum(zeta_rows(rays_.z, one(x)), omega_rows(rays_.w, one(y)), rays_.z,
                              rays_.w, [&](cplx z, cplx w) { return f.B(z, w); }),
                     imag_)(0, 0);
}

double TildeContext::A11(double x, double y) const {
    const TwoParamFactors f{p_.s_tilde, p_.r_tilde};
    return real_part(pair_sum(zeta_rows(rays_.z, one(x)), omega_rows(rays_.w, one(y)), rays_.z,
                              rays_.w, [&](cplx z, cplx w) { return f.A11(z, w); }),
                     imag_)(0, 0);
}

double TildeContext::A12(double x, double y) const {
    const TwoParamFactors f{p_.s_tilde, p_.r_tilde};
    const double core =
        real_part(pair_sum(zeta_rows(rays_.z, one(x)), omega_rows(rays_.w, one(y)), rays_.z,
                           rays_.w, [&](cplx z, cplx w) { return f.A12(z, w); }),
                  imag_)(0, 0);
    return core + Q(x) * f_tilde(p_.r_tilde, y);
}

double TildeContext::A22(double x, double y) const {
    const double r = p_.r_tilde;
    return f_tilde(r, x) * P(y) - P(x) * f_tilde(r, y) + B(x, y);
}

double TildeContext::J(double x) const {
    const TwoParamFactors f{p_.s_tilde, p_.r_tilde};
    return real_part(pair_sum(zeta_rows(rays_.z, one(x)), omega_rows(rays_.w, one(p_.d_tilde)),
                              rays_.z, rays_.w, [&](cplx z, cplx w) { return f.J(z, w); }),
                     imag_)(0, 0);
}

double TildeContext::g1(double x) const {
    const double s = p_.s_tilde, r = p_.r_tilde;
    return G(s, x) + (s + r) * f_tilde(s, x);
}

double TildeContext::d2(double x) const {
    const double s = p_.s_tilde, r = p_.r_tilde;
    return -2.0 * s / (s - r) * f_tilde(s, x) + (s + r) / (s - r) * f_tilde(r, x) - R(s, x);
}

KernelBlocks TildeContext::smooth_kernel() const { return {a11_, a12_, a22_}; }

double TildeContext::mu() const {
    const double s = p_.s_tilde, r = p_.r_tilde, d = p_.d_tilde;
    const VectorXcd v = ray_sum(omega_rows(rays_.w, one(d)), rays_.w, [&](cplx w) {
        return (w + s) * (w + r) / ((w - s) * (w - s) * (2.0 * w));
    });
    return std::exp(s * s * s / 3.0 - d * s) / (s + r) * real_part(v, imag_)(0);
}

double TildeContext::nu() const {
    const double s = p_.s_tilde, r = p_.r_tilde, d = p_.d_tilde;
    const VectorXcd v = ray_sum(omega_rows(rays_.w, one(d)), rays_.w,
                                [&](cplx w) { return (w + s) / ((w - s) * (w - s) * (w - r)); });
    return (s - r) / (2.0 * s) * std::exp(s * s * s / 3.0 - d * s) * real_part(v, imag_)(0) +
           (s + r) / (2.0 * s * (s - r)) * std::exp(s * s * s / 3.0 - r * r * r / 3.0 - d * s + d * r);
}

double TildeContext::c_term() const {
    const double s = p_.s_tilde, d = p_.d_tilde;
    const VectorXcd v = ray_sum(zeta_rows(rays_.z, one(d)), rays_.z, [&](cplx z) {
        return (z - s) * (z - s) / ((z + s) * (z + s) * (2.0 * z));
    });
    return -std::exp(s * s * s / 3.0 - d * s) / (2.0 * s) * real_part(v, imag_)(0);
}

double TildeContext::linear() const {
    const double s = p_.s_tilde, r = p_.r_tilde;
    return p_.d_tilde - s * s - 2.0 * r / (s * s - r * r);
}

TildeContext::Brackets TildeContext::brackets() const {
    const double s = p_.s_tilde, r = p_.r_tilde, d = p_.d_tilde;
    const double a = (s - r) / (2.0 * s);
    const double c1 = std::exp(s * s * s / 3.0 - d * s);
    const double c2 = std::exp(s * s * s / 3.0 - r * r * r / 3.0 - d * s + d * r);
    const VectorXd &g1 = g1_v_, &d2 = d2_v_;
    Brackets out;
    out.a = -a * c1 * dot(j_v_, d2) + c2 / (2.0 * s) * dot(q_v_, d2) - dot(gms_, d2) / (2.0 * s);
    out.b = -dot(rms_, g1) / (2.0 * s) + (s - r) / (2.0 * s * (s + r)) * dot(fr_, g1) -
            c2 / (2.0 * s) * dot(p_v_, g1) - a * dot(row(fms_, b_), g1) +
            a * dot(fms_, p_v_) * dot(fr_, g1);
    out.d = -dot(row(fms_, a11_), d2) / (s + r) - dot(gms_, d2) / (2.0 * s);
    out.e = -dot(row(fms_, a12_), g1) / (s + r) + (s - r) / (2.0 * s * (s + r)) * dot(fr_, g1) -
            dot(rms_, g1) / (2.0 * s);
    return out;
}

std::pair<VectorXd, VectorXd> TildeContext::v_functions() const {
    const double s = p_.s_tilde, r = p_.r_tilde, d = p_.d_tilde;
    const double a = (s - r) / (2.0 * s);
    const double c1 = std::exp(s * s * s / 3.0 - d * s);
    const double c2 = std::exp(s * s * s / 3.0 - r * r * r / 3.0 - d * s + d * r);
    const MatrixXd a21 = -a12_.transpose();
    // <f| (A22 + E~): <f|E~(Y) = -(E f)(Y) by antisymmetry.
    auto row22 = [&](const VectorXd& f) -> VectorXd { return row(f, a22_) - split_->apply_jump(f); };

    VectorXd hh(g_.x.size());
    for (Eigen::Index i = 0; i < hh.size(); ++i)
        hh(i) = std::exp(r * (g_.x(i) - d)) * c1 - 2.0 * s / (s - r) * fms_(i);
    const double fp = dot(fms_, p_v_);
    const VectorXd fb = row(fms_, b_), fa11 = row(fms_, a11_), fa12 = row(fms_, a12_);

    VectorXd v1 = -a * c1 * row(j_v_, a21) + c2 / (2.0 * s) * row(q_v_, a21) +
                  c2 / (2.0 * s) * row(p_v_, a11_) - a * fp * row(fr_, a11_) + a * row(fb, a11_) -
                  gms_ / (2.0 * s) + row(rms_, a11_) / s - (s - r) / (s * (s + r)) * row(fr_, a11_) +
                  (s - r) / (2.0 * s * (s + r)) * row(hh, a11_) - row(gms_, a21) / s -
                  row(fa11, a21) / (s + r) + row(fa12, a11_) / (s + r);

    VectorXd v2 = -a * c1 * row22(j_v_) + c2 / (2.0 * s) * row22(q_v_) +
                  c2 / (2.0 * s) * row(p_v_, a12_) - a * fp * row(fr_, a12_) + a * row(fb, a12_) +
                  row(rms_, a12_) / s - (s - r) / (s * (s + r)) * row(fr_, a12_) - row22(gms_) / s +
                  (s - r) / (2.0 * s * (s + r)) * row(hh, a12_) +
                  (s - r) / (2.0 * s * (s + r)) * fr_ - rms_ / (2.0 * s) -
                  row(fa11, a22_) / (s + r) + split_->apply_jump(fa11) / (s + r) +
                  row(fa12, a12_) / (s + r);
    return {v1, v2};
}

double TildeContext::L() const {
    const double pf = split_->pf();
    const Brackets br = brackets();
    const auto [v1, v2] = v_functions();
    const double sum = mu() + nu() + br.a + br.b + c_term() + br.d + br.e + linear();
    return pf * sum - pf + split_->perturbed_pf(g1_v_, -d2_v_, v1, v2);
}

namespace {

// Node doubling at a fixed window, then the same at twice the window, until the
// node-converged values of two successive windows agree to tol.  Returns the
// accepted options and the value there.
std::pair<TildeOptions, double> window_converged(
    const std::function<double(const TildeOptions&)>& value, const TildeOptions& opt, double tol,
    const char* what) {
    TildeOptions o = opt;
    double last = 0.0;
    for (int level = 0; level < 4; ++level) {
        double prev = value(o), cur = prev;
        bool ok = false;
        for (int k = 0; k < 4 && !ok; ++k) {
            o.nodes *= 2;
            cur = value(o);
            ok = std::abs(cur - prev) <= tol;
            prev = cur;
        }
        if (!ok) throw QuadratureNotConverged(std::string(what) + ": node doubling did not converge", cur);
        if (level > 0 && std::abs(cur - last) <= tol) return {o, cur};
        last = cur;
        o.window *= 2;
    }
    throw TruncationNotConverged(std::string(what) + ": window doubling did not converge", last);
}

}  // namespace

double L_of(const ScaledParams& p, const TildeOptions& opt, double tol) {
    return window_converged([&](const TildeOptions& o) { return TildeContext(p, o).L(); }, opt, tol,
                            "L_of")
        .second;
}

Derivatives stencil_derivatives(const std::function<double(double)>& f, double x, double h) {
    const double m4 = f(x - 4 * h), m2 = f(x - 2 * h), m1 = f(x - h), z = f(x), p1 = f(x + h),
                 p2 = f(x + 2 * h), p4 = f(x + 4 * h);
    const double d1h = (m2 - 8 * m1 + 8 * p1 - p2) / (12 * h);
    const double d1H = (m4 - 8 * m2 + 8 * p2 - p4) / (24 * h);
    const double d2h = (-m2 + 16 * m1 - 30 * z + 16 * p1 - p2) / (12 * h * h);
    const double d2H = (-m4 + 16 * m2 - 30 * z + 16 * p2 - p4) / (48 * h * h);
    return {z, (16 * d1h - d1H) / 15, (16 * d2h - d2H) / 15};
}

double limiting_cdf_two_param(const ScaledParams& p, const TildeOptions& opt) {
    validate_scaled_two_param(p);
    // The discretization is settled at the centre and shared by the stencil, so
    // its error is smooth in d~.
    const TildeOptions o =
        window_converged([&](const TildeOptions& t) { return TildeContext(p, t).L(); }, opt, 1e-8,
                         "limiting_cdf_two_param")
            .first;
    auto l = [&](double dt) {
        ScaledParams q = p;
        q.d_tilde = dt;
        return TildeContext(q, o).L();
    };
    const Derivatives dv = stencil_derivatives(l, p.d_tilde);
    return dv.second / (p.s_tilde - p.r_tilde) + dv.first;
}

// ---------------------------------------------------------------------------
// Product limit

namespace {

struct ProductFactors {
    double r;

    cplx A11(cplx z, cplx w) const { return (z + r) * (r - w) * (z + w) / (4.0 * z * w * (z - w)); }
    cplx A12(cplx z, cplx w) const { return -(z + r) * (z + w) / ((w + r) * (2.0 * z) * (z - w)); }
    cplx A22(cplx z, cplx w) const { return -(z + w) / ((r - z) * (w + r) * (z - w)); }
    cplx g1(cplx z) const { return (z - r) / (2.0 * z); }
    cplx g3(cplx z) const { return 1.0 / (z - r); }
    cplx g4(cplx z) const { return 2.0 * z / ((z - r) * (z - r) * (z + r)); }
};

}  // namespace

XiContext::XiContext(double r_tilde, double d_tilde, const TildeOptions& opt)
    : rt_(r_tilde), dt_(d_tilde), opt_(opt) {
    if (!std::isfinite(r_tilde) || !std::isfinite(d_tilde))
        throw InvalidParameters("scaled parameters must be finite");
    const double r = r_tilde, d = d_tilde;
    const ProductFactors f{r};
    g_ = make_grid(d, d + opt.window, opt.nodes);
    rays_ = make_ray_pair(std::abs(r), d, opt);
    const NodeSet &zn = rays_.z, &wn = rays_.w;
    const MatrixXcd zx = zeta_rows(zn, g_.x), wx = omega_rows(wn, g_.x);
    const Eigen::Index n = g_.x.size();

    VectorXd fm(n), t(n);
    for (Eigen::Index i = 0; i < n; ++i) fm(i) = f_tilde(-r, g_.x(i));
    g1_v_ = real_part(ray_sum(zx, zn, [&](cplx z) { return f.g1(z); }), imag_);
    const VectorXd u = real_part(ray_sum(wx, wn, [&](cplx w) { return 1.0 / (r - w); }), imag_);
    t = real_part(ray_sum(zx, zn, [&](cplx z) { return 1.0 / (z + r); }), imag_);

    a11_ = real_part(pair_sum(zx, wx, zn, wn, [&](cplx z, cplx w) { return f.A11(z, w); }), imag_);
    const MatrixXd at12 =
        real_part(pair_sum(zx, wx, zn, wn, [&](cplx z, cplx w) { return f.A12(z, w); }), imag_);
    a12_ = at12 - g1_v_ * fm.transpose();
    const MatrixXd at22 =
        real_part(pair_sum(zx, wx, zn, wn, [&](cplx z, cplx w) { return f.A22(z, w); }), imag_) +
        fm * u.transpose();
    a22s_ = at22 + t * fm.transpose();

    g2_v_.resize(n);
    h1_v_.resize(n);
    h2_v_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) g2_v_(i) = g2(g_.x(i));
    // The sum over l > d of K~(X, l) f^{1/r}(l) becomes the V-integral of
    // W(omega; V) e^{r^3/3 - r V}, which is W(omega; d) e^{r^3/3 - r d}/(r - omega).
    const double c = std::exp(r * r * r / 3.0 - r * d);
    const MatrixXcd wd = omega_rows(wn, one(d));
    VectorXcd i12(zn.size()), i22(zn.size());
    cplx tail = 0.0;
    for (std::size_t b = 0; b < wn.size(); ++b) tail += wd(0, b) / ((r - wn.z[b]) * (r - wn.z[b]));
    for (std::size_t a = 0; a < zn.size(); ++a) {
        cplx s12 = 0.0, s22 = 0.0;
        for (std::size_t b = 0; b < wn.size(); ++b) {
            const cplx wv = wd(0, b) / (r - wn.z[b]);
            s12 += wv * f.A12(zn.z[a], wn.z[b]);
            s22 += wv * f.A22(zn.z[a], wn.z[b]);
        }
        i12(a) = s12;
        i22(a) = s22;
    }
    const VectorXd k12 = real_part(VectorXcd(zx * i12), imag_);
    const VectorXd k22 = real_part(VectorXcd(zx * i22), imag_);
    imag_ = std::max(imag_, std::abs(tail.imag()));
    const VectorXd g3v = real_part(ray_sum(zx, zn, [&](cplx z) { return f.g3(z); }), imag_);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = g_.x(i);
        h2_v_(i) = c * k12(i) + g3v(i);
        h1_v_(i) = c * k22(i) + fm(i) * c * tail.real() - g4(x) - j(x);
    }

    split_.emplace(g_, smooth_kernel(), -r);
}

double XiContext::A11(double x, double y) const {
    const ProductFactors f{rt_};
    return real_part(pair_sum(zeta_rows(rays_.z, one(x)), omega_rows(rays_.w, one(y)), rays_.z,
                              rays_.w, [&](cplx z, cplx w) { return f.A11(z, w); }),
                     imag_)(0, 0);
}

double XiContext::A12(double x, double y) const {
    const ProductFactors f{rt_};
    const double core =
        real_part(pair_sum(zeta_rows(rays_.z, one(x)), omega_rows(rays_.w, one(y)), rays_.z,
                           rays_.w, [&](cplx z, cplx w) { return f.A12(z, w); }),
                  imag_)(0, 0);
    return core - g1(x) * f_tilde(-rt_, y);
}

double XiContext::A22_smooth(double x, double y) const {
    const ProductFactors f{rt_};
    const double r = rt_;
    const double core =
        real_part(pair_sum(zeta_rows(rays_.z, one(x)), omega_rows(rays_.w, one(y)), rays_.z,
                           rays_.w, [&](cplx z, cplx w) { return f.A22(z, w); }),
                  imag_)(0, 0);
    const double u =
        real_part(ray_sum(omega_rows(rays_.w, one(y)), rays_.w, [&](cplx w) { return 1.0 / (r - w); }),
                  imag_)(0);
    const double t =
        real_part(ray_sum(zeta_rows(rays_.z, one(x)), rays_.z, [&](cplx z) { return 1.0 / (z + r); }),
                  imag_)(0);
    return core + f_tilde(-r, x) * u + t * f_tilde(-r, y);
}

double XiContext::A22(double x, double y) const { return A22_smooth(x, y) + e_tilde(x, y, -rt_); }

double XiContext::g1(double x) const {
    const ProductFactors f{rt_};
    return real_part(ray_sum(zeta_rows(rays_.z, one(x)), rays_.z, [&](cplx z) { return f.g1(z); }),
                     imag_)(0);
}

double XiContext::g2(double x) const {
    const double r = rt_;
    const double v =
        real_part(ray_sum(omega_rows(rays_.w, one(x)), rays_.w, [&](cplx w) { return 1.0 / (w - r); }),
                  imag_)(0);
    // Residue at omega = r~, which the contour encloses.
    return v + f_tilde(r, x);
}

double XiContext::g3(double x) const {
    const ProductFactors f{rt_};
    return real_part(ray_sum(zeta_rows(rays_.z, one(x)), rays_.z, [&](cplx z) { return f.g3(z); }),
                     imag_)(0);
}

double XiContext::g4(double x) const {
    const ProductFactors f{rt_};
    const double r = rt_;
    const double v =
        real_part(ray_sum(zeta_rows(rays_.z, one(x)), rays_.z, [&](cplx z) { return f.g4(z); }),
                  imag_)(0);
    // Residues at the double pole r~ and the simple pole -r~; their sum stays
    // finite as r~ -> 0.
    return v + f_tilde(-r, x) * (r * r - x) + sinhc(r, r * r / 3.0 - x);
}

double XiContext::e() const {
    const double r = rt_, d = dt_;
    const double v = real_part(ray_sum(omega_rows(rays_.w, one(d)), rays_.w,
                                       [&](cplx w) { return 1.0 / ((w - r) * (w - r)); }),
                               imag_)(0);
    return std::exp(r * r * r / 3.0 - r * d) * v + d - r * r;
}

double XiContext::j(double x) const {
    const double r = rt_, u = x - dt_;
    return std::exp(r * r * r / 3.0 - r * dt_) * (sinhc(r, u) + u * std::exp(-r * u));
}

KernelBlocks XiContext::smooth_kernel() const { return {a11_, a12_, a22s_}; }

double XiContext::xi() const {
    const double pf = split_->pf();
    return pf * (e() - 1.0) + split_->perturbed_pf(h2_v_, h1_v_, -g1_v_, g2_v_);
}

double xi_of(double r_tilde, double d_tilde, const TildeOptions& opt, double tol) {
    return window_converged([&](const TildeOptions& o) { return XiContext(r_tilde, d_tilde, o).xi(); },
                            opt, tol, "xi_of")
        .second;
}

double limiting_cdf_product(double r_tilde, double d_tilde, const TildeOptions& opt) {
    const TildeOptions o =
        window_converged([&](const TildeOptions& t) { return XiContext(r_tilde, d_tilde, t).xi(); },
                         opt, 1e-8, "limiting_cdf_product")
            .first;
    auto x = [&](double dt) { return XiContext(r_tilde, dt, o).xi(); };
    return stencil_derivatives(x, d_tilde).first;
}

}  // namespace lpp
