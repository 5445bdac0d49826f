#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "lpp/pfaffian.hpp"
#include "lpp/quadrature.hpp"

namespace lpp {

// Critically scaled parameters.  The two-parameter limit needs s~ < 0 and
// r~ in (-inf, s~) u (s~, -s~); the product limit uses r~ only.
struct ScaledParams {
    double s_tilde = -1.0;
    double r_tilde = 0.0;
    double d_tilde = 0.0;
    std::optional<double> c0_sqrt_q;
};

// d = kappa N + sigma d~, s = 1 + s~/sigma, r = 1 + r~/sigma, with
// kappa = 2 sqrt q/(1 - sqrt q) and sigma = (c0 N/2)^{1/3}.
struct ScaleMaps {
    int n = 0;
    double kappa = 0, sigma = 1;

    double d_of(double dt) const { return kappa * n + sigma * dt; }
    double dt_of(double d) const { return (d - kappa * n) / sigma; }
    double s_of(double st) const { return 1.0 + st / sigma; }
    double st_of(double s) const { return (s - 1.0) * sigma; }
    double r_of(double rt) const { return 1.0 + rt / sigma; }
    double rt_of(double r) const { return (r - 1.0) * sigma; }
};
ScaleMaps scale_maps(int n, double sqrt_q);

// f~^y(U) = e^{-y^3/3 + y U}.
double f_tilde(double y, double u);
// E~(X, Y) = -sgn(X - Y) e^{r~ |X - Y|}.
double e_tilde(double x, double y, double r_tilde);

struct TildeOptions {
    double tol = 1e-10;    // ray quadrature target
    double window = 14.0;  // the half line (d~, inf) is cut to (d~, d~ + window)
    int nodes = 48;        // Gauss-Legendre nodes on the window
    int panels = 0;        // ray panels per leg (0 = adaptive)
    double z_shift = 0.0;  // moves the zeta crossing right
    double w_shift = 0.0;  // moves the omega crossing left
};

// Two wedge rays: zeta (down) right of 0, +-s~, +-r~ and omega (up) left of
// them.  Weights carry d(.)/(2 pi i).
struct RayPair {
    WedgeRay z_ray, w_ray;
    NodeSet z, w;
};
RayPair make_ray_pair(double right_of, double x_min, const TildeOptions& opt);

// Everything in the definition of L on the window [d~, d~ + window].
class TildeContext {
public:
    TildeContext(const ScaledParams& p, const TildeOptions& opt = {});

    const ScaledParams& params() const { return p_; }
    const Grid& grid() const { return g_; }
    const RayPair& rays() const { return rays_; }

    // Pointwise values; X, Y are not restricted to the grid.
    double G(double y, double x) const;
    double R(double y, double x) const;
    double P(double x) const;
    double Q(double x) const;
    double B(double x, double y) const;
    double A11(double x, double y) const;
    double A12(double x, double y) const;
    double A22(double x, double y) const;
    double J(double x) const;
    double g1(double x) const;
    double d2(double x) const;

    // Smooth part of K~ on the grid; K~22 also carries E~.
    KernelBlocks smooth_kernel() const;

    double mu() const;
    double nu() const;
    double c_term() const;
    double linear() const;
    struct Brackets {
        double a = 0, b = 0, d = 0, e = 0;
    };
    Brackets brackets() const;
    std::pair<Eigen::VectorXd, Eigen::VectorXd> v_functions() const;

    double pf0() const { return split_->pf(); }
    double L() const;

    double imag_residue() const { return imag_; }

private:
    Eigen::VectorXd fvec(double y) const;
    Eigen::VectorXd wdot(const Eigen::VectorXd& f) const { return g_.w.cwiseProduct(f); }
    // <f| M (Y) = int f(X) M(X, Y) dX.
    Eigen::VectorXd row(const Eigen::VectorXd& f, const Eigen::MatrixXd& m) const;
    double dot(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;

    ScaledParams p_;
    TildeOptions opt_;
    Grid g_;
    RayPair rays_;
    Eigen::VectorXd fr_, fms_, gms_, rms_, p_v_, q_v_, g1_v_, d2_v_, j_v_;
    Eigen::MatrixXd a11_, a12_, a22_, b_;
    std::optional<SplitPfaffian> split_;
    mutable double imag_ = 0;
};

void validate_scaled_two_param(const ScaledParams& p);

// L(d~) with node and window doubling until successive values agree to tol.
double L_of(const ScaledParams& p, const TildeOptions& opt = {}, double tol = 1e-8);

// dL/dd~ and d^2L/dd~^2 from 5-point stencils (step h and 2h) with one
// Richardson level.
struct Derivatives {
    double value = 0, first = 0, second = 0;
};
Derivatives stencil_derivatives(const std::function<double(double)>& f, double x, double h = 0.05);

// (1/(s~ - r~)) L'' + L'.
double limiting_cdf_two_param(const ScaledParams& p, const TildeOptions& opt = {});

// Xi(d~) for the product model at scaled r~.
class XiContext {
public:
    XiContext(double r_tilde, double d_tilde, const TildeOptions& opt = {});

    const Grid& grid() const { return g_; }
    double r_tilde() const { return rt_; }
    double d_tilde() const { return dt_; }

    // Kernel of the limit: Abar11, Abar12 and the smooth part of Abar22 (the
    // jump -sgn(X - Y) e^{-r~|X - Y|} is added separately).
    double A11(double x, double y) const;
    double A12(double x, double y) const;
    double A22_smooth(double x, double y) const;
    double A22(double x, double y) const;
    // Limits of sigma g1, g2, g3, g4/sigma, e_r/sigma and h/sigma.
    double g1(double x) const;
    double g2(double x) const;
    double g3(double x) const;
    double g4(double x) const;
    double e() const;
    double j(double x) const;
    // The perturbation vectors h2, h~1 on the grid.
    const Eigen::VectorXd& h2() const { return h2_v_; }
    const Eigen::VectorXd& h1() const { return h1_v_; }
    const Eigen::VectorXd& g1_grid() const { return g1_v_; }

    KernelBlocks smooth_kernel() const;
    double pf0() const { return split_->pf(); }
    double xi() const;

    double imag_residue() const { return imag_; }

private:
    double rt_, dt_;
    TildeOptions opt_;
    Grid g_;
    RayPair rays_;
    Eigen::MatrixXd a11_, a12_, a22s_;
    Eigen::VectorXd g1_v_, g2_v_, h1_v_, h2_v_;
    std::optional<SplitPfaffian> split_;
    mutable double imag_ = 0;
};

double xi_of(double r_tilde, double d_tilde, const TildeOptions& opt = {}, double tol = 1e-8);
// dXi/dd~.
double limiting_cdf_product(double r_tilde, double d_tilde, const TildeOptions& opt = {});

}  // namespace lpp
