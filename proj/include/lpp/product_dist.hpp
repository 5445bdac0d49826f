#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lpp/model.hpp"
#include "lpp/pfaffian.hpp"
#include "lpp/quadrature.hpp"

namespace lpp {

struct ProductOptions {
    double tol = 1e-11;
    int kmax = 0;   // truncation length override (0 = automatic)
    int nodes = 0;  // nodes per circle override (0 = adaptive)
};

enum class Aux { g1, g2, g3, g4, h, phi1, phi2 };

// The product-model functions with H of exponent N - 1 and f^x(k) = x^k / H(x),
// tabulated on k = d_lo + 1, ..., d_hi + M.
class GeoContext {
public:
    GeoContext(const ModelParams& p, int d_lo, int d_hi, const ProductOptions& opt = {});

    const ModelParams& params() const { return p_; }
    int k_first() const { return k0_; }
    int k_last() const { return k1_; }
    int nodes_per_circle() const { return n_; }

    double H(double x) const;
    double f_pow(double x, int k) const;

    double e_r(int d) const;
    // [[K11, K12], [K21, K22]] of the limiting kernel, K21(k, l) = -K12(l, k).
    Eigen::Matrix2d kbar_geo(int k, int l) const;
    // kind 12 or 22.
    double ktilde(int kind, int k, int l) const;
    // g1, g2, g3, g4 take k; h, phi1 and phi2 also depend on d.
    double aux(Aux kind, int d, int k) const;
    Eigen::VectorXd phi1(int d) const;
    Eigen::VectorXd phi2(int d) const;

    KernelBlocks kbar(int d) const;
    double pf_kbar(int d) const;
    double pf_kbar_truncated(int d, int m) const;
    double theta(int d) const;

    double imag_residue() const { return imag_; }

private:
    int idx(int k) const;
    void check_d(int d) const;
    double lam(int i) const;
    // Balanced phi1 (first) or phi2 on k = d+1..k_last().
    Eigen::VectorXd phi(int d, bool first) const;

    ModelParams p_;
    int d_lo_, d_hi_, k0_, k1_, n_ = 0;
    double lambda_ = 1.0;
    Eigen::MatrixXd k11_, k12_, k22_, kt12_, kt22_;
    Eigen::VectorXd g1_, g2_, g3_, g4_, er_;
    // Pieces for the d-dependent sums over l in phi.
    Eigen::MatrixXcd zq_c12_, zr_c22_;
    std::vector<cplx> wq_, wq_w_;
    double imag_ = 0;
};

// The r = 1 branch is used for |r - 1| < 1e-8.
double h_product(double r, double sqrt_q, int n_big, int d, int k);

double theta(const ModelParams& p, int d, const ProductOptions& opt = {});
std::vector<double> theta_table(const ModelParams& p, int d_min, int d_max,
                                const ProductOptions& opt = {});

// P(G_r^stat(N, N) <= d) = theta(d) - theta(d - 1).
double cdf_product(const ModelParams& p, int d, const ProductOptions& opt = {});
std::vector<double> cdf_product_table(const ModelParams& p, int d_min, int d_max,
                                      const ProductOptions& opt = {});

}  // namespace lpp
