#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lpp/model.hpp"
#include "lpp/pfaffian.hpp"
#include "lpp/quadrature.hpp"

namespace lpp {

// H(z) = ((1 - sqrt q / z) / (1 - sqrt q z))^h, S(z) = (1 - s/z)/(1 - s z),
// T likewise with t, F = H S T.
struct Structure {
    cplx H, S, T, F;
};
Structure structure_functions(cplx z, double sqrt_q, int h_exp, double s, double t);

// Real H with exponent h.
double h_real(double x, double sqrt_q, int h_exp);

// E(k, l) = -r^{k-l-1} (k > l), 0 (k = l), r^{l-k-1} (k < l).
double E_kernel(int k, int l, double r);

// Saddle-point scale (c0 N / 2)^{1/3}, c0 = 2 sqrt q (1 + sqrt q)/(1 - sqrt q)^3.
double c0(double sqrt_q);
double fluctuation_scale(int n, double sqrt_q);

struct HatOptions {
    double tol = 1e-11;   // quadrature and truncation target
    int kmax = 0;         // truncation length override (0 = automatic)
    int nodes = 0;        // nodes per circle override (0 = adaptive)
};

struct ScalarTerms {
    double mu = 0, nu = 0, c = 0, linear = 0;
};

struct BracketTerms {
    double a = 0, b = 0, d = 0, e = 0;
};

// All functions of the two-parameter finite-N formula on the index window
// k = d_lo + 1, ..., d_hi + M, shared by every d in [d_lo, d_hi].  H carries the
// exponent N - 2 and f^x(k) = x^{k+1}/H(x).
class HatContext {
public:
    HatContext(const ModelParams& p, int d_lo, int d_hi, const HatOptions& opt = {});

    const ModelParams& params() const { return p_; }
    int k_first() const { return k0_; }
    int k_last() const { return k1_; }
    int nodes_per_circle() const { return static_cast<int>(zn_.size()); }
    const Contour& z_contour() const { return cz_; }
    const Contour& w_contour() const { return cw_; }

    double H(double x) const { return h_real(x, p_.sqrt_q, p_.N - 2); }
    double f_pow(double x, int k) const;

    // Entries at absolute indices (k, l >= k_first()).
    double G(bool inverse_s, int k) const { return (inverse_s ? g1s_ : gs_)(k - k0_); }
    double R(bool inverse_s, int k) const { return (inverse_s ? r1s_ : rs_)(k - k0_); }
    double P(int k) const { return p_hat_(k - k0_); }
    double Q(int k) const { return q_hat_(k - k0_); }
    double A11(int k, int l) const { return a11_(k - k0_, l - k0_); }
    double A12(int k, int l) const { return a12_(k - k0_, l - k0_); }
    double A22(int k, int l) const { return a22_(k - k0_, l - k0_); }
    double B(int k, int l) const { return b_(k - k0_, l - k0_); }
    double g1(int k) const { return g1_(k - k0_); }
    double d2(int k) const { return d2_(k - k0_); }
    Eigen::VectorXd J(int d) const;  // J-hat on k = d+1..k_last()

    // K-hat blocks on k = d+1..k_last().
    KernelBlocks khat(int d) const;

    ScalarTerms scalar_terms(int d) const;
    BracketTerms bracket_terms(int d) const;
    // (V1, V2) on l = d+1..k_last().
    std::pair<Eigen::VectorXd, Eigen::VectorXd> v_functions(int d) const;

    double pf0(int d) const;
    double psi(int d) const;
    // Pf with only the leading m indices kept, for truncation studies.
    double pf0_truncated(int d, int m) const;

    // Largest imaginary part dropped when the complex sums were made real.
    double imag_residue() const { return imag_; }

private:
    Eigen::VectorXd slice(const Eigen::VectorXd& v, int d) const;
    Eigen::MatrixXd slice(const Eigen::MatrixXd& m, int d) const;
    Eigen::VectorXd balance(int d, int m) const;
    Eigen::VectorXd fvec(double x, int d) const;
    Eigen::MatrixXd e_matrix(int d) const;
    double pf_blocks(const KernelBlocks& k, int d) const;

    ModelParams p_;
    int d_lo_, d_hi_, k0_, k1_;
    double tol_;
    Contour cz_, cw_;
    std::vector<cplx> zn_, zw_, wn_, ww_;
    Eigen::MatrixXcd zk_, wk_;  // node-weighted H(z) z^{-(k+2)} and w^{k+1}/H(w)
    Eigen::VectorXd gs_, g1s_, rs_, r1s_, p_hat_, q_hat_, g1_, d2_;
    Eigen::MatrixXd a11_, a12_, a22_, b_;
    double imag_ = 0;
};

// Throws DegenerateParams / InvalidParameters outside the formula's domain.
void validate_two_param_formula(const ModelParams& p);

double psi(const ModelParams& p, int d, const HatOptions& opt = {});

// P(G^stat(N, N) <= d) from psi(., N).
double cdf_stat_diag(const ModelParams& p, int d, const HatOptions& opt = {});
std::vector<double> cdf_stat_diag_table(const ModelParams& p, int d_min, int d_max,
                                        const HatOptions& opt = {});
std::vector<double> psi_table(const ModelParams& p, int d_min, int d_max,
                              const HatOptions& opt = {});

// P(G(N, N) <= d) for the theorem's initial condition: cdf_stat_diag at N + 1.
double cdf_theorem_initial(const ModelParams& p, int d, const HatOptions& opt = {});

// Inhomogeneous model L: P(L_{N,N} <= d) = Pf(J - K) with F = H S T, H exponent
// N - 2.  `h_exp` overrides the exponent (N - 1 with t = sqrt q gives K^geo).
struct InhomOptions {
    double tol = 1e-11;
    int kmax = 0;
    int nodes = 0;
    int h_exp = -1;  // default N - 2
};

class InhomKernel {
public:
    InhomKernel(const ModelParams& p, int d_lo, int d_hi, const InhomOptions& opt = {});
    double k11(int k, int l) const { return k11_(k - k0_, l - k0_); }
    double k12(int k, int l) const { return k12_(k - k0_, l - k0_); }
    double k22(int k, int l) const { return k22_(k - k0_, l - k0_); }
    int k_first() const { return k0_; }
    int k_last() const { return k1_; }
    double pf(int d) const;
    double pf_truncated(int d, int m) const;

private:
    ModelParams p_;
    int k0_, k1_;
    Eigen::MatrixXd k11_, k12_, k22_;
    double lambda_ = 1.0;
};

double cdf_inhom(const ModelParams& p, int d, const InhomOptions& opt = {});
std::vector<double> cdf_inhom_table(const ModelParams& p, int d_min, int d_max,
                                    const InhomOptions& opt = {});

// P(L <= d) at any real t with rt, st, t sqrt q < 1, including t >= 1 where the
// kernel's contours do not exist.  P(L <= d) is a fixed prefactor times a
// polynomial of degree <= d in t; the polynomial is recovered from Pfaffians at
// complex t on a circle inside the kernel's domain.
std::vector<double> cdf_inhom_continued(const ModelParams& p, int d_min, int d_max,
                                        const InhomOptions& opt = {});

// P(L - w11 - w21 <= d) from P(L <= d), P(L <= d-1), P(L <= d-2).
double shift_transform(double cdf_d, double cdf_d1, double cdf_d2, int d, double r, double s,
                       double t);

}  // namespace lpp
