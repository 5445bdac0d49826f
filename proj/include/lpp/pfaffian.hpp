#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <optional>

namespace lpp {

// Pfaffian of a skew-symmetric matrix by the Parlett-Reid LTL^T reduction with
// partial pivoting.  Returns 0 for odd dimension.
double pfaffian(Eigen::MatrixXd a);
std::complex<double> pfaffian(Eigen::MatrixXcd a);

// 2x2 matrix kernel with K21(x, y) = -K12(y, x).
struct SkewKernel2 {
    std::function<double(double, double)> k11, k12, k22;
    bool continuum = false;
};

// Kernel values on a point set; k21 is implied.
struct KernelBlocks {
    Eigen::MatrixXd k11, k12, k22;
};

struct KernelBlocksC {
    Eigen::MatrixXcd k11, k12, k22;
};

// Interleaved matrix of J - K on points with quadrature weights w (all ones in
// the discrete case).  Entry ((i,a),(j,b)) = J_ab delta_ij - sqrt(w_i w_j) K_ab.
// `balance` rescales component 1 by lambda_i and component 2 by 1/lambda_i,
// which leaves both J and the Pfaffian unchanged.
Eigen::MatrixXd assemble_j_minus_k(const KernelBlocks& k, const Eigen::VectorXd& w,
                                   const Eigen::VectorXd* balance = nullptr);

double pf_j_minus_k(const KernelBlocks& k, const Eigen::VectorXd& w,
                    const Eigen::VectorXd* balance = nullptr);
std::complex<double> pf_j_minus_k(const KernelBlocksC& k, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd* balance = nullptr);

// K + |u><v| - |v><u| for vector pairs u = (u1, u2), v = (v1, v2).
KernelBlocks add_rank2(KernelBlocks k, const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                       const Eigen::VectorXd& v1, const Eigen::VectorXd& v2);

using PairFn = std::pair<std::function<double(double)>, std::function<double(double)>>;

// K + beta |(u2, -u1)><v| + beta |v><(-u2, u1)|.
SkewKernel2 perturb_rank2(const SkewKernel2& k, const PairFn& u, const PairFn& v, double beta);

struct PfInfo {
    int size = 0;        // truncation size or node count that was accepted
    double change = 0;   // last self-convergence difference
};

// Pf(J - K) on l^2({d+1, d+2, ...}) with truncation doubling until the change
// falls below tol.
double fredholm_pf_discrete(const SkewKernel2& k, int d, double tol, int m0 = 16,
                            int m_max = 1024, PfInfo* info = nullptr);

// Pf(J - K) on L^2((d, d + length)) by Gauss-Legendre Nystrom with node doubling.
double fredholm_pf_continuum(const SkewKernel2& k, double d, double length, double tol,
                             int n0 = 32, int n_max = 512, PfInfo* info = nullptr);

// Gauss-Legendre grid on [a, b].
struct Grid {
    double a = 0, b = 0;
    Eigen::VectorXd x, w;
};
Grid make_grid(double a, double b, int n);

// Matrix P with (P f)_i ~ \int_a^b E(x_i, u) f(u) du for smooth f sampled on the
// grid, where E(x, u) = -sgn(x - u) e^{rho |x - u|}.  The jump at u = x_i is
// integrated exactly through a polynomial interpolant of f.
Eigen::MatrixXd jump_operator(const Grid& g, double rho, int sub_order = 0);

// Fredholm Pfaffian machinery for K = Ks + [[0, 0], [0, E_rho]] on a grid, with
// Ks smooth.  Pf(J - K)^2 = det(I - J_E^{-1} Ks) with J_E = J - [[0,0],[0,E]],
// so the jump never meets a quadrature rule.  The sign is taken from a direct
// Nystrom evaluation.
class SplitPfaffian {
public:
    SplitPfaffian(const Grid& g, const KernelBlocks& smooth, std::optional<double> rho);

    double pf() const { return pf_; }
    double direct_pf() const { return direct_pf_; }
    // <v, (J - K)^{-1} u> with pointwise J.
    double bilinear(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2, const Eigen::VectorXd& u1,
                    const Eigen::VectorXd& u2) const;
    // Pf(J - K - |u><v| + |v><u|) = Pf(J - K) (1 - <v, (J - K)^{-1} u>).
    double perturbed_pf(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                        const Eigen::VectorXd& v1, const Eigen::VectorXd& v2) const;
    // (E f) on the grid; zero operator when there is no jump part.
    Eigen::VectorXd apply_jump(const Eigen::VectorXd& f) const;
    const Eigen::MatrixXd& jump() const { return ejump_; }

private:
    Grid g_;
    Eigen::MatrixXd ejump_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double pf_ = 0, direct_pf_ = 0;
};

}  // namespace lpp
