#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lpp {

enum class Variant {
    TwoParamStationary,  // G^stat_{r,s}
    ProductStationary,   // G^stat with iid Geom(sqrt q / r) initial increments
    ApproxProduct,       // G_{r,s}: corner Geom(rs), diagonal Geom(r sqrt q), row 1 Geom(s sqrt q)
    Inhomogeneous,       // L with the extra parameter t
    TheoremInitial,      // N rows driven by the initial condition I_{r,s} shifted by Y
};

struct ModelParams {
    double sqrt_q = 0.5;
    double r = 0.4;
    double s = 0.8;
    std::optional<double> t;
    int N = 1;
    Variant variant = Variant::TwoParamStationary;
};

// Throws InvalidParameters when the sampler for p.variant is undefined.
void validate_sampler_params(const ModelParams& p);

// Counter-based generator: the stream for (seed, index) is independent of how
// sample indices are distributed among workers.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream);
    std::uint64_t next();
    // Uniform on the open interval (0, 1).
    double uniform();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Geom(x): P(k) = (1 - x) x^k.  x = 0 gives 0.
std::int64_t sample_geom(double x, Rng& rng);

struct SamplePath {
    std::vector<std::int64_t> values;  // I(0..x_max), I(0) = 0
    std::int64_t y = 0;
    bool y_infinite = false;           // rs = 1
};

// I_{r,s} on 0..x_max.  The walk R_2 enters through its increments after the
// crossing point, which is the law of the second row of G^stat.
SamplePath sample_stationary_initial(const ModelParams& p, int x_max, Rng& rng);

// G(N, N) for rows 2..N with diagonal Geom(r sqrt q) and bulk Geom(q) weights,
// given G(1, 1) = shift and G(1 + x, 1) - G(1, 1) = initial(x).
std::int64_t lpp_solve(const std::vector<std::int64_t>& initial, std::int64_t shift,
                       const ModelParams& p, Rng& rng);

// Last passage value G(N, N) on the triangle j <= i <= N for the weight array
// w[i][j] (1-based; w[i][j] for j <= i).
std::int64_t lpp_value(const std::vector<std::vector<std::int64_t>>& w, int n);

std::int64_t sample_G_stat_two_param(const ModelParams& p, Rng& rng);
std::int64_t sample_G_stat_product(const ModelParams& p, Rng& rng);
std::int64_t sample_G_approx_product(const ModelParams& p, Rng& rng);
std::int64_t sample_L_inhom(const ModelParams& p, Rng& rng);
std::int64_t sample_theorem_initial(const ModelParams& p, Rng& rng);

// Dispatch on p.variant.
std::int64_t sample_variant(const ModelParams& p, Rng& rng);

struct McRun {
    std::uint64_t seed = 0;
    long n_samples = 0;
    std::string observable;
    std::map<int, double> empirical_cdf;
    std::map<int, double> ci_halfwidth;  // 3 sqrt(p (1 - p) / n)
};

std::vector<std::int64_t> draw_samples(const ModelParams& p, long n, std::uint64_t seed);
McRun empirical_cdf(const ModelParams& p, long n, std::uint64_t seed, int d_min, int d_max);

// Two-sample Kolmogorov-Smirnov test on integer data.
struct KsResult {
    double statistic = 0;
    double p_value = 1;
};
KsResult ks_two_sample(std::vector<std::int64_t> a, std::vector<std::int64_t> b);

struct StationarityReport {
    std::vector<int> m_list;
    int x_max = 0;
    // p-values indexed as [pair][increment index x - 1] for pairs (m_a, m_b).
    std::vector<std::pair<int, int>> pairs;
    std::vector<std::vector<double>> p_values;
    double min_p_value = 1;
};

// Increments G(M + x, M) - G(M, M), x = 1..x_max, of the two-parameter
// stationary model compared across M by two-sample KS tests.
StationarityReport stationarity_check(const ModelParams& p, const std::vector<int>& m_list,
                                      int x_max, long n, std::uint64_t seed);

enum class Phase {
    HighDensity,
    LowDensity,
    MaximalCurrent,
    BoundaryRS,     // r = s
    Coexistence,    // rs = 1
    BoundaryS1,     // s = 1
};

Phase classify_phase(double r, double s);
std::string phase_name(Phase ph);

// s = (1 + rho) sqrt q / rho.
double rho_to_s(double rho, double sqrt_q);

}  // namespace lpp
