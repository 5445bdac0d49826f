#include "lpp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lpp/errors.hpp"

namespace lpp {

namespace {

constexpr std::int64_t kNegInf = std::numeric_limits<std::int64_t>::min() / 4;

void require(bool ok, const char* msg) {
    if (!ok) throw InvalidParameters(msg);
}

bool in_unit(double x) { return x >= 0.0 && x < 1.0; }

// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_tail(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0, sign = 1;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16 * std::abs(sum)) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

std::uint64_t Rng::next() { return splitmix64(key_ + splitmix64(counter_++)); }

double Rng::uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

std::int64_t sample_geom(double x, Rng& rng) {
    require(in_unit(x), "geometric parameter must lie in [0, 1)");
    if (x == 0.0) return 0;
    return static_cast<std::int64_t>(std::floor(std::log(rng.uniform()) / std::log(x)));
}

void validate_sampler_params(const ModelParams& p) {
    require(p.sqrt_q > 0.0 && p.sqrt_q < 1.0, "sqrt_q must lie in (0, 1)");
    require(p.N >= 1, "N must be at least 1");
    require(p.r >= 0.0, "r must be nonnegative");
    const double sq = p.sqrt_q;
    switch (p.variant) {
    case Variant::TwoParamStationary:
        require(p.s > sq && p.s < 1.0 / sq, "s must lie in (sqrt_q, 1/sqrt_q)");
        require(in_unit(p.r * p.s) && in_unit(p.r * sq), "need rs < 1 and r sqrt_q < 1");
        break;
    case Variant::TheoremInitial:
        require(p.s > sq && p.s <= 1.0, "s must lie in (sqrt_q, 1]");
        require(p.r * p.s < 1.0, "need rs < 1");
        break;
    case Variant::ProductStationary:
        require(p.r > sq && p.r < 1.0 / sq, "r must lie in (sqrt_q, 1/sqrt_q)");
        break;
    case Variant::ApproxProduct:
        require(in_unit(p.r * p.s) && in_unit(p.r * sq) && in_unit(p.s * sq),
                "need rs, r sqrt_q, s sqrt_q < 1");
        break;
    case Variant::Inhomogeneous: {
        require(p.t.has_value(), "inhomogeneous model needs t");
        const double t = *p.t;
        require(t >= 0.0, "t must be nonnegative");
        require(in_unit(p.r * t) && in_unit(p.s * t) && in_unit(p.r * p.s) &&
                    in_unit(t * sq) && in_unit(p.s * sq) && in_unit(p.r * sq),
                "all geometric parameters of L must lie in [0, 1)");
        break;
    }
    }
}

std::int64_t lpp_value(const std::vector<std::vector<std::int64_t>>& w, int n) {
    // g[i] holds G(i, j) for the current row j.
    std::vector<std::int64_t> g(n + 1, kNegInf);
    for (int j = 1; j <= n; ++j) {
        std::int64_t left = kNegInf;
        for (int i = j; i <= n; ++i) {
            const std::int64_t below = (j == 1) ? kNegInf : g[i];
            std::int64_t prev = std::max(left, below);
            if (i == 1 && j == 1) prev = 0;
            g[i] = w[i][j] + prev;
            left = g[i];
        }
    }
    return g[n];
}

SamplePath sample_stationary_initial(const ModelParams& p, int x_max, Rng& rng) {
    require(p.s > p.sqrt_q && p.r >= 0.0 && p.r * p.s <= 1.0, "need s > sqrt_q and rs <= 1");
    require(x_max >= 0, "x_max must be nonnegative");
    SamplePath path;
    path.values.assign(x_max + 1, 0);
    path.y_infinite = (p.r * p.s == 1.0);
    if (!path.y_infinite) path.y = sample_geom(p.r * p.s, rng);
    // r1[k] = R_1(k); inc2[m] is the m-th increment of the second walk.
    std::vector<std::int64_t> r1(x_max + 1, 0), inc2(x_max + 1, 0);
    for (int k = 1; k <= x_max; ++k) r1[k] = r1[k - 1] + sample_geom(p.sqrt_q / p.s, rng);
    for (int k = 1; k <= x_max; ++k) inc2[k] = sample_geom(p.sqrt_q * p.s, rng);
    std::int64_t r2 = 0;
    for (int x = 1; x <= x_max; ++x) {
        r2 += inc2[x];
        std::int64_t v = r2;
        if (!path.y_infinite) {
            // max over the column k where the path leaves the first walk
            std::int64_t cross = kNegInf, tail = 0;
            for (int k = x; k >= 1; --k) {
                tail += inc2[k];
                cross = std::max(cross, r1[k] + tail);
            }
            v = std::max(v, cross - path.y);
        }
        path.values[x] = v;
    }
    return path;
}

std::int64_t lpp_solve(const std::vector<std::int64_t>& initial, std::int64_t shift,
                       const ModelParams& p, Rng& rng) {
    const int n = p.N;
    if (static_cast<int>(initial.size()) < n) throw InvalidParameters("initial path too short");
    std::vector<std::int64_t> g(n + 1, kNegInf);
    for (int i = 1; i <= n; ++i) g[i] = shift + initial[i - 1];
    const double q = p.sqrt_q * p.sqrt_q;
    for (int j = 2; j <= n; ++j) {
        std::int64_t left = kNegInf;
        for (int i = j; i <= n; ++i) {
            const double x = (i == j) ? p.r * p.sqrt_q : q;
            g[i] = sample_geom(x, rng) + std::max(left, g[i]);
            left = g[i];
        }
    }
    return g[n];
}

namespace {

using WeightFn = double (*)(const ModelParams&, int, int);

std::int64_t sample_with(const ModelParams& p, Rng& rng, WeightFn par) {
    const int n = p.N;
    std::vector<std::int64_t> g(n + 1, kNegInf);
    for (int j = 1; j <= n; ++j) {
        std::int64_t left = kNegInf;
        for (int i = j; i <= n; ++i) {
            std::int64_t prev = std::max(left, g[i]);
            if (i == 1) prev = 0;
            g[i] = sample_geom(par(p, i, j), rng) + prev;
            left = g[i];
        }
    }
    return g[n];
}

double w_two_param(const ModelParams& p, int i, int j) {
    const double sq = p.sqrt_q;
    if (j == 1) return i <= 2 ? 0.0 : sq / p.s;
    if (i == j) return i == 2 ? p.r * p.s : p.r * sq;
    if (j == 2) return sq * p.s;
    return sq * sq;
}

double w_product(const ModelParams& p, int i, int j) {
    const double sq = p.sqrt_q;
    if (i == 1 && j == 1) return 0.0;
    if (i == j) return p.r * sq;
    if (j == 1) return sq / p.r;
    return sq * sq;
}

double w_approx(const ModelParams& p, int i, int j) {
    const double sq = p.sqrt_q;
    if (i == 1 && j == 1) return p.r * p.s;
    if (i == j) return p.r * sq;
    if (j == 1) return p.s * sq;
    return sq * sq;
}

double w_inhom(const ModelParams& p, int i, int j) {
    const double sq = p.sqrt_q, t = *p.t;
    if (i == 1) return p.r * t;
    if (i == 2 && j == 1) return p.s * t;
    if (i == 2 && j == 2) return p.r * p.s;
    if (i == j) return p.r * sq;
    if (j == 1) return t * sq;
    if (j == 2) return p.s * sq;
    return sq * sq;
}

}  // namespace

std::int64_t sample_G_stat_two_param(const ModelParams& p, Rng& rng) {
    return sample_with(p, rng, w_two_param);
}

std::int64_t sample_G_stat_product(const ModelParams& p, Rng& rng) {
    return sample_with(p, rng, w_product);
}

std::int64_t sample_G_approx_product(const ModelParams& p, Rng& rng) {
    return sample_with(p, rng, w_approx);
}

std::int64_t sample_L_inhom(const ModelParams& p, Rng& rng) {
    if (!p.t) throw InvalidParameters("inhomogeneous model needs t");
    return sample_with(p, rng, w_inhom);
}

std::int64_t sample_theorem_initial(const ModelParams& p, Rng& rng) {
    if (p.r * p.s >= 1.0) throw InvalidParameters("theorem initial condition needs rs < 1");
    const SamplePath path = sample_stationary_initial(p, p.N - 1, rng);
    return lpp_solve(path.values, path.y, p, rng);
}

std::int64_t sample_variant(const ModelParams& p, Rng& rng) {
    switch (p.variant) {
    case Variant::TwoParamStationary: return sample_G_stat_two_param(p, rng);
    case Variant::ProductStationary: return sample_G_stat_product(p, rng);
    case Variant::ApproxProduct: return sample_G_approx_product(p, rng);
    case Variant::Inhomogeneous: return sample_L_inhom(p, rng);
    case Variant::TheoremInitial: return sample_theorem_initial(p, rng);
    }
    return 0;
}

std::vector<std::int64_t> draw_samples(const ModelParams& p, long n, std::uint64_t seed) {
    validate_sampler_params(p);
    std::vector<std::int64_t> out(n);
    for (long k = 0; k < n; ++k) {
        Rng rng(seed, static_cast<std::uint64_t>(k));
        out[k] = sample_variant(p, rng);
    }
    return out;
}

McRun empirical_cdf(const ModelParams& p, long n, std::uint64_t seed, int d_min, int d_max) {
    if (n < 1000) throw InvalidParameters("Monte Carlo needs at least 1000 samples");
    if (d_max < d_min) throw InvalidParameters("empty d range");
    const auto xs = draw_samples(p, n, seed);
    std::vector<long> count(d_max - d_min + 1, 0);
    long below = 0;
    for (auto v : xs) {
        if (v < d_min) ++below;
        else if (v <= d_max) ++count[v - d_min];
    }
    McRun run;
    run.seed = seed;
    run.n_samples = n;
    run.observable = "G(N,N)";
    long acc = below;
    for (int d = d_min; d <= d_max; ++d) {
        acc += count[d - d_min];
        const double pr = static_cast<double>(acc) / n;
        run.empirical_cdf[d] = pr;
        run.ci_halfwidth[d] = 3.0 * std::sqrt(pr * (1.0 - pr) / n);
    }
    return run;
}

KsResult ks_two_sample(std::vector<std::int64_t> a, std::vector<std::int64_t> b) {
    if (a.empty() || b.empty()) throw InvalidParameters("KS test needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double dmax = 0;
    while (ia < a.size() && ib < b.size()) {
        const std::int64_t v = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] == v) ++ia;
        while (ib < b.size() && b[ib] == v) ++ib;
        dmax = std::max(dmax, std::abs(ia / na - ib / nb));
    }
    KsResult res;
    res.statistic = dmax;
    // Kolmogorov tail with Stephens' small-sample correction; conservative
    // for discrete data.
    const double en = std::sqrt(na * nb / (na + nb));
    const double lambda = (en + 0.12 + 0.11 / en) * dmax;
    res.p_value = kolmogorov_tail(lambda);
    return res;
}

StationarityReport stationarity_check(const ModelParams& p, const std::vector<int>& m_list,
                                      int x_max, long n, std::uint64_t seed) {
    ModelParams pp = p;
    pp.variant = Variant::TwoParamStationary;
    validate_sampler_params(pp);
    if (m_list.size() < 2 || x_max < 1) throw InvalidParameters("need two M values and x_max >= 1");
    StationarityReport rep;
    rep.m_list = m_list;
    rep.x_max = x_max;
    // incs[m][x-1][sample]
    std::vector<std::vector<std::vector<std::int64_t>>> incs(m_list.size());
    for (std::size_t mi = 0; mi < m_list.size(); ++mi) {
        const int m = m_list[mi];
        if (m < 2) throw InvalidParameters("M must be at least 2");
        const int width = m + x_max;
        incs[mi].assign(x_max, std::vector<std::int64_t>(n));
        for (long k = 0; k < n; ++k) {
            Rng rng(seed + 7919 * (mi + 1), static_cast<std::uint64_t>(k));
            // Rows 1..m on columns up to m + x_max.
            std::vector<std::int64_t> g(width + 1, kNegInf);
            for (int j = 1; j <= m; ++j) {
                std::int64_t left = kNegInf;
                for (int i = j; i <= width; ++i) {
                    std::int64_t prev = std::max(left, g[i]);
                    if (i == 1) prev = 0;
                    g[i] = sample_geom(w_two_param(pp, i, j), rng) + prev;
                    left = g[i];
                }
            }
            for (int x = 1; x <= x_max; ++x) incs[mi][x - 1][k] = g[m + x] - g[m];
        }
    }
    for (std::size_t a = 0; a < m_list.size(); ++a) {
        for (std::size_t b = a + 1; b < m_list.size(); ++b) {
            rep.pairs.emplace_back(m_list[a], m_list[b]);
            std::vector<double> pv;
            for (int x = 0; x < x_max; ++x) {
                const double pval = ks_two_sample(incs[a][x], incs[b][x]).p_value;
                pv.push_back(pval);
                rep.min_p_value = std::min(rep.min_p_value, pval);
            }
            rep.p_values.push_back(pv);
        }
    }
    return rep;
}

Phase classify_phase(double r, double s) {
    require(r > 0.0 && s > 0.0, "r and s must be positive");
    constexpr double eps = 1e-12;
    if (std::abs(r * s - 1.0) < eps) return Phase::Coexistence;
    if (std::abs(s - 1.0) < eps) return Phase::BoundaryS1;
    if (std::abs(r - s) < eps) return Phase::BoundaryRS;
    if (s < 1.0 && r * s < 1.0) return Phase::HighDensity;
    if (r > 1.0 && r * s > 1.0) return Phase::LowDensity;
    return Phase::MaximalCurrent;
}

std::string phase_name(Phase ph) {
    switch (ph) {
    case Phase::HighDensity: return "HighDensity";
    case Phase::LowDensity: return "LowDensity";
    case Phase::MaximalCurrent: return "MaximalCurrent";
    case Phase::BoundaryRS: return "r=s boundary";
    case Phase::Coexistence: return "rs=1 coexistence line";
    case Phase::BoundaryS1: return "s=1 boundary";
    }
    return "";
}

double rho_to_s(double rho, double sqrt_q) {
    require(rho > 0.0, "rho must be positive");
    return (1.0 + rho) * sqrt_q / rho;
}

}  // namespace lpp
