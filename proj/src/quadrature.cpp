#include "lpp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "lpp/errors.hpp"

namespace lpp {

namespace {

const cplx kI(0.0, 1.0);
constexpr double kPi = std::numbers::pi;

struct Rule {
    std::vector<double> x, w;
};

const Rule& cached_rule(int n) {
    static std::mutex mu;
    static std::map<int, Rule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    // Newton on P_n starting from the Chebyshev-like guess.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.x[i] = -x;
        r.x[n - 1 - i] = x;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return cache.emplace(n, std::move(r)).first->second;
}

}  // namespace

void NodeSet::append(const NodeSet& other, double sign) {
    z.insert(z.end(), other.z.begin(), other.z.end());
    for (const auto& wi : other.w) w.push_back(sign * wi);
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    if (n < 1) throw InvalidParameters("gauss_legendre: n must be positive");
    const Rule& r = cached_rule(n);
    x = r.x;
    w = r.w;
}

void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
    gauss_legendre(n, x, w);
    double h = 0.5 * (b - a), c = 0.5 * (b + a);
    for (int i = 0; i < n; ++i) {
        x[i] = c + h * x[i];
        w[i] *= h;
    }
}

NodeSet circle_nodes(const Circle& c, int n) {
    if (!(c.radius > 0.0)) throw InvalidParameters("circle radius must be positive");
    NodeSet s;
    s.z.resize(n);
    s.w.resize(n);
    // z = c + R e^{i t}, dz/(2 pi i) = R e^{i t} dt / (2 pi)
    for (int j = 0; j < n; ++j) {
        cplx e = std::polar(1.0, 2.0 * kPi * (j + 0.5) / n);
        s.z[j] = c.center + c.radius * e;
        s.w[j] = c.radius * e / double(n);
    }
    return s;
}

NodeSet contour_nodes(const Contour& c, int n_per_circle) {
    NodeSet s;
    for (const auto& p : c.parts) s.append(circle_nodes(p.circle, n_per_circle), p.sign);
    return s;
}

double ray_half_length(double crossing, double x_scale) {
    // e^{-T^3/3} < 1e-16 needs T > (3 ln 1e16)^{1/3}; the linear term e^{|X| T}
    // pushes the decay out by roughly sqrt(|X|).
    double t0 = std::cbrt(3.0 * 36.9);
    return std::max(6.0, t0 + std::sqrt(std::abs(x_scale)) + 0.5 * std::abs(crossing) + 1.0);
}

WedgeRay make_ray(double crossing, RayDir dir, double x_scale) {
    WedgeRay r;
    r.crossing = crossing;
    r.dir = dir;
    r.half_length = ray_half_length(crossing, x_scale);
    // Leading cubic term at the far end must be negligible.
    double T = r.half_length;
    cplx e = dir == RayDir::down ? std::polar(1.0, kPi / 3) : std::polar(1.0, 2 * kPi / 3);
    cplx z = crossing + T * e;
    double lead = dir == RayDir::down ? std::real(z * z * z) / 3.0 : -std::real(z * z * z) / 3.0;
    if (lead > -36.0) throw InvalidParameters("make_ray: ray too short for cubic decay");
    return r;
}

NodeSet ray_nodes(const WedgeRay& ray, int panels, int order) {
    const Rule& rule = cached_rule(order);
    cplx in_dir, out_dir;
    if (ray.dir == RayDir::down) {
        in_dir = std::polar(1.0, kPi / 3);
        out_dir = std::polar(1.0, -kPi / 3);
    } else {
        in_dir = std::polar(1.0, -2 * kPi / 3);
        out_dir = std::polar(1.0, 2 * kPi / 3);
    }
    NodeSet s;
    s.z.reserve(2 * panels * order);
    s.w.reserve(2 * panels * order);
    const double T = ray.half_length;
    const cplx norm = 1.0 / (2.0 * kPi * kI);
    for (int p = 0; p < panels; ++p) {
        double a = T * std::pow(double(p) / panels, 2.0);
        double b = T * std::pow(double(p + 1) / panels, 2.0);
        double h = 0.5 * (b - a), c = 0.5 * (a + b);
        for (int i = 0; i < order; ++i) {
            double t = c + h * rule.x[i];
            double wt = h * rule.w[i];
            // Incoming leg traversed from infinity to the crossing.
            s.z.push_back(ray.crossing + t * in_dir);
            s.w.push_back(-in_dir * wt * norm);
            s.z.push_back(ray.crossing + t * out_dir);
            s.w.push_back(out_dir * wt * norm);
        }
    }
    return s;
}

namespace {

cplx sum_nodes(const std::function<cplx(cplx)>& f, const NodeSet& s) {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) acc += s.w[j] * f(s.z[j]);
    return acc;
}

cplx sum_nodes2(const std::function<cplx(cplx, cplx)>& f, const NodeSet& sz, const NodeSet& sw) {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < sz.size(); ++i) {
        cplx inner = 0.0;
        for (std::size_t j = 0; j < sw.size(); ++j) inner += sw.w[j] * f(sz.z[i], sw.z[j]);
        acc += sz.w[i] * inner;
    }
    return acc;
}

bool close_enough(cplx a, cplx b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace

QuadResult contour_integral(const std::function<cplx(cplx)>& f, const Contour& c, double tol,
                            int n0, int n_max) {
    cplx prev = sum_nodes(f, contour_nodes(c, n0));
    for (int n = 2 * n0; n <= n_max; n *= 2) {
        cplx cur = sum_nodes(f, contour_nodes(c, n));
        if (close_enough(cur, prev, tol))
            return {cur, std::abs(cur - prev), int(n * c.parts.size())};
        prev = cur;
    }
    throw QuadratureNotConverged("contour_integral did not converge", std::abs(prev));
}

QuadResult circle_integral(const std::function<cplx(cplx)>& f, const Circle& c, double tol,
                           int n0, int n_max) {
    Contour k;
    k.parts.push_back({c, 1.0});
    return contour_integral(f, k, tol, n0, n_max);
}

QuadResult ray_integral(const std::function<cplx(cplx)>& f, const WedgeRay& ray, double tol, int p0,
                        int p_max) {
    cplx prev = sum_nodes(f, ray_nodes(ray, p0));
    for (int p = 2 * p0; p <= p_max; p *= 2) {
        cplx cur = sum_nodes(f, ray_nodes(ray, p));
        if (close_enough(cur, prev, tol)) return {cur, std::abs(cur - prev), 2 * p * 16};
        prev = cur;
    }
    throw QuadratureNotConverged("ray_integral did not converge", std::abs(prev));
}

QuadResult double_contour_integral(const std::function<cplx(cplx, cplx)>& f, const Contour& cz,
                                   const Contour& cw, double tol, int n0, int n_max) {
    cplx prev = sum_nodes2(f, contour_nodes(cz, n0), contour_nodes(cw, n0));
    for (int n = 2 * n0; n <= n_max; n *= 2) {
        cplx cur = sum_nodes2(f, contour_nodes(cz, n), contour_nodes(cw, n));
        if (close_enough(cur, prev, tol)) return {cur, std::abs(cur - prev), n * n};
        prev = cur;
    }
    throw QuadratureNotConverged("double_contour_integral did not converge", std::abs(prev));
}

QuadResult double_ray_integral(const std::function<cplx(cplx, cplx)>& f, const WedgeRay& rz,
                               const WedgeRay& rw, double tol, int p0, int p_max) {
    cplx prev = sum_nodes2(f, ray_nodes(rz, p0), ray_nodes(rw, p0));
    for (int p = 2 * p0; p <= p_max; p *= 2) {
        cplx cur = sum_nodes2(f, ray_nodes(rz, p), ray_nodes(rw, p));
        if (close_enough(cur, prev, tol)) return {cur, std::abs(cur - prev), 4 * p * p * 256};
        prev = cur;
    }
    throw QuadratureNotConverged("double_ray_integral did not converge", std::abs(prev));
}

double safe_radius(cplx center, const std::vector<cplx>& exclusions, double gap) {
    double D = 1e300;
    for (const auto& e : exclusions) D = std::min(D, std::abs(center - e));
    if (!(D < 1e299)) throw InvalidParameters("safe_radius: no exclusion to bound the radius");
    if (D <= 0.0) throw InvalidParameters("safe_radius: center coincides with an exclusion");
    return D - std::min(0.6 * D, gap);
}

Circle circle_through(double a, double b) {
    if (!(b > a)) throw InvalidParameters("circle_through: need a < b");
    return {cplx(0.5 * (a + b), 0.0), 0.5 * (b - a)};
}

}  // namespace lpp

namespace lpp {

Contour enclosing_contour(std::optional<double> big, std::vector<double> small,
                          const std::vector<cplx>& exclusions, double gap, double soft,
                          const std::function<double(double)>& cap) {
    std::sort(small.begin(), small.end());
    small.erase(std::unique(small.begin(), small.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                small.end());
    auto dist_to = [&](double x, const std::vector<cplx>& pts) {
        double dd = 1e300;
        for (const auto& e : pts) dd = std::min(dd, std::abs(cplx(x, 0.0) - e));
        return dd;
    };
    std::vector<cplx> others = exclusions;
    if (big) others.emplace_back(*big, 0.0);

    // Close targets share one circle.
    std::vector<std::pair<double, double>> clusters;
    for (double x : small) {
        if (!clusters.empty()) {
            auto& c = clusters.back();
            const double sep = x - c.second;
            if (!cap && sep < 0.5 * std::min(dist_to(c.second, others), dist_to(x, others))) {
                c.second = x;
                continue;
            }
        }
        clusters.emplace_back(x, x);
    }

    Contour out;
    std::vector<cplx> guards = exclusions;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const auto [lo, hi] = clusters[i];
        const double c = 0.5 * (lo + hi), sigma = 0.5 * (hi - lo);
        std::vector<cplx> pts = others;
        for (std::size_t j = 0; j < clusters.size(); ++j) {
            if (j == i) continue;
            pts.emplace_back(clusters[j].first, 0.0);
            pts.emplace_back(clusters[j].second, 0.0);
        }
        if (soft < lo - 1e-9 || soft > hi + 1e-9) pts.emplace_back(soft, 0.0);
        const double D = dist_to(c, pts);
        if (!(D > sigma)) throw InvalidParameters("enclosing_contour: target cluster touches a pole");
        double rad = sigma + 0.4 * (D - sigma);
        if (cap) rad = std::min(rad, cap(c));
        out.parts.push_back({{cplx(c, 0.0), rad}, 1.0});
        guards.emplace_back(c - rad, 0.0);
        guards.emplace_back(c + rad, 0.0);
    }
    if (big) out.parts.push_back({{cplx(*big, 0.0), safe_radius(cplx(*big, 0.0), guards, gap)}, 1.0});
    return out;
}

}  // namespace lpp
