#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <vector>

namespace lpp {

using cplx = std::complex<double>;

// Quadrature nodes on a contour.  Weights already contain dz/(2 pi i), so
// sum_j w[j] f(z[j]) approximates (2 pi i)^{-1} \oint f(z) dz.
struct NodeSet {
    std::vector<cplx> z;
    std::vector<cplx> w;

    std::size_t size() const { return z.size(); }
    void append(const NodeSet& other, double sign = 1.0);
};

// Positively oriented circle.
struct Circle {
    cplx center;
    double radius;
};

// Circle plus orientation sign; a contour is a signed sum of circles.
struct SignedCircle {
    Circle circle;
    double sign = 1.0;
};

struct Contour {
    std::vector<SignedCircle> parts;
};

enum class RayDir { down, up };

// Wedge contour through a real crossing x.  A down ray comes in from
// e^{i pi/3} infinity and leaves toward e^{-i pi/3} infinity; an up ray comes in
// from e^{-2 pi i/3} infinity and leaves toward e^{2 pi i/3} infinity.
struct WedgeRay {
    double crossing = 0.0;
    RayDir dir = RayDir::down;
    double half_length = 8.0;
};

struct QuadResult {
    cplx value;
    double error = 0.0;
    int nodes = 0;
};

// n-point Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

// Same rule mapped to [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w);

NodeSet circle_nodes(const Circle& c, int n);
NodeSet contour_nodes(const Contour& c, int n_per_circle);

// Ray length T such that |e^{+-zeta^3/3}| < 1e-16 at the ends, enlarged for the
// linear exponent scale |X|.
double ray_half_length(double crossing, double x_scale);

WedgeRay make_ray(double crossing, RayDir dir, double x_scale = 0.0);

// Gauss-Legendre panels on both legs of the ray; panels are graded toward the
// crossing.
NodeSet ray_nodes(const WedgeRay& ray, int panels, int order = 16);

QuadResult contour_integral(const std::function<cplx(cplx)>& f, const Contour& c, double tol,
                            int n0 = 64, int n_max = 1 << 15);
QuadResult circle_integral(const std::function<cplx(cplx)>& f, const Circle& c, double tol,
                           int n0 = 64, int n_max = 1 << 15);
QuadResult ray_integral(const std::function<cplx(cplx)>& f, const WedgeRay& ray, double tol,
                        int p0 = 4, int p_max = 512);

// Iterated integrals (z outer argument, w inner).  The caller chooses
// contours that respect the pole prescription between z and w.
QuadResult double_contour_integral(const std::function<cplx(cplx, cplx)>& f, const Contour& cz,
                                   const Contour& cw, double tol, int n0 = 48,
                                   int n_max = 1 << 11);
QuadResult double_ray_integral(const std::function<cplx(cplx, cplx)>& f, const WedgeRay& rz,
                               const WedgeRay& rw, double tol, int p0 = 4, int p_max = 128);

// Radius for a circle around `center` that must stay clear of `exclusions`.
// With D the distance to the nearest exclusion the radius is D - min(0.6 D, gap),
// so the circle passes at distance min(0.6 D, gap) from the closest point.
double safe_radius(cplx center, const std::vector<cplx>& exclusions, double gap = 1e300);

// Contour around real targets that keeps every exclusion outside.  The
// optional `big` target (a pole of H) gets a circle sized by safe_radius with
// the given gap, so it runs close to the saddle point.  The other targets get
// small circles of radius 0.4 times the distance to the nearest other
// singular point or to `soft`; targets closer to each other than to anything
// else share a circle.  With `cap` every distinct target gets its own circle and
// the radius is at most cap(target).
Contour enclosing_contour(std::optional<double> big, std::vector<double> small,
                          const std::vector<cplx>& exclusions, double gap, double soft = 1.0,
                          const std::function<double(double)>& cap = {});

// Circle with center on the real axis through the real points a < b.
Circle circle_through(double a, double b);

}  // namespace lpp
