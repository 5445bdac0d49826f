// Command-line front end: exact, simulated and limiting CDF tables, method
// comparison, verification suites and phase labels.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpp/asymptotics.hpp"
#include "lpp/errors.hpp"
#include "lpp/finite_dist.hpp"
#include "lpp/model.hpp"
#include "lpp/pfaffian.hpp"
#include "lpp/product_dist.hpp"
#include "lpp/reference_values.hpp"

using namespace lpp;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string variant = "two-param";
    double sqrt_q = 0.5, r = 0.4, s = 0.8;
    std::optional<double> t;
    int n = 5;
    int d_min = 0, d_max = 10;
    double s_tilde = -1.0, r_tilde = 0.2;
    std::string dtilde_grid = "-4:4:1";
    std::optional<double> tol;
    int kmax = 0;
    long mc_samples = 500000;
    int repeats = 1;
    std::uint64_t seed = 1;
    std::string format = "csv";
    std::string out;
};

struct Row {
    double d = 0;
    double cdf = 0, pmf = 0, err = 0;
    std::string method;
    std::optional<double> cdf_mc, ci;
};

class Table {
public:
    explicit Table(bool real_d = false) : real_d_(real_d) {}
    std::vector<Row> rows;

    void fill_pmf() {
        for (std::size_t i = 0; i < rows.size(); ++i)
            rows[i].pmf = rows[i].cdf - (i ? rows[i - 1].cdf : 0.0);
    }

    // Every emitted CDF column must be nondecreasing.
    void check_monotone(double slack) const {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].cdf < rows[i - 1].cdf - slack)
                throw NonConvergence("CDF column decreases at d = " + num(rows[i].d),
                                     rows[i - 1].cdf - rows[i].cdf);
    }

    std::string render(const std::string& format) const {
        const bool extra = !rows.empty() && rows.front().cdf_mc.has_value();
        std::ostringstream os;
        if (format == "json") {
            json arr = json::array();
            for (const auto& r : rows) {
                json o = {{"d", r.d}, {"cdf", r.cdf}, {"pmf", r.pmf}, {"method", r.method},
                          {"err", r.err}};
                if (extra) {
                    o["cdf_mc"] = *r.cdf_mc;
                    o["ci_halfwidth"] = *r.ci;
                }
                arr.push_back(o);
            }
            os << arr.dump(2) << "\n";
            return os.str();
        }
        os << "d,cdf,pmf,method,err" << (extra ? ",cdf_mc,ci_halfwidth" : "") << "\n";
        for (const auto& r : rows) {
            os << (real_d_ ? num(r.d) : std::to_string(static_cast<long>(r.d))) << ","
               << num(r.cdf) << "," << num(r.pmf) << "," << r.method << "," << num(r.err);
            if (extra) os << "," << num(*r.cdf_mc) << "," << num(*r.ci);
            os << "\n";
        }
        return os.str();
    }

    static std::string num(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return buf;
    }

private:
    bool real_d_;
};

void emit(const RunConfig& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out);
    if (!f) throw InvalidParameters("cannot open " + c.out);
    f << text;
}

ModelParams model_params(const RunConfig& c) {
    ModelParams p;
    p.sqrt_q = c.sqrt_q;
    p.r = c.r;
    p.s = c.s;
    p.t = c.t;
    p.N = c.n;
    if (c.variant == "two-param") p.variant = Variant::TwoParamStationary;
    else if (c.variant == "product") p.variant = Variant::ProductStationary;
    else if (c.variant == "inhom") p.variant = Variant::Inhomogeneous;
    else throw InvalidParameters("unknown variant " + c.variant);
    if (c.d_min > c.d_max) throw InvalidParameters("empty d range");
    if (c.tol && !(*c.tol > 0)) throw InvalidParameters("tol must be positive");
    return p;
}

std::vector<double> dtilde_values(const std::string& grid) {
    std::vector<double> v;
    if (grid.find(':') != std::string::npos) {
        double lo, hi, step;
        if (std::sscanf(grid.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || !(step > 0) || hi < lo)
            throw InvalidParameters("dtilde grid must be lo:hi:step");
        for (int i = 0; lo + i * step <= hi + 1e-9 * step; ++i) v.push_back(lo + i * step);
        return v;
    }
    std::stringstream ss(grid);
    for (std::string item; std::getline(ss, item, ',');) v.push_back(std::stod(item));
    if (v.empty()) throw InvalidParameters("empty dtilde grid");
    return v;
}

std::vector<double> exact_cdf(const RunConfig& c, const ModelParams& p, double& err,
                              std::string& method) {
    method = "pfaffian";
    switch (p.variant) {
    case Variant::TwoParamStationary: {
        HatOptions o;
        if (c.tol) o.tol = *c.tol;
        o.kmax = c.kmax;
        err = o.tol;
        return cdf_stat_diag_table(p, c.d_min, c.d_max, o);
    }
    case Variant::ProductStationary: {
        ProductOptions o;
        if (c.tol) o.tol = *c.tol;
        o.kmax = c.kmax;
        err = o.tol;
        return cdf_product_table(p, c.d_min, c.d_max, o);
    }
    default: {
        if (!p.t) throw InvalidParameters("inhom needs --t");
        InhomOptions o;
        if (c.tol) o.tol = *c.tol;
        o.kmax = c.kmax;
        err = o.tol;
        method = "pfaffian-continued";
        return cdf_inhom_continued(p, c.d_min, c.d_max, o);
    }
    }
}

Table cmd_exact(const RunConfig& c) {
    const auto p = model_params(c);
    double err = 0;
    std::string method;
    const auto cdf = exact_cdf(c, p, err, method);
    Table t;
    for (int d = c.d_min; d <= c.d_max; ++d)
        t.rows.push_back({static_cast<double>(d), cdf[d - c.d_min], 0, err, method, {}, {}});
    t.fill_pmf();
    if (c.d_min > 0) t.rows.front().pmf = std::nan("");
    t.check_monotone(1e-9);
    return t;
}

McRun simulate(const RunConfig& c, const ModelParams& p) {
    validate_sampler_params(p);
    if (c.mc_samples < 1 || c.repeats < 1) throw InvalidParameters("need at least one sample");
    return empirical_cdf(p, c.mc_samples * c.repeats, c.seed, c.d_min, c.d_max);
}

Table cmd_simulate(const RunConfig& c) {
    const auto run = simulate(c, model_params(c));
    Table t;
    for (int d = c.d_min; d <= c.d_max; ++d)
        t.rows.push_back({static_cast<double>(d), run.empirical_cdf.at(d), 0,
                          run.ci_halfwidth.at(d), "mc", {}, {}});
    t.fill_pmf();
    if (c.d_min > 0) t.rows.front().pmf = std::nan("");
    return t;
}

Table cmd_limit(const RunConfig& c) {
    Table t(true);
    // Round-off of L (1e-8) amplified by the second-difference stencil.
    const double err = 1e-8 / (0.05 * 0.05);
    for (double dt : dtilde_values(c.dtilde_grid)) {
        double v;
        if (c.variant == "two-param") {
            ScaledParams sp;
            sp.s_tilde = c.s_tilde;
            sp.r_tilde = c.r_tilde;
            sp.d_tilde = dt;
            v = limiting_cdf_two_param(sp);
        } else if (c.variant == "product") {
            v = limiting_cdf_product(c.r_tilde, dt);
        } else {
            throw InvalidParameters("limit supports two-param and product");
        }
        t.rows.push_back({dt, v, 0, err, "limit", {}, {}});
    }
    t.fill_pmf();
    t.rows.front().pmf = std::nan("");
    t.check_monotone(2 * err);
    return t;
}

// Formula and Monte Carlo side by side; exit 1 when they differ by more than 3 sigma.
int cmd_compare(const RunConfig& c) {
    Table t = cmd_exact(c);
    const auto run = simulate(c, model_params(c));
    bool ok = true;
    for (auto& r : t.rows) {
        const int d = static_cast<int>(r.d);
        r.cdf_mc = run.empirical_cdf.at(d);
        r.ci = run.ci_halfwidth.at(d);
        ok = ok && std::abs(*r.cdf_mc - r.cdf) <= *r.ci + r.err;
    }
    emit(c, t.render(c.format));
    if (!ok) std::cerr << "formula and Monte Carlo differ by more than 3 sigma\n";
    return ok ? 0 : 1;
}

class Report {
public:
    void check(const std::string& name, bool pass, const std::string& detail) {
        std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
        std::fflush(stdout);
        items_.push_back({{"check", name}, {"pass", pass}, {"detail", detail}});
        failed_ += !pass;
    }
    int finish(const std::string& suite) const {
        json s = {{"suite", suite},
                  {"checks", items_.size()},
                  {"failed", failed_},
                  {"results", items_}};
        std::printf("%s\n", s.dump().c_str());
        return failed_ ? 1 : 0;
    }

private:
    json items_ = json::array();
    int failed_ = 0;
};

std::string fmt_gap(double v) { return "max gap " + Table::num(v); }

ModelParams base_params(int n) {
    ModelParams p;
    p.N = n;
    p.s = 0.8;
    p.r = 0.4;
    p.sqrt_q = 0.5;
    return p;
}

void suite_base_params(Report& rep) {
    const auto p = base_params(5);
    const auto ps = psi_table(p, 0, 10);
    const auto cdf = cdf_stat_diag_table(p, 0, 10);
    double gp = 0, gc = 0;
    for (int d = 0; d <= 10; ++d) {
        gp = std::max(gp, std::abs(ps[d] - published::kPsiN5[d]));
        gc = std::max(gc, std::abs(cdf[d] - published::kCdfN5[d]));
    }
    rep.check("psi(d, 5) table", gp < 2e-3, fmt_gap(gp));
    rep.check("P(G(5,5) <= d) table", gc < 2e-3, fmt_gap(gc));

    ModelParams f = base_params(3);
    f.s = 0.6;
    f.r = 0.8;
    f.sqrt_q = 0.4;
    const double p0 = cdf_stat_diag(f, 0);
    rep.check("P(G(3,3) = 0) at s=0.6 r=0.8 sqrt q=0.4",
              std::abs(p0 - published::kPointMassN3) < 5e-4,
              Table::num(p0) + " vs " + Table::num(published::kPointMassN3));
}

void suite_closed_forms(Report& rep) {
    ModelParams p1;
    p1.N = 1;
    p1.r = 0.8;
    p1.variant = Variant::ProductStationary;
    double g = 0;
    for (double v : cdf_product_table(p1, 0, 8)) g = std::max(g, std::abs(v - 1.0));
    rep.check("product N=1 is identically 1", g < 1e-10, fmt_gap(g));

    const auto p2 = base_params(2);
    const auto c2 = cdf_stat_diag_table(p2, 0, 10);
    g = 0;
    for (int d = 0; d <= 10; ++d) g = std::max(g, std::abs(c2[d] - (1 - std::pow(0.32, d + 1))));
    rep.check("two-param N=2: 1 - (sr)^{d+1}", g < 1e-8, fmt_gap(g));

    g = 0;
    for (double r : {0.7, 1.0, 1.3}) {
        ModelParams pp = p1;
        pp.N = 2;
        pp.r = r;
        const double a = 0.5 / r, b = 0.5 * r;
        const auto c = cdf_product_table(pp, 0, 10);
        for (int d = 0; d <= 10; ++d) {
            double ex = 0;
            if (std::abs(a - b) < 1e-12) {
                for (int k = 0; k <= d; ++k) ex += (1 - a) * (1 - a) * (k + 1) * std::pow(a, k);
            } else {
                ex = 1 - (std::pow(a, d + 2) * (1 - b) - std::pow(b, d + 2) * (1 - a)) / (a - b);
            }
            g = std::max(g, std::abs(c[d] - ex));
        }
    }
    rep.check("product N=2: geometric convolution", g < 1e-8, fmt_gap(g));

    ModelParams p3 = base_params(3);
    p3.r = 1e-6;
    const auto c3 = cdf_stat_diag_table(p3, 0, 8);
    const double a = 0.8 * 0.5, b = 0.5 / 0.8;
    g = 0;
    for (int d = 0; d <= 8; ++d) {
        const double ex =
            1 - (std::pow(a, d + 2) * (1 - b) - std::pow(b, d + 2) * (1 - a)) / (a - b);
        g = std::max(g, std::abs(c3[d] - ex));
    }
    rep.check("two-param N=3, r -> 0: Geom(s sqrt q) + Geom(sqrt q / s)", g < 1e-4, fmt_gap(g));
}

void suite_properties(Report& rep) {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    double worst = 0;
    for (int n = 2; n <= 40; n += 2) {
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i) {
            a(i, i) = 0;
            for (int j = i + 1; j < n; ++j) {
                a(i, j) = nd(gen);
                a(j, i) = -a(i, j);
            }
        }
        const double pf = pfaffian(a), det = a.determinant();
        worst = std::max(worst, std::abs(pf * pf - det) / std::max(1.0, std::abs(det)));
    }
    rep.check("Pf^2 = det on random skew matrices", worst < 1e-10,
              "max relative gap " + Table::num(worst));

    const auto p = base_params(5);
    HatContext h(p, 3, 3);
    const auto k = h.khat(3);
    const double asym = std::max((k.k11 + k.k11.transpose()).cwiseAbs().maxCoeff(),
                                 (k.k22 + k.k22.transpose()).cwiseAbs().maxCoeff());
    rep.check("two-param kernel antisymmetry", asym < 1e-9, Table::num(asym));

    const auto cdf = cdf_stat_diag_table(p, 0, 20);
    bool mono = true;
    for (int d = 1; d <= 20; ++d) mono = mono && cdf[d] >= cdf[d - 1] - 1e-10;
    rep.check("two-param CDF monotone on d = 0..20", mono, "N = 5");

    ModelParams pp;
    pp.N = 5;
    pp.r = 1.2;
    pp.variant = Variant::ProductStationary;
    const auto cp = cdf_product_table(pp, 0, 14);
    mono = true;
    for (int d = 1; d <= 14; ++d) mono = mono && cp[d] >= cp[d - 1] - 1e-10;
    rep.check("product CDF monotone on d = 0..14", mono, "N = 5, r = 1.2");

    ModelParams sp = base_params(3);
    const auto st = stationarity_check(sp, {3, 6}, 4, 100000, 11);
    rep.check("increment stationarity (KS, 1%)", st.min_p_value > 0.01,
              "min p-value " + Table::num(st.min_p_value));

    ModelParams g;
    g.N = 4;
    g.r = 0.4;
    g.s = 0.9;
    g.variant = Variant::ApproxProduct;
    ModelParams gs = g;
    std::swap(gs.r, gs.s);
    const double pv = ks_two_sample(draw_samples(g, 100000, 42), draw_samples(gs, 100000, 43)).p_value;
    rep.check("r <-> s diagonal-law invariance (KS, 1%)", pv > 0.01, "p-value " + Table::num(pv));
}

void suite_consistency(Report& rep) {
    const int n = 216;
    const double sq = 0.5;
    const auto m = scale_maps(n, sq);
    {
        const double st = -1.0, rt = 0.2;
        ModelParams p;
        p.N = n;
        p.s = m.s_of(st);
        p.r = m.r_of(rt);
        p.sqrt_q = sq;
        double g = 0;
        for (double x : {-2.0, -1.0, 0.0, 1.0, 2.0, 3.0}) {
            const int d = static_cast<int>(std::lround(m.d_of(x)));
            ScaledParams sp;
            sp.s_tilde = st;
            sp.r_tilde = rt;
            sp.d_tilde = m.dt_of(d);
            g = std::max(g, std::abs(cdf_theorem_initial(p, d) - limiting_cdf_two_param(sp)));
        }
        rep.check("two-param limit vs N=216 (tol 0.05)", g < 0.05, fmt_gap(g));
    }
    {
        const double rt = 0.3;
        ModelParams p;
        p.N = n;
        p.r = m.r_of(rt);
        p.sqrt_q = sq;
        p.variant = Variant::ProductStationary;
        double g = 0;
        for (double x : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
            const int d = static_cast<int>(std::lround(m.d_of(x)));
            g = std::max(g, std::abs(cdf_product(p, d) - limiting_cdf_product(rt, m.dt_of(d))));
        }
        rep.check("product limit vs N=216 (tol 0.07)", g < 0.07, fmt_gap(g));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Half-space geometric last passage percolation: exact, simulated and limiting laws"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_config("--config", "", "key = value file; command-line flags take precedence");

    RunConfig c;
    app.add_option("--variant", c.variant, "two-param | product | inhom")
        ->check(CLI::IsMember({"two-param", "product", "inhom"}));
    app.add_option("--sqrt-q", c.sqrt_q, "sqrt q");
    app.add_option("--r", c.r, "boundary parameter r");
    app.add_option("--s", c.s, "boundary parameter s");
    app.add_option("--t", c.t, "inhomogeneous parameter t");
    app.add_option("--N", c.n, "system size");
    app.add_option("--d-min", c.d_min, "first d");
    app.add_option("--d-max", c.d_max, "last d");
    app.add_option("--s-tilde", c.s_tilde, "scaled s for the limit");
    app.add_option("--r-tilde", c.r_tilde, "scaled r for the limit");
    app.add_option("--dtilde-grid", c.dtilde_grid, "lo:hi:step or a comma list");
    app.add_option("--tol", c.tol, "quadrature and truncation target (module default if unset)");
    app.add_option("--kmax", c.kmax, "truncation length override");
    app.add_option("--mc-samples", c.mc_samples, "Monte Carlo samples per repeat");
    app.add_option("--repeats", c.repeats, "Monte Carlo repeats");
    app.add_option("--seed", c.seed, "Monte Carlo seed");
    app.add_option("--format", c.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--out", c.out, "output file (stdout if unset)");

    auto* exact = app.add_subcommand("exact", "finite-N CDF from the Pfaffian formulas");
    auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo CDF");
    auto* limit = app.add_subcommand("limit", "limiting CDF on a d~ grid");
    auto* compare = app.add_subcommand("compare", "formula and Monte Carlo side by side");
    auto* verify = app.add_subcommand("verify", "run a verification suite");
    std::string suite;
    verify->add_option("suite", suite, "appendixE | closed_forms | properties | consistency")
        ->required()
        ->check(CLI::IsMember({"appendixE", "closed_forms", "properties", "consistency"}));
    auto* phase = app.add_subcommand("phase", "phase label of (r, s)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*exact) emit(c, cmd_exact(c).render(c.format));
        else if (*simulate_cmd) emit(c, cmd_simulate(c).render(c.format));
        else if (*limit) emit(c, cmd_limit(c).render(c.format));
        else if (*compare) return cmd_compare(c);
        else if (*phase) std::printf("%s\n", phase_name(classify_phase(c.r, c.s)).c_str());
        else if (*verify) {
            Report rep;
            if (suite == "appendixE") suite_base_params(rep);
            else if (suite == "closed_forms") suite_closed_forms(rep);
            else if (suite == "properties") suite_properties(rep);
            else suite_consistency(rep);
            return rep.finish(suite);
        }
    } catch (const InvalidParameters& e) {
        std::cerr << "invalid parameters: " << e.what() << "\n";
        return 2;
    } catch (const NonConvergence& e) {
        std::cerr << "no convergence: " << e.what() << " (achieved " << e.achieved() << ")\n";
        return 3;
    } catch (const VerificationFailure& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
