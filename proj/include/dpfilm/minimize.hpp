#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "energy.hpp"
#include "geometry.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace dpfilm {

struct MinimizeConfig {
    int max_iters = 20000;
    double grad_tol = 1e-8;  // sup-norm of the projected gradient density
    bool box = true;         // |phi| <= 1
    bool pin = false;        // phi = 1 on D \ D_rho
    double rho_pin = 0;
    double armijo_c = 1e-4;
    int max_halvings = 60;
    // stop as soon as the energy drops below this value
    double stop_below = -std::numeric_limits<double>::infinity();
};

struct MinimizeResult {
    std::vector<double> x;
    EnergyBreakdown energy;
    int iterations = 0;
    double pg_norm = 0;
    bool converged = false;
    bool below_target = false;
    std::vector<double> history;
    std::string status;
};

// Which cells move, and how the projection treats them.
struct Constraints {
    std::vector<std::uint8_t> free;  // 1: optimized
    std::vector<double> fixed;       // value of non-free cells
    bool box = true;
};

namespace detail {

inline void project(std::vector<double>& x, const Constraints& c)
{
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!c.free[k]) x[k] = c.fixed[k];
        else if (c.box) x[k] = std::clamp(x[k], -1.0, 1.0);
    }
}

inline double projected_grad_norm(const std::vector<double>& x, const std::vector<double>& g,
                                  const Constraints& c, double measure)
{
    double m = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!c.free[k]) continue;
        double gk = g[k];
        if (c.box && ((x[k] >= 1 && gk < 0) || (x[k] <= -1 && gk > 0))) gk = 0;
        m = std::max(m, std::abs(gk));
    }
    return m / measure;
}

}  // namespace detail

// Projected Barzilai-Borwein descent with monotone Armijo backtracking.
// The objective provides eval(x, &g, &gq) and delta(x, gq, xn, d), the
// latter returning E(xn) - E(x) computed from the increment d = xn - x so
// the sufficient-decrease test stays meaningful below the rounding level
// of the total energy. The history is E(x0) plus accumulated deltas.
template <class Obj>
MinimizeResult minimize_projected(std::vector<double> x, const Constraints& c, double measure,
                                  const MinimizeConfig& cfg, Obj& obj)
{
    if (cfg.max_iters < 1 || !(cfg.grad_tol > 0)) throw std::invalid_argument("minimize: bad config");
    MinimizeResult r;
    detail::project(x, c);
    const std::size_t n = x.size();
    std::vector<double> g, gq, gn, gqn, xn(n), d(n);
    EnergyBreakdown e = obj.eval(x, &g, &gq);
    double etrack = e.total;
    r.history.push_back(etrack);
    double pg = detail::projected_grad_norm(x, g, c, measure);
    double gmax = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (c.free[k]) gmax = std::max(gmax, std::abs(g[k]));
    double t = gmax > 0 ? 0.1 / gmax : 1.0;
    int it = 0;
    r.status = "max_iters";
    for (; it < cfg.max_iters; ++it) {
        if (pg <= cfg.grad_tol) break;
        bool ok = false, moved = false;
        double step = t, de = 0;
        for (int hv = 0; hv <= cfg.max_halvings; ++hv) {
            double slope = 0;
            moved = false;
            for (std::size_t k = 0; k < n; ++k) xn[k] = x[k] - step * g[k];
            detail::project(xn, c);
            for (std::size_t k = 0; k < n; ++k) {
                d[k] = xn[k] - x[k];
                slope += g[k] * d[k];
                moved = moved || d[k] != 0;
            }
            if (!moved) break;
            de = obj.delta(x, gq, xn, d);
            if (de <= cfg.armijo_c * slope) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) {
            r.status = moved ? "line_search_failed" : "stalled";
            break;
        }
        e = obj.eval(xn, &gn, &gqn);
        double ss = 0, sy = 0;
        for (std::size_t k = 0; k < n; ++k) {
            double y = gn[k] - g[k];
            ss += d[k] * d[k];
            sy += d[k] * y;
        }
        t = sy > 0 ? std::clamp(ss / sy, 1e-30, 1e30) : step * 4;
        x.swap(xn);
        g.swap(gn);
        gq.swap(gqn);
        etrack += de;
        r.history.push_back(etrack);
        pg = detail::projected_grad_norm(x, g, c, measure);
        if (e.total < cfg.stop_below) {
            ++it;
            r.status = "below_target";
            break;
        }
    }
    r.x = std::move(x);
    r.energy = e;
    r.iterations = it;
    r.pg_norm = pg;
    r.converged = pg <= cfg.grad_tol;
    if (r.converged) r.status = "converged";
    r.below_target = e.total < cfg.stop_below;
    return r;
}

// Reduced / rescaled 2D energy as a minimizer objective.
struct Objective2D {
    const Domain& dom;
    const CutoffField* chi;
    Weights2D w;
    const Field2D* h;
    int p;
    Field2D work;

    Objective2D(const Domain& d, const CutoffField* c, Weights2D w_, const Field2D* h_, int p_)
        : dom(d), chi(c), w(w_), h(h_), p(p_), work(d.grid) {}

    EnergyBreakdown eval(const std::vector<double>& x, std::vector<double>* g, std::vector<double>* gq)
    {
        work.v = x;
        return evaluate_2d(work, dom, chi, w, h, p, g, gq);
    }
    double delta(const std::vector<double>& x, const std::vector<double>& gq, const std::vector<double>& xn,
                 const std::vector<double>& d)
    {
        double lin = 0;
        for (std::size_t k = 0; k < d.size(); ++k) lin += gq[k] * d[k];
        return lin + quadratic_2d(d, dom, chi, w, p) +
               well_delta(x.data(), xn.data(), x.size(), dom.inside, dom.grid.cell_area(), w.well);
    }
};

struct Objective3D {
    const Domain& dom;
    const CutoffField* chi;
    Weights3D w;
    const Field2D* h;
    int p;
    Field3D work;

    Objective3D(const Domain& d, const CutoffField* c, Weights3D w_, const Field2D* h_, int p_,
                const Field3D& shape)
        : dom(d), chi(c), w(w_), h(h_), p(p_), work(shape) {}

    EnergyBreakdown eval(const std::vector<double>& x, std::vector<double>* g, std::vector<double>* gq)
    {
        work.v = x;
        return evaluate_3d(work, dom.inside, chi, w, h, p, g, gq);
    }
    double delta(const std::vector<double>& x, const std::vector<double>& gq, const std::vector<double>& xn,
                 const std::vector<double>& d)
    {
        double lin = 0;
        for (std::size_t k = 0; k < d.size(); ++k) lin += gq[k] * d[k];
        return lin + quadratic_3d(work, d, dom.inside, chi, w, p) +
               well_delta(x.data(), xn.data(), x.size(), dom.inside, dom.grid.cell_area() * work.dz(),
                          w.well);
    }
};

inline Constraints make_constraints(const Domain& dom, const MinimizeConfig& cfg, int nz = 1)
{
    const std::size_t n = dom.grid.size();
    Constraints c;
    c.box = cfg.box;
    c.free.assign(n * nz, 0);
    c.fixed.assign(n * nz, 0.0);
    for (int l = 0; l < nz; ++l)
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t q = std::size_t(l) * n + k;
            if (!dom.inside[k]) continue;
            if (cfg.pin && !(dom.sdf.rho[k] > cfg.rho_pin)) {
                c.fixed[q] = 1.0;
            } else {
                c.free[q] = 1;
            }
        }
    return c;
}

enum class Energy2D { reduced, rescaled };

inline MinimizeResult minimize_reduced(const Field2D& init, const Params& prm, const Domain& dom,
                                       const CutoffField& chi, const MinimizeConfig& cfg, int p = 2,
                                       Energy2D kind = Energy2D::reduced)
{
    require_same_grid(init.grid, dom.grid, "minimize_reduced");
    Weights2D w;
    if (kind == Energy2D::reduced) {
        detail::check_cutoff(chi, dom.grid, prm.delta);
        w = reduced_weights(prm);
    } else {
        w = eps_weights(prm);
        if (w.nonlocal != 0) detail::check_cutoff(chi, dom.grid, eps_cutoff_length(prm));
    }
    const Field2D* h = prm.h ? &*prm.h : nullptr;
    Constraints c = make_constraints(dom, cfg);
    Objective2D obj(dom, &chi, w, h, p);
    return minimize_projected(init.v, c, dom.grid.cell_area(), cfg, obj);
}

enum class Energy3D { plain, rescaled };

// Descent on the layered energy over Omega = omega-cells x (0, delta).
inline MinimizeResult minimize_3d(const Field3D& init, const Params& prm, const Domain& dom,
                                  const CutoffField* chi, const MinimizeConfig& cfg, int p = 2,
                                  Energy3D kind = Energy3D::plain)
{
    require_same_grid(init.grid, dom.grid, "minimize_3d");
    const Field2D* h = prm.h ? &*prm.h : nullptr;
    Weights3D w{1, 1, prm.gamma / 2};
    if (kind == Energy3D::rescaled) {
        const double e2 = prm.eps * prm.eps;
        w = {1, 1 / e2, prm.gamma / (2 * e2)};
    }
    Constraints c = make_constraints(dom, cfg, init.nz);
    Objective3D obj(dom, chi, w, h, p, init);
    return minimize_projected(init.v, c, dom.grid.cell_area() * init.dz(), cfg, obj);
}

// ---- initial conditions ----

enum class InitKind { uniform, stripes, checkerboard, random };

struct InitSpec {
    InitKind kind = InitKind::uniform;
    double value = 1;      // uniform level; random centre
    double period = 1;     // stripes, checkerboard
    double angle = 0;      // stripe normal direction (radians)
    double phase_x = 0;    // stripes: position where cos = 1
    double period_y = 0;   // checkerboard y-period; 0 means `period`
    std::uint64_t seed = 1;
    double amplitude = 0.5;

    std::string name() const
    {
        switch (kind) {
        case InitKind::uniform: return "uniform";
        case InitKind::stripes: return "stripes";
        case InitKind::checkerboard: return "checkerboard";
        case InitKind::random: return "random";
        }
        return "?";
    }
};

// Field on the domain grid; zero outside D, 1 on the pinned collar.
inline Field2D make_init(const InitSpec& s, const Domain& dom, const MinimizeConfig& cfg)
{
    const Grid& g = dom.grid;
    Field2D f(g);
    SplitMix64 rng(s.seed);
    const double two_pi = 2 * std::numbers::pi;
    const double py = s.period_y > 0 ? s.period_y : s.period;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double x = g.x(i), y = g.y(j), v = 0;
            switch (s.kind) {
            case InitKind::uniform: v = s.value; break;
            case InitKind::stripes: {
                double t = (x - s.phase_x) * std::cos(s.angle) + y * std::sin(s.angle);
                v = std::cos(two_pi * t / s.period);
                break;
            }
            case InitKind::checkerboard:
                v = std::cos(two_pi * (x - s.phase_x) / s.period) * std::cos(two_pi * y / py);
                break;
            case InitKind::random: v = s.value + s.amplitude * rng.uniform(-1, 1); break;
            }
            std::size_t k = g.idx(i, j);
            if (!dom.inside[k]) v = 0;
            else if (cfg.pin && !(dom.sdf.rho[k] > cfg.rho_pin)) v = 1;
            else if (cfg.box) v = std::clamp(v, -1.0, 1.0);
            f.v[k] = v;
        }
    return f;
}

// ---- stripe energetics on a periodic cell ----

// E_eps per unit area of a tanh stripe pattern of period L (two interfaces
// per period), on a y-independent periodic cell with spacing <= eps/8.
inline double stripe_energy(double L, double lambda, double eps, double gamma, int nodes_per_eps = 8)
{
    if (!(L > 4 * eps)) throw std::invalid_argument("stripe_energy: need L > 4 eps");
    if (nodes_per_eps < 8)
        throw std::invalid_argument("stripe_energy: interface unresolved, need >= 8 nodes per eps");
    int nx = int(std::ceil(nodes_per_eps * L / eps));
    nx += nx % 2;
    Grid g = Grid::centered(nx, 1, L / nx, L / nx, 0.5 * L, 0);
    g.periodic_x = g.periodic_y = true;
    Domain dom = periodic_cell(g);
    Params prm;
    prm.eps = eps;
    prm.lambda = lambda;
    prm.gamma = lambda > 0 ? gamma : std::max(gamma, 1.0);
    prm.delta = prm.delta_from_lambda();
    Field2D f(g);
    const double s = std::sqrt(2.0) * eps;
    for (int i = 0; i < nx; ++i) {
        double x = g.x(i);
        double d = x < 0.5 * L ? std::min(x, 0.5 * L - x) : -std::min(x - 0.5 * L, L - x);
        f.v[g.idx(i, 0)] = std::tanh(d / s);
    }
    CutoffField chi = unit_cutoff(g);
    return rescaled_energy_Eeps(f, prm, dom, chi, 1).total / (g.lx() * g.ly());
}

struct StripeOptimum {
    double period = 0, energy = 0;
};

// Golden-section search of stripe_energy over L in [lo, hi].
inline StripeOptimum optimal_stripe_period(double lambda, double eps, double gamma, double lo, double hi,
                                           int iters = 40)
{
    const double r = (std::sqrt(5.0) - 1) / 2;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = stripe_energy(c, lambda, eps, gamma), fd = stripe_energy(d, lambda, eps, gamma);
    for (int k = 0; k < iters; ++k) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - r * (b - a);
            fc = stripe_energy(c, lambda, eps, gamma);
        } else {
            a = c; c = d; fc = fd;
            d = a + r * (b - a);
            fd = stripe_energy(d, lambda, eps, gamma);
        }
    }
    return fc < fd ? StripeOptimum{c, fc} : StripeOptimum{d, fd};
}

// ---- lambda sweep ----

struct SweepConfig {
    double eps = 1.0 / 64;
    double gamma = 20;
    double width = 2;          // channel width
    double rho_pin = 0.2;
    int ny = 4;                // cells across the periodic direction
    double cells_per_eps = 4;  // h = eps / cells_per_eps
    int padding = 2;
    std::vector<int> stripe_counts{1, 2, 3};
    double random_amplitude = 1;
    std::uint64_t seed = 1;
    int bisect_steps = 6;
    int jobs = 1;
    // stop once some init beats the uniform state; its energy is then an
    // upper bound for the best state, which is enough for the verdict
    bool early_certify = true;
    MinimizeConfig minimize{};
};

struct SweepPoint {
    double lambda = 0, eps = 0;
    double best_energy = 0, uniform_energy = 0;
    bool modulated = false;
    double interface_length = 0;
    int iterations = 0;
    bool converged = false;
    std::string best_init;
    bool all_converged = false;
    bool certified = false;  // modulated verdict from an early-stopped run
    bool cutoff_under_resolved = false;
};

struct SweepRecord {
    std::vector<SweepPoint> points;  // grid points, then bisection probes
    bool crossing_found = false;
    double lambda_star = 0, bracket_lo = 0, bracket_hi = 0;
};

// Channel |x| < width/2, periodic in y with ny cells, spacing h.
inline Domain channel_domain(double width, int ny, double h)
{
    int nx = int(std::lround(width / h));
    Grid g = Grid::centered(nx, ny, width / nx, width / nx);
    g.periodic_y = true;
    return discretize(DomainSpec::channel(width, g.ly()), g);
}

inline std::vector<InitSpec> sweep_inits(const SweepConfig& sc, const Domain& dom)
{
    const double free_w = 2 * (dom.spec.half_w() - sc.rho_pin);
    const double x_left = dom.spec.cx - dom.spec.half_w() + sc.rho_pin;
    std::vector<InitSpec> v;
    InitSpec u;
    u.kind = InitKind::uniform;
    u.value = 1;
    v.push_back(u);
    for (int m : sc.stripe_counts) {
        InitSpec s;
        s.kind = InitKind::stripes;
        s.period = free_w / m;
        s.phase_x = x_left;
        v.push_back(s);
    }
    InitSpec c;
    c.kind = InitKind::checkerboard;
    c.period = free_w / std::max(1, sc.stripe_counts.empty() ? 1 : sc.stripe_counts.back());
    c.phase_x = x_left;
    c.period_y = dom.grid.ly();
    v.push_back(c);
    InitSpec r;
    r.kind = InitKind::random;
    r.value = 0;
    r.amplitude = sc.random_amplitude;
    r.seed = sc.seed;
    v.push_back(r);
    return v;
}

// Best state over all inits at one lambda.
inline SweepPoint sweep_point(double lambda, const SweepConfig& sc, const Domain& dom)
{
    Params prm = Params::lambda_driven(lambda, sc.eps, sc.gamma);
    CutoffField chi = cutoff_chi(dom.sdf, eps_cutoff_length(prm));
    MinimizeConfig mc = sc.minimize;
    mc.pin = true;
    mc.box = true;
    mc.rho_pin = sc.rho_pin;
    auto inits = sweep_inits(sc, dom);
    std::vector<MinimizeResult> res(inits.size());
    std::vector<uint8_t> ran(inits.size(), 0);
    {
        Field2D f0 = make_init(inits[0], dom, mc);
        res[0] = minimize_reduced(f0, prm, dom, chi, mc, sc.padding, Energy2D::rescaled);
        ran[0] = 1;
    }
    MinimizeConfig mc2 = mc;
    if (sc.early_certify) mc2.stop_below = res[0].energy.total - 1e-10;
    std::atomic<bool> done{false};
    parallel_for(int(inits.size()) - 1, sc.jobs, [&](int j) {
        int i = j + 1;
        if (done.load()) return;
        Field2D f0 = make_init(inits[i], dom, mc2);
        res[i] = minimize_reduced(f0, prm, dom, chi, mc2, sc.padding, Energy2D::rescaled);
        ran[i] = 1;
        if (res[i].below_target) {
            Field2D fb(dom.grid);
            fb.v = res[i].x;
            if (interface_length(fb, dom) > std::max(dom.grid.hx, dom.grid.hy)) done = true;
        }
    });
    SweepPoint pt;
    pt.lambda = lambda;
    pt.eps = sc.eps;
    pt.uniform_energy = res[0].energy.total;
    pt.cutoff_under_resolved = chi.under_resolved;
    std::size_t best = 0;
    pt.all_converged = true;
    for (std::size_t i = 0; i < res.size(); ++i) {
        if (!ran[i]) continue;
        pt.all_converged = pt.all_converged && res[i].converged;
        if (res[i].energy.total < res[best].energy.total) best = i;
    }
    pt.certified = res[best].below_target;
    Field2D fb(dom.grid);
    fb.v = res[best].x;
    pt.best_energy = res[best].energy.total;
    pt.interface_length = interface_length(fb, dom);
    pt.iterations = res[best].iterations;
    pt.converged = res[best].converged;
    pt.best_init = inits[best].name();
    // ties within 1e-10 count as uniform
    double h = std::max(dom.grid.hx, dom.grid.hy);
    pt.modulated = pt.best_energy < pt.uniform_energy - 1e-10 && pt.interface_length > h;
    return pt;
}

inline SweepRecord sweep_lambda(std::vector<double> lambdas, const SweepConfig& sc, const Domain& dom)
{
    if (!std::is_sorted(lambdas.begin(), lambdas.end()))
        throw std::invalid_argument("sweep_lambda: lambda grid must be sorted");
    SweepRecord rec;
    for (double l : lambdas) rec.points.push_back(sweep_point(l, sc, dom));
    for (std::size_t i = 1; i < rec.points.size(); ++i) {
        if (!rec.points[i - 1].modulated && rec.points[i].modulated) {
            double lo = rec.points[i - 1].lambda, hi = rec.points[i].lambda;
            for (int b = 0; b < sc.bisect_steps; ++b) {
                SweepPoint mid = sweep_point(0.5 * (lo + hi), sc, dom);
                rec.points.push_back(mid);
                (mid.modulated ? hi : lo) = mid.lambda;
            }
            rec.crossing_found = true;
            rec.bracket_lo = lo;
            rec.bracket_hi = hi;
            rec.lambda_star = 0.5 * (lo + hi);
            break;
        }
    }
    return rec;
}

// ---- thin-film limit experiment ----

struct GioiaPoint {
    double delta = 0;
    double deviation = 0;  // || |phi_bar| - 1 ||_{L2(D)}
    double energy_per_delta = 0;
    int iterations = 0;
    bool converged = false;
};

struct GioiaConfig {
    double radius = 4;
    double gamma = 1;
    double h = 0.1;
    int nz = 2;
    double init_value = 0.5;
    int padding = 2;
    // unconstrained H^1 minimizers: no box
    MinimizeConfig minimize{.box = false};
};

inline GioiaPoint gioia_point(double delta, const GioiaConfig& gc)
{
    DomainSpec spec = DomainSpec::disc(gc.radius);
    Grid g = Grid::covering(gc.radius + 2 * gc.h, gc.radius + 2 * gc.h, gc.h);
    Domain dom = discretize(spec, g);
    Params prm;
    prm.delta = delta;
    prm.gamma = gc.gamma;
    MinimizeConfig mc = gc.minimize;
    mc.pin = false;
    Field2D f0(g);
    for (std::size_t k = 0; k < f0.v.size(); ++k) f0.v[k] = dom.inside[k] ? gc.init_value : 0.0;
    Field3D s0 = Field3D::replicate(f0, gc.nz, delta);
    MinimizeResult r = minimize_3d(s0, prm, dom, nullptr, mc, gc.padding);
    Field3D s = s0;
    s.v = r.x;
    Field2D bar = z_average(s);
    double dev = 0;
    for (std::size_t k = 0; k < bar.v.size(); ++k)
        if (dom.inside[k]) {
            double d = std::abs(bar.v[k]) - 1;
            dev += d * d;
        }
    GioiaPoint pt;
    pt.delta = delta;
    pt.deviation = std::sqrt(dev * g.cell_area());
    pt.energy_per_delta = r.energy.total / delta;
    pt.iterations = r.iterations;
    pt.converged = r.converged;
    return pt;
}

}  // namespace dpfilm
