#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "energy.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace dpfilm {

struct CheckCase {
    std::string family;
    std::uint64_t seed = 0;
    int nx = 0, ny = 0, nz = 1;
    double delta = 0, gamma = 0;
    double lhs = 0, rhs = 0, ratio = 0;
    std::vector<std::pair<std::string, double>> extra;

    double get(const std::string& k) const
    {
        for (auto& [n, v] : extra)
            if (n == k) return v;
        throw std::out_of_range("CheckCase: no column " + k);
    }
};

struct CheckReport {
    std::string name;
    double tol = 1e-3;
    std::vector<CheckCase> cases;
    double worst = 0;
    bool pass = true;
    std::vector<std::string> notes;

    // worst ratio and pass flag from the cases
    void finalize()
    {
        worst = 0;
        for (auto& c : cases) worst = std::max(worst, c.ratio);
        pass = worst <= 1 + tol;
    }
};

// a / b for a <= b style inequalities; 0/0 counts as satisfied
inline double safe_ratio(double a, double b)
{
    if (b > 0) return a / b;
    if (a <= 0) return 0;
    return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------- oracles

namespace detail {

// F with d^2/dx^2 d^2/dy^2 F = 1/sqrt(x^2+y^2+z^2)
inline long double newell_f(long double x, long double y, long double z)
{
    const long double x2 = x * x, y2 = y * y, z2 = z * z;
    const long double r = std::sqrt(x2 + y2 + z2);
    long double f = -r * (x2 + y2 - 2 * z2) / 6;
    if (x2 + z2 > 0) f += 0.5L * y * (x2 - z2) * std::asinh(y / std::sqrt(x2 + z2));
    if (y2 + z2 > 0) f += 0.5L * x * (y2 - z2) * std::asinh(x / std::sqrt(y2 + z2));
    if (z != 0 && r > 0) f -= x * y * z * std::atan(x * y / (z * r));
    return f;
}

}  // namespace detail

// iint 1/|r - r'| over two hx x hy panels offset by (X, Y) in plane and Z
// across. Inputs in units of hx, hy (the result is scaled back).
inline double panel_pair(double X, double Y, double Z, double hx, double hy)
{
    static const int w[3] = {1, -2, 1};
    // homogeneous of degree 3: work in units of hx
    const long double s = hx;
    const long double ax = X / s, ay = Y / s, az = Z / s, bx = 1, by = hy / s;
    long double acc = 0;
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
            acc += w[p] * w[q] * detail::newell_f(ax + (p - 1) * bx, ay + (q - 1) * by, az);
    return double(acc * s * s * s);
}

// (1/4pi) iint rho rho' / |r - r'| over the layer-interface charge sheets
// of the stack, each sheet piecewise constant on the cells.
inline double brute_force_dipolar(const Field3D& st)
{
    const Grid& g = st.grid;
    if (g.size() > 32 * 32 || st.nz > 4)
        throw std::invalid_argument("brute_force_dipolar: limited to 32^2 cells x 4 layers");
    if (g.periodic_x || g.periodic_y) throw std::invalid_argument("brute_force_dipolar: free space only");
    require_finite(st.v, "brute_force_dipolar");
    const int nx = g.nx, ny = g.ny, nz = st.nz, ns = nz + 1;
    const std::size_t n = g.size();
    const double a = st.dz();
    std::vector<double> sig(std::size_t(ns) * n, 0.0);
    for (int j = 0; j < ns; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            double up = j < nz ? st.v[std::size_t(j) * n + k] : 0.0;
            double dn = j > 0 ? st.v[std::size_t(j - 1) * n + k] : 0.0;
            sig[std::size_t(j) * n + k] = up - dn;
        }
    const int tx = 2 * nx - 1, ty = 2 * ny - 1;
    std::vector<double> tab(std::size_t(ns) * tx * ty);
    for (int dz = 0; dz < ns; ++dz)
        for (int dj = -(ny - 1); dj < ny; ++dj)
            for (int di = -(nx - 1); di < nx; ++di)
                tab[(std::size_t(dz) * ty + (dj + ny - 1)) * tx + (di + nx - 1)] =
                    panel_pair(di * g.hx, dj * g.hy, dz * a, g.hx, g.hy);
    double e = 0;
    for (int j = 0; j < ns; ++j)
        for (int jp = 0; jp < ns; ++jp) {
            const double* s1 = sig.data() + std::size_t(j) * n;
            const double* s2 = sig.data() + std::size_t(jp) * n;
            const double* t = tab.data() + std::size_t(std::abs(j - jp)) * tx * ty;
            for (int y1 = 0; y1 < ny; ++y1)
                for (int x1 = 0; x1 < nx; ++x1) {
                    double q = s1[g.idx(x1, y1)];
                    if (q == 0) continue;
                    double acc = 0;
                    for (int y2 = 0; y2 < ny; ++y2) {
                        const double* row = t + std::size_t(y1 - y2 + ny - 1) * tx + (x1 + nx - 1);
                        const double* s2r = s2 + std::size_t(y2) * nx;
                        for (int x2 = 0; x2 < nx; ++x2) acc += s2r[x2] * row[-x2];
                    }
                    e += q * acc;
                }
        }
    return e / (4 * std::numbers::pi);
}

// Epstein zeta of Z^2 at s = 1/2, sum' |n|^{-1} continued: 4 zeta(1/2) beta(1/2)
inline constexpr double epstein_z2_half = 4 * -1.4603545088095868 * 0.6676914571896092;

namespace detail {

// int_{R^2 \ box} |x - y|^{-3} dy for x inside the box
inline double box_complement_kernel(double x, double y, double xl, double xr, double yl, double yr)
{
    auto edge = [](double d, double b1, double b2) {
        return (b1 / std::hypot(d, b1) + b2 / std::hypot(d, b2)) / d;
    };
    return edge(x - xl, y - yl, yr - y) + edge(xr - x, y - yl, yr - y) + edge(y - yl, x - xl, xr - x) +
           edge(yr - y, x - xl, xr - x);
}

}  // namespace detail

// (1/4pi) iint (u(r)-u(r'))^2/|r-r'|^3 in real space: lattice double sum
// over the box, closed-form far field of the box complement and the
// Z^2 lattice correction for the excluded self cell.
inline double brute_force_h12(const Field2D& u)
{
    const Grid& g = u.grid;
    if (g.nx > 64 || g.ny > 64) throw std::invalid_argument("brute_force_h12: limited to 64^2");
    if (g.periodic_x || g.periodic_y) throw std::invalid_argument("brute_force_h12: free space only");
    if (std::abs(g.hx - g.hy) > 1e-12 * g.hx) throw std::invalid_argument("brute_force_h12: needs square cells");
    require_finite(u.v, "brute_force_h12");
    const int nx = g.nx, ny = g.ny;
    const double h = g.hx;
    const int tx = 2 * nx - 1;
    std::vector<double> inv3(std::size_t(tx) * (2 * ny - 1), 0.0);
    for (int dj = -(ny - 1); dj < ny; ++dj)
        for (int di = -(nx - 1); di < nx; ++di) {
            if (di == 0 && dj == 0) continue;
            double r = std::hypot(double(di), double(dj));
            inv3[std::size_t(dj + ny - 1) * tx + (di + nx - 1)] = 1 / (r * r * r);
        }
    auto at = [&](int i, int j) { return (i < 0 || j < 0 || i >= nx || j >= ny) ? 0.0 : u.v[g.idx(i, j)]; };
    const double xl = g.x0, xr = g.x0 + g.lx(), yl = g.y0, yr = g.y0 + g.ly();
    double pair = 0, local = 0, far = 0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double ui = u.v[g.idx(i, j)];
            double acc = 0;
            for (int j2 = 0; j2 < ny; ++j2) {
                const double* row = inv3.data() + std::size_t(j - j2 + ny - 1) * tx + (i + nx - 1);
                const double* ur = u.v.data() + std::size_t(j2) * nx;
                for (int i2 = 0; i2 < nx; ++i2) {
                    double d = ui - ur[i2];
                    acc += d * d * row[-i2];
                }
            }
            pair += acc;
            double gx = (at(i + 1, j) - at(i - 1, j)) / (2 * h);
            double gy = (at(i, j + 1) - at(i, j - 1)) / (2 * h);
            local += 0.5 * (gx * gx + gy * gy);
            far += ui * ui * detail::box_complement_kernel(g.x(i), g.y(j), xl, xr, yl, yr);
        }
    // lattice sums carry h^4 / (h |n|)^3 = h / |n|^3
    double total = h * pair - h * h * h * epstein_z2_half * local + 2 * h * h * far;
    return total / (4 * std::numbers::pi);
}

// ---------------------------------------------------------- test families

enum class Family {
    zero, uniform, single_mode, tanh_stripes, mollified_indicator, band_limited, rough, interior_bump, smooth_bumps
};

inline const char* family_name(Family f)
{
    switch (f) {
    case Family::zero: return "zero";
    case Family::uniform: return "uniform";
    case Family::single_mode: return "single_mode";
    case Family::tanh_stripes: return "tanh_stripes";
    case Family::mollified_indicator: return "mollified_indicator";
    case Family::band_limited: return "band_limited";
    case Family::rough: return "rough";
    case Family::interior_bump: return "interior_bump";
    case Family::smooth_bumps: return "smooth_bumps";
    }
    return "?";
}

inline Family family_from_name(const std::string& s)
{
    for (Family f : {Family::zero, Family::uniform, Family::single_mode, Family::tanh_stripes,
                     Family::mollified_indicator, Family::band_limited, Family::rough, Family::interior_bump,
                     Family::smooth_bumps})
        if (s == family_name(f)) return f;
    throw std::invalid_argument("unknown field family: " + s);
}

inline std::vector<Family> standard_families()
{
    return {Family::uniform, Family::single_mode, Family::tanh_stripes, Family::mollified_indicator,
            Family::band_limited, Family::rough};
}

// C^2 step, 0 for t <= -1 and 1 for t >= 1
inline double smooth_step(double t)
{
    if (t <= -1) return 0;
    if (t >= 1) return 1;
    return 0.5 + t * (15 - 10 * t * t + 3 * t * t * t * t) / 16;
}

// Field from family f on g; `scale` sets the feature length, `rho` (if
// given) is the distance to the boundary used by interior_bump. Values lie
// in [-1, 1].
inline Field2D family_field(Family f, const Grid& g, std::uint64_t seed, double scale,
                            const std::vector<double>* rho = nullptr)
{
    SplitMix64 rng(seed);
    Field2D out(g);
    const double cx = g.x0 + 0.5 * g.lx(), cy = g.y0 + 0.5 * g.ly();
    const double tau = 2 * std::numbers::pi;
    switch (f) {
    case Family::zero:
        break;
    case Family::uniform:
        for (double& v : out.v) v = 1;
        break;
    case Family::single_mode: {
        double th = tau * rng.uniform(), k = tau / (scale * rng.uniform(0.5, 1.5)), ph = tau * rng.uniform();
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                out.v[g.idx(i, j)] = std::cos(k * (std::cos(th) * g.x(i) + std::sin(th) * g.y(j)) + ph);
        break;
    }
    case Family::tanh_stripes: {
        double th = tau * rng.uniform(), per = scale * rng.uniform(1.0, 2.0), ph = tau * rng.uniform();
        double sharp = rng.uniform(2.0, 6.0);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double s = std::cos(th) * g.x(i) + std::sin(th) * g.y(j);
                out.v[g.idx(i, j)] = std::tanh(sharp * std::sin(tau * s / per + ph));
            }
        break;
    }
    case Family::mollified_indicator: {
        double r0 = scale * rng.uniform(0.5, 1.0), w = scale * rng.uniform(0.1, 0.3);
        double ox = cx + 0.2 * scale * rng.uniform(-1, 1), oy = cy + 0.2 * scale * rng.uniform(-1, 1);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                out.v[g.idx(i, j)] = smooth_step((r0 - std::hypot(g.x(i) - ox, g.y(j) - oy)) / w);
        break;
    }
    case Family::band_limited: {
        const int modes = 12;
        for (int m = 0; m < modes; ++m) {
            double th = tau * rng.uniform(), k = tau / scale * rng.uniform(0.2, 1.0), ph = tau * rng.uniform();
            double amp = rng.normal();
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    out.v[g.idx(i, j)] += amp * std::cos(k * (std::cos(th) * g.x(i) + std::sin(th) * g.y(j)) + ph);
        }
        double mx = linf(out.v);
        if (mx > 0)
            for (double& v : out.v) v /= mx;
        break;
    }
    case Family::rough:
        for (double& v : out.v) v = rng.uniform(-1, 1);
        break;
    case Family::smooth_bumps: {
        // three Gaussians of width ~scale near the centre, scaled to max 1
        for (int m = 0; m < 3; ++m) {
            double w = scale * rng.uniform(0.8, 1.2), amp = rng.normal();
            double ox = cx + 0.15 * g.lx() * rng.uniform(-1, 1), oy = cy + 0.15 * g.ly() * rng.uniform(-1, 1);
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    double r2 = std::pow(g.x(i) - ox, 2) + std::pow(g.y(j) - oy, 2);
                    out.v[g.idx(i, j)] += amp * std::exp(-0.5 * r2 / (w * w));
                }
        }
        double mx = linf(out.v);
        if (mx > 0)
            for (double& v : out.v) v /= mx;
        break;
    }
    case Family::interior_bump: {
        if (!rho) throw std::invalid_argument("interior_bump needs a distance field");
        // bump living where rho > scale
        for (std::size_t k = 0; k < out.v.size(); ++k) {
            double t = (*rho)[k] / scale;
            out.v[k] = t > 1 ? smooth_step(2 * (t - 1) - 1) : 0.0;
        }
        break;
    }
    }
    return out;
}

// Stack of nz layers: z-independent copies of a family field, optionally
// plus a cos(pi z/delta) modulation drawn from another seed.
inline Field3D family_stack(Family f, const Grid& g, int nz, double delta, std::uint64_t seed, double scale,
                            bool z_dependent, const std::vector<double>* rho = nullptr)
{
    Field2D base = family_field(f, g, seed, scale, rho);
    Field3D st = Field3D::replicate(base, nz, delta);
    if (z_dependent && f != Family::zero) {
        Field2D mod = family_field(Family::band_limited, g, seed ^ 0x5bd1e995ull, scale, rho);
        for (int l = 0; l < nz; ++l) {
            double c = 0.5 * std::cos(std::numbers::pi * (l + 0.5) / nz);
            for (std::size_t k = 0; k < g.size(); ++k) st.v[std::size_t(l) * g.size() + k] += c * mod.v[k];
        }
    }
    return st;
}

namespace detail {

inline CheckCase make_case(Family f, std::uint64_t seed, const Grid& g, int nz, double delta, double gamma)
{
    CheckCase c;
    c.family = family_name(f);
    c.seed = seed;
    c.nx = g.nx;
    c.ny = g.ny;
    c.nz = nz;
    c.delta = delta;
    c.gamma = gamma;
    return c;
}

inline std::uint64_t case_seed(std::uint64_t base, int i)
{
    SplitMix64 r(base + 0x9E3779B97F4A7C15ull * std::uint64_t(i + 1));
    return r.next();
}

// disc of radius R on an n x n grid with a margin of 10% around it
inline Domain disc_domain(double R, int n)
{
    double half = 1.1 * R;
    Grid g = Grid::centered(n, n, 2 * half / n, 2 * half / n);
    return discretize(DomainSpec::disc(R), g);
}

inline void mask_stack(Field3D& st, const Mask2D& in)
{
    const std::size_t n = st.grid.size();
    for (std::size_t q = 0; q < st.v.size(); ++q)
        if (!in[q % n]) st.v[q] = 0;
}

inline void apply_cutoff(Field3D& st, const CutoffField& chi)
{
    const std::size_t n = st.grid.size();
    for (std::size_t q = 0; q < st.v.size(); ++q) st.v[q] *= chi.chi[q % n];
}

// int over Omega of |grad psi|^2: in-plane with the spectral symbol,
// across layers from interior differences
inline double stack_dirichlet(const Field3D& st, int p)
{
    double s = spectral_dirichlet_inplane(st, p);
    const std::size_t n = st.grid.size();
    const double A = st.grid.cell_area(), a = st.dz();
    for (int l = 0; l + 1 < st.nz; ++l)
        for (std::size_t k = 0; k < n; ++k) {
            double d = st.v[std::size_t(l + 1) * n + k] - st.v[std::size_t(l) * n + k];
            s += A / a * d * d;
        }
    return s;
}

inline double stack_l2sq(const Field3D& st, const Mask2D* m = nullptr)
{
    const std::size_t n = st.grid.size();
    double s = 0;
    for (std::size_t q = 0; q < st.v.size(); ++q)
        if (!m || (*m)[q % n]) s += st.v[q] * st.v[q];
    return s * st.grid.cell_area() * st.dz();
}

}  // namespace detail

// ---------------------------------------------------------------- checks

struct DedConfig {
    std::vector<Family> families = standard_families();
    std::vector<int> resolutions{16, 24, 32};
    int cases = 100;
    int nz = 3;
    double delta = 0.2;
    double radius = 1;
    bool z_independent = false;
    int padding = 2;
    double tol = 1e-6;
    std::uint64_t seed = 1;
    int jobs = 1;
};

// |E_d(psi) - int psi^2 + (delta^2/2) H(psi_bar)| <= (delta^2/2) int |grad psi|^2,
// psi = chi_delta phi
inline CheckReport check_ded(const DedConfig& cfg)
{
    CheckReport rep;
    rep.name = cfg.z_independent ? "ded_z_independent" : "ded";
    rep.tol = cfg.tol;
    rep.cases.resize(cfg.cases);
    parallel_for(cfg.cases, cfg.jobs, [&](int i) {
        Family f = cfg.families[i % cfg.families.size()];
        int n = cfg.resolutions[(i / cfg.families.size()) % cfg.resolutions.size()];
        std::uint64_t seed = detail::case_seed(cfg.seed, i);
        Domain dom = detail::disc_domain(cfg.radius, n);
        CutoffField chi = cutoff_chi(dom.sdf, cfg.delta);
        Field3D st = family_stack(f, dom.grid, cfg.nz, cfg.delta, seed, 0.5 * cfg.radius, !cfg.z_independent);
        detail::mask_stack(st, dom.inside);
        detail::apply_cutoff(st, chi);
        DipolarParts d = dipolar_decomposition(st, cfg.padding);
        CheckCase c = detail::make_case(f, seed, dom.grid, cfg.nz, cfg.delta, 0);
        c.lhs = std::abs(d.remainder);
        c.rhs = 0.5 * cfg.delta * cfg.delta * detail::stack_dirichlet(st, cfg.padding);
        c.ratio = safe_ratio(c.lhs, c.rhs);
        c.extra = {{"remainder", d.remainder}, {"E_d", d.total}};
        rep.cases[i] = c;
    });
    rep.finalize();
    return rep;
}

struct EdgeConfig {
    std::vector<Family> families{Family::uniform, Family::interior_bump, Family::single_mode,
                                 Family::tanh_stripes, Family::band_limited, Family::rough, Family::zero};
    std::vector<int> resolutions{64, 96};
    int cases = 14;
    int nz = 2;
    double delta = 0.05;
    double radius = 1;
    int padding = 2;
    double tol = 1e-3;
    std::uint64_t seed = 2;
    int jobs = 1;
};

// |E_d(phi) - E_d(chi phi)| against 3 |phi|_{L2(Omega)} |phi|_{L2(Omega \ Omega_2delta)}
// and 98 |dD| delta^2 |phi|_inf^2
inline CheckReport check_edge(const EdgeConfig& cfg)
{
    CheckReport rep;
    rep.name = "edge";
    rep.tol = cfg.tol;
    rep.cases.resize(cfg.cases);
    parallel_for(cfg.cases, cfg.jobs, [&](int i) {
        Family f = cfg.families[i % cfg.families.size()];
        int n = cfg.resolutions[(i / cfg.families.size()) % cfg.resolutions.size()];
        std::uint64_t seed = detail::case_seed(cfg.seed, i);
        Domain dom = detail::disc_domain(cfg.radius, n);
        if (2 * cfg.delta < 2 * dom.grid.hx) throw std::invalid_argument("check_edge: delta under-resolved");
        CutoffField chi = cutoff_chi(dom.sdf, cfg.delta);
        // the interior bump sits in D_{2 delta}, where chi = 1
        Field3D st = f == Family::interior_bump
                         ? family_stack(f, dom.grid, cfg.nz, cfg.delta, seed, 2 * cfg.delta, false, &dom.sdf.rho)
                         : family_stack(f, dom.grid, cfg.nz, cfg.delta, seed, 0.5 * cfg.radius, true, &dom.sdf.rho);
        detail::mask_stack(st, dom.inside);
        Field3D cs = st;
        detail::apply_cutoff(cs, chi);
        double e1 = dipolar_energy(st, cfg.padding), e2 = dipolar_energy(cs, cfg.padding);
        Mask2D edge(dom.grid.size());
        for (std::size_t k = 0; k < edge.size(); ++k) edge[k] = dom.inside[k] && dom.sdf.rho[k] <= 2 * cfg.delta;
        double l2 = std::sqrt(detail::stack_l2sq(st)), l2e = std::sqrt(detail::stack_l2sq(st, &edge));
        double inf = linf(st.v);
        CheckCase c = detail::make_case(f, seed, dom.grid, cfg.nz, cfg.delta, 0);
        c.lhs = std::abs(e1 - e2);
        double rough = 3 * l2 * l2e;
        double refined = 98 * dom.meas.perimeter * cfg.delta * cfg.delta * inf * inf;
        double r1 = safe_ratio(c.lhs, rough), r2 = safe_ratio(c.lhs, refined);
        c.rhs = std::min(rough, refined);
        c.ratio = std::max(r1, r2);
        // the refined constant as measured: LHS / (|dD| delta^2 |phi|_inf^2)
        double emp = safe_ratio(c.lhs, dom.meas.perimeter * cfg.delta * cfg.delta * inf * inf);
        c.extra = {{"ratio_rough", r1}, {"ratio_refined", r2}, {"empirical_constant", emp}};
        rep.cases[i] = c;
    });
    rep.finalize();
    return rep;
}

struct PositivityConfig {
    std::vector<Family> families = standard_families();
    std::vector<int> resolutions{16, 32, 48};
    int cases = 100;
    int max_nz = 4;
    double tol = 1e-10;
    int padding = 2;
    std::uint64_t seed = 3;
    int jobs = 1;
};

// 0 <= E_d <= int phi^2
inline CheckReport check_positivity(const PositivityConfig& cfg)
{
    CheckReport rep;
    rep.name = "positivity";
    rep.tol = cfg.tol;
    rep.cases.resize(cfg.cases);
    parallel_for(cfg.cases, cfg.jobs, [&](int i) {
        Family f = cfg.families[i % cfg.families.size()];
        int n = cfg.resolutions[(i / cfg.families.size()) % cfg.resolutions.size()];
        std::uint64_t seed = detail::case_seed(cfg.seed, i);
        SplitMix64 rng(seed);
        int nz = 1 + int(rng.next() % std::uint64_t(cfg.max_nz));
        double delta = rng.uniform(0.05, 1.0);
        Domain dom = detail::disc_domain(1.0, n);
        Field3D st = family_stack(f, dom.grid, nz, delta, seed, 0.5, true);
        detail::mask_stack(st, dom.inside);
        double ed = dipolar_energy(st, cfg.padding), sq = detail::stack_l2sq(st);
        CheckCase c = detail::make_case(f, seed, dom.grid, nz, delta, 0);
        c.lhs = ed;
        c.rhs = sq;
        c.ratio = safe_ratio(ed, sq);
        // a negative energy shows up as a ratio above 1 + tol
        if (ed < -cfg.tol * sq) c.ratio = std::max(c.ratio, 1 + 2 * cfg.tol);
        c.extra = {{"lower_margin", safe_ratio(ed, sq)}};
        rep.cases[i] = c;
    });
    rep.finalize();
    return rep;
}

// ---- interpolation ----

struct FBound {
    double max_abs = 0;
    double s_at = 0, t_at = 0;
    double corner = 0;  // F(-1, 1)
};

// F(s, t) = (s - t)^2 / (s - s^3/3 - t + t^3/3) on an n x n lattice of [-1, 1]^2
inline double interp_F(double s, double t) { return 3 * (s - t) / (3 - t * t - t * s - s * s); }

inline FBound check_F_bound(int n = 2001)
{
    if (n < 2) throw std::invalid_argument("check_F_bound: need n >= 2");
    FBound b;
    for (int i = 0; i < n; ++i) {
        double s = -1 + 2.0 * i / (n - 1);
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double t = -1 + 2.0 * j / (n - 1);
            double v = std::abs(interp_F(s, t));
            if (v > b.max_abs) {
                b.max_abs = v;
                b.s_at = s;
                b.t_at = t;
            }
        }
    }
    b.corner = interp_F(-1, 1);
    return b;
}

inline std::vector<double> log_grid(double lo, double hi, int n)
{
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) r[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1));
    return r;
}

struct InterpConfig {
    std::vector<Family> families{Family::zero, Family::tanh_stripes, Family::mollified_indicator,
                                 Family::single_mode, Family::band_limited};
    std::vector<int> resolutions{64, 128, 256};
    int cases = 15;
    double R = 4;
    double r_min = 0.01, r_max = 1;
    int r_points = 20;
    bool pinned = false;  // phi_bar = 1 outside D (disc of radius R/2)
    bool brute = false;   // LHS by the real-space oracle (grids <= 64^2)
    int padding = 2;
    double tol = 1e-3;
    std::uint64_t seed = 4;
    int jobs = 1;
};

// worst over r of LHS / [(3/pi) ln(R/r) |grad(phi - phi^3/3)|_1 + r |grad phi|_2^2 + c pi R],
// c = 1 (supp phi in B_R) or 4 (phi = 1 outside D)
inline CheckReport check_interp(const InterpConfig& cfg)
{
    CheckReport rep;
    rep.name = cfg.pinned ? "interp2" : "interp";
    rep.tol = cfg.tol;
    rep.cases.resize(cfg.cases);
    const auto rs = log_grid(cfg.r_min, cfg.r_max, cfg.r_points);
    parallel_for(cfg.cases, cfg.jobs, [&](int i) {
        Family f = cfg.families[i % cfg.families.size()];
        int n = cfg.resolutions[(i / cfg.families.size()) % cfg.resolutions.size()];
        std::uint64_t seed = detail::case_seed(cfg.seed, i);
        // box [-R, R]^2; the field lives in B_R (or in D = B_{R/2} when pinned)
        Grid g = Grid::centered(n, n, 2 * cfg.R / n, 2 * cfg.R / n);
        const double rsupp = cfg.pinned ? 0.5 * cfg.R : cfg.R;
        Field2D phi = family_field(f, g, seed, 0.25 * cfg.R);
        // window to the support disc, keeps |phi| <= 1
        for (int j = 0; j < g.ny; ++j)
            for (int ii = 0; ii < g.nx; ++ii) {
                double w = smooth_step((0.9 * rsupp - std::hypot(g.x(ii), g.y(j))) / (0.1 * rsupp));
                double& v = phi.v[g.idx(ii, j)];
                v = cfg.pinned ? 1 - w * (1 - v) : w * v;
            }
        if (linf(phi.v) > 1 + 1e-12) throw std::invalid_argument("check_interp: |phi| > 1");
        const double outside = cfg.pinned ? 1.0 : 0.0;
        Field2D u = phi;
        if (cfg.pinned)
            for (double& v : u.v) v -= 1;
        double lhs = cfg.brute ? brute_force_h12(u) : h12(u, cfg.padding);
        Field2D psi = phi;
        for (double& v : psi.v) v = v - v * v * v / 3;
        double tv = grad_l1_box(psi.v, g, outside - outside * outside * outside / 3);
        double dir = dirichlet_box(phi.v, g, outside);
        double c0 = (cfg.pinned ? 4 : 1) * std::numbers::pi * cfg.R;
        CheckCase c = detail::make_case(f, seed, g, 1, 0, 0);
        c.lhs = lhs;
        c.ratio = 0;
        for (double r : rs) {
            double rhs = 3 / std::numbers::pi * std::log(cfg.R / r) * tv + r * dir + c0;
            double q = safe_ratio(lhs, rhs);
            if (q >= c.ratio) {
                c.ratio = q;
                c.rhs = rhs;
            }
        }
        c.extra = {{"grad_psi_l1", tv}, {"dirichlet", dir}};
        rep.cases[i] = c;
    });
    rep.finalize();
    return rep;
}

// ln(1/r) growth of H(phi_bar - 1) for phi_bar = 1 - 2 m_r, m_r the indicator
// of a disc mollified at scale r. The sharp constant is (3/pi) |grad psi|_1.
struct SharpnessReport {
    std::vector<double> r, lhs, tv;
    double slope = 0;
    double sharp_constant = 0;    // (3/pi) |grad(phi - phi^3/3)|_1, averaged over r
    double perimeter_form = 0;    // (3/pi) * perimeter of the disc
    double perimeter = 0;
};

inline SharpnessReport interp_sharpness(double disc_radius = 1, std::vector<double> rs = {0.32, 0.16, 0.08, 0.04},
                                        int n = 768, int padding = 2)
{
    SharpnessReport rep;
    double half = 1.5 * disc_radius;
    Grid g = Grid::centered(n, n, 2 * half / n, 2 * half / n);
    for (double r : rs) {
        if (disc_radius + r >= half) throw std::invalid_argument("interp_sharpness: mollification too wide");
        Field2D u(g), phi(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double m = smooth_step((disc_radius - std::hypot(g.x(i), g.y(j))) / r);
                phi.v[g.idx(i, j)] = 1 - 2 * m;
                u.v[g.idx(i, j)] = -2 * m;
            }
        for (double& v : phi.v) v = v - v * v * v / 3;
        rep.r.push_back(r);
        rep.lhs.push_back(h12(u, padding));
        rep.tv.push_back(grad_l1_box(phi.v, g, 2.0 / 3));
    }
    // least-squares slope of lhs against ln(1/r)
    double mx = 0, my = 0;
    const double m = double(rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
        mx += std::log(1 / rs[i]) / m;
        my += rep.lhs[i] / m;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        double dx = std::log(1 / rs[i]) - mx;
        sxy += dx * (rep.lhs[i] - my);
        sxx += dx * dx;
    }
    rep.slope = sxy / sxx;
    double tv = 0;
    for (double t : rep.tv) tv += t / m;
    rep.sharp_constant = 3 / std::numbers::pi * tv;
    rep.perimeter = 2 * std::numbers::pi * disc_radius;
    rep.perimeter_form = 3 / std::numbers::pi * rep.perimeter;
    return rep;
}

// ---- sandwich ----

struct SandwichConfig {
    std::vector<Family> families{Family::uniform, Family::tanh_stripes};
    std::vector<double> gammas{0.5, 1, 2};
    std::vector<double> deltas{0.2, 0.1, 0.05};
    double radius = 1;
    double h = 0.0125;
    int padding = 2;
    bool extend = false;  // reflect phi_bar across dD before building the stack
    double tol = 1e-3;
    std::uint64_t seed = 5;
    int jobs = 1;
};

namespace detail {

// |grad u|^2_{H^1(mask)} = int |grad u|^2 + |D^2 u|^2 by differences of the
// values inside D (neighbours outside D are skipped)
inline double grad_h1_sq(const Field2D& u, const Mask2D& in, const Mask2D& where)
{
    const Grid& g = u.grid;
    auto ok = [&](int i, int j) { return i >= 0 && j >= 0 && i < g.nx && j < g.ny && in[g.idx(i, j)]; };
    auto v = [&](int i, int j) { return u.v[g.idx(i, j)]; };
    double s = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (!where[g.idx(i, j)] || !in[g.idx(i, j)]) continue;
            double gx = 0, gy = 0, xx = 0, yy = 0, xy = 0;
            if (ok(i + 1, j) && ok(i - 1, j)) {
                gx = (v(i + 1, j) - v(i - 1, j)) / (2 * g.hx);
                xx = (v(i + 1, j) - 2 * v(i, j) + v(i - 1, j)) / (g.hx * g.hx);
            } else if (ok(i + 1, j)) {
                gx = (v(i + 1, j) - v(i, j)) / g.hx;
            } else if (ok(i - 1, j)) {
                gx = (v(i, j) - v(i - 1, j)) / g.hx;
            }
            if (ok(i, j + 1) && ok(i, j - 1)) {
                gy = (v(i, j + 1) - v(i, j - 1)) / (2 * g.hy);
                yy = (v(i, j + 1) - 2 * v(i, j) + v(i, j - 1)) / (g.hy * g.hy);
            } else if (ok(i, j + 1)) {
                gy = (v(i, j + 1) - v(i, j)) / g.hy;
            } else if (ok(i, j - 1)) {
                gy = (v(i, j) - v(i, j - 1)) / g.hy;
            }
            if (ok(i + 1, j + 1) && ok(i - 1, j - 1) && ok(i + 1, j - 1) && ok(i - 1, j + 1))
                xy = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4 * g.hx * g.hy);
            s += (gx * gx + gy * gy + xx * xx + yy * yy + 2 * xy * xy) * g.cell_area();
        }
    return s;
}

}  // namespace detail

// Per (family, gamma, delta): d_low = (E delta - calE)/(gamma delta^2 |phi|^2_inf |dD|),
// d_up = (calE - E delta/(1 - 2 alpha delta^2)) /
//        (delta^2 (1+gamma^2)(1+|phi|^4_inf)|dD| + delta |grad phi|^2_{H1(D\D_delta)}),
// and beta = max(d_low, d_up, 0). Passes when beta is non-increasing along
// each delta sequence (up to tol).
inline CheckReport check_sandwich(const SandwichConfig& cfg)
{
    CheckReport rep;
    rep.name = "sandwich";
    rep.tol = cfg.tol;
    const int nf = int(cfg.families.size()), ng = int(cfg.gammas.size()), nd = int(cfg.deltas.size());
    rep.cases.resize(std::size_t(nf) * ng * nd);
    double half = cfg.radius + 2 * cfg.h;
    Grid g = Grid::covering(half, half, cfg.h);
    Domain dom = discretize(DomainSpec::disc(cfg.radius), g);
    parallel_for(int(rep.cases.size()), cfg.jobs, [&](int idx) {
        int fi = idx / (ng * nd), gi = (idx / nd) % ng, di = idx % nd;
        Family f = cfg.families[fi];
        double gamma = cfg.gammas[gi], delta = cfg.deltas[di];
        std::uint64_t seed = detail::case_seed(cfg.seed, fi);
        Field2D bar = family_field(f, g, seed, 0.5 * cfg.radius);
        for (std::size_t k = 0; k < bar.v.size(); ++k)
            if (!dom.inside[k]) bar.v[k] = 0;
        Params prm;
        prm.delta = delta;
        prm.gamma = gamma;
        const double alpha = prm.alpha_value();
        CutoffField chi = cutoff_chi(dom.sdf, delta);
        double E = reduced_energy(bar, prm, dom, chi, cfg.padding).total;
        Mask2D omega = dom.inside;
        Field2D ext = bar;
        if (cfg.extend) {
            ext = extend_reflect(bar, dom.sdf, delta);
            for (std::size_t k = 0; k < omega.size(); ++k) omega[k] = dom.sdf.rho[k] > -delta;
        }
        Field3D st = Field3D::replicate(ext, 1, delta);
        detail::mask_stack(st, omega);
        double calE = full_energy_3d(st, prm, omega, nullptr, cfg.padding).total;
        double inf = linf(bar.v, &dom.inside);
        double P = dom.meas.perimeter;
        Mask2D collar(g.size());
        for (std::size_t k = 0; k < collar.size(); ++k) collar[k] = dom.inside[k] && dom.sdf.rho[k] <= delta;
        double h1 = detail::grad_h1_sq(bar, dom.inside, collar);
        double d_low = (E * delta - calE) / (gamma * delta * delta * inf * inf * P);
        double den_up = delta * delta * (1 + gamma * gamma) * (1 + std::pow(inf, 4)) * P + delta * h1;
        double d_up = (calE - E * delta / (1 - 2 * alpha * delta * delta)) / den_up;
        CheckCase c = detail::make_case(f, seed, g, 1, delta, gamma);
        c.lhs = calE;
        c.rhs = E * delta;
        double beta = std::max({d_low, d_up, 0.0});
        c.extra = {{"d_low", d_low}, {"d_up", d_up}, {"beta", beta}, {"E", E}, {"calE", calE}};
        rep.cases[idx] = c;
    });
    // trend: ratio = beta(delta_next) - beta(delta_prev) + 1, so pass <=> non-increasing up to tol
    rep.worst = 0;
    for (int fi = 0; fi < nf; ++fi)
        for (int gi = 0; gi < ng; ++gi)
            for (int di = 0; di < nd; ++di) {
                CheckCase& c = rep.cases[(std::size_t(fi) * ng + gi) * nd + di];
                double b = c.get("beta");
                c.ratio = 0;
                if (di > 0) {
                    double prev = rep.cases[(std::size_t(fi) * ng + gi) * nd + di - 1].get("beta");
                    c.ratio = 1 + (b - prev);
                }
            }
    rep.finalize();
    return rep;
}

// ---- coercivity ----

struct CoercivityConfig {
    std::vector<Family> families{Family::zero, Family::uniform, Family::single_mode, Family::tanh_stripes,
                                 Family::band_limited, Family::rough};
    std::vector<int> resolutions{48, 64, 96};
    int cases = 100;
    double radius = 1;
    double gamma = 1;
    double delta = 0.05;
    int padding = 2;
    double tol = 1e-3;
    std::uint64_t seed = 6;
    int jobs = 1;
};

// E(phi) >= |grad|^2/8 - (1 + g^2 d^2/4)|phi|_2^2/2 + |phi|_4^4/4 + |D|/4
//           - g |dD|^{1/4} d^{1/4} |phi|_2 |phi|_4,
// as (bound positives + E negatives) / (E positives + bound negatives) <= 1
inline CheckReport check_coercivity(const CoercivityConfig& cfg)
{
    CheckReport rep;
    rep.name = "coercivity";
    rep.tol = cfg.tol;
    rep.cases.resize(cfg.cases);
    parallel_for(cfg.cases, cfg.jobs, [&](int i) {
        Family f = cfg.families[i % cfg.families.size()];
        int n = cfg.resolutions[(i / cfg.families.size()) % cfg.resolutions.size()];
        std::uint64_t seed = detail::case_seed(cfg.seed, i);
        Domain dom = detail::disc_domain(cfg.radius, n);
        Params prm;
        prm.delta = cfg.delta;
        prm.gamma = cfg.gamma;
        if (prm.alpha_value() * cfg.delta * cfg.delta > 0.5)
            throw std::invalid_argument("check_coercivity: needs alpha delta^2 <= 1/2");
        CutoffField chi = cutoff_chi(dom.sdf, cfg.delta);
        SplitMix64 rng(seed);
        double amp = rng.uniform(0.2, 2.0);
        Field2D phi = family_field(f, dom.grid, seed, 0.5 * cfg.radius);
        for (std::size_t k = 0; k < phi.v.size(); ++k) phi.v[k] = dom.inside[k] ? amp * phi.v[k] : 0.0;
        EnergyBreakdown e = reduced_energy(phi, prm, dom, chi, cfg.padding);
        const Grid& g = dom.grid;
        double grad2 = 2 * e.dirichlet / reduced_weights(prm).grad;
        double l2 = std::sqrt(lp_pow(phi, &dom.inside, 2)), l4 = std::pow(lp_pow(phi, &dom.inside, 4), 0.25);
        double area = double(dom.count()) * g.cell_area();
        double P = dom.meas.perimeter, gm = cfg.gamma, d = cfg.delta;
        double b_pos = grad2 / 8 + std::pow(l4, 4) / 4 + area / 4;
        double b_neg = 0.5 * (1 + gm * gm * d * d / 4) * l2 * l2 + gm * std::pow(P, 0.25) * std::pow(d, 0.25) * l2 * l4;
        double e_pos = e.dirichlet + e.double_well, e_neg = -e.nonlocal;
        CheckCase c = detail::make_case(f, seed, g, 1, d, gm);
        c.lhs = b_pos - b_neg;
        c.rhs = e.total;
        c.ratio = safe_ratio(b_pos + e_neg, e_pos + b_neg);
        c.extra = {{"amplitude", amp}};
        rep.cases[i] = c;
    });
    rep.finalize();
    return rep;
}

}  // namespace dpfilm
