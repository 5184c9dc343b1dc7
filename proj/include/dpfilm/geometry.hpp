#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"

namespace dpfilm {

enum class Shape { disc, rectangle, annulus, mask, channel };

struct MaskBitmap {
    int nx = 0, ny = 0;
    double spacing = 1;
    std::vector<std::uint8_t> bits;  // row-major, y fastest-varying rows, row 0 at lowest y
    bool at(int i, int j) const
    {
        return i >= 0 && j >= 0 && i < nx && j < ny && bits[std::size_t(j) * nx + i];
    }
};

// Planar cross-section D. A channel is the strip |x - cx| < width/2,
// periodic in y with the given period; it is the geometry of the lambda
// sweeps and needs a grid with periodic_y set.
struct DomainSpec {
    Shape shape = Shape::disc;
    double radius = 1;
    double width = 2, height = 2, corner_radius = 0.1;
    double r_in = 0.5, r_out = 1;
    double period = 1;
    MaskBitmap mask;
    double cx = 0, cy = 0;

    static DomainSpec disc(double r, double cx = 0, double cy = 0)
    {
        DomainSpec s;
        s.shape = Shape::disc; s.radius = r; s.cx = cx; s.cy = cy;
        return s;
    }
    static DomainSpec rectangle(double w, double h, double rc, double cx = 0, double cy = 0)
    {
        if (!(rc > 0)) throw std::invalid_argument("rectangle: corner_radius must be > 0");
        if (2 * rc > std::min(w, h)) throw std::invalid_argument("rectangle: corner_radius too large");
        DomainSpec s;
        s.shape = Shape::rectangle; s.width = w; s.height = h; s.corner_radius = rc;
        s.cx = cx; s.cy = cy;
        return s;
    }
    static DomainSpec annulus(double ri, double ro, double cx = 0, double cy = 0)
    {
        if (!(ri > 0 && ro > ri)) throw std::invalid_argument("annulus: need 0 < r_in < r_out");
        DomainSpec s;
        s.shape = Shape::annulus; s.r_in = ri; s.r_out = ro; s.cx = cx; s.cy = cy;
        return s;
    }
    static DomainSpec channel(double w, double period, double cx = 0, double cy = 0)
    {
        DomainSpec s;
        s.shape = Shape::channel; s.width = w; s.period = period; s.cx = cx; s.cy = cy;
        return s;
    }
    static DomainSpec from_mask(MaskBitmap m, double cx = 0, double cy = 0)
    {
        DomainSpec s;
        s.shape = Shape::mask; s.mask = std::move(m); s.cx = cx; s.cy = cy;
        return s;
    }

    bool analytic() const { return shape != Shape::mask; }

    // exact signed distance, positive inside
    double sdf(double x, double y) const
    {
        double px = x - cx, py = y - cy;
        switch (shape) {
        case Shape::disc:
            return radius - std::hypot(px, py);
        case Shape::rectangle: {
            double qx = std::abs(px) - (0.5 * width - corner_radius);
            double qy = std::abs(py) - (0.5 * height - corner_radius);
            double out = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0)) +
                         std::min(std::max(qx, qy), 0.0) - corner_radius;
            return -out;
        }
        case Shape::annulus: {
            double r = std::hypot(px, py);
            return std::min(r - r_in, r_out - r);
        }
        case Shape::channel:
            return 0.5 * width - std::abs(px);
        case Shape::mask:
            break;
        }
        throw std::logic_error("sdf: mask shapes have no analytic distance");
    }

    double half_w() const
    {
        switch (shape) {
        case Shape::disc: return radius;
        case Shape::rectangle: return 0.5 * width;
        case Shape::annulus: return r_out;
        case Shape::channel: return 0.5 * width;
        case Shape::mask: return 0.5 * mask.nx * mask.spacing;
        }
        return 0;
    }
    double half_h() const
    {
        switch (shape) {
        case Shape::disc: return radius;
        case Shape::rectangle: return 0.5 * height;
        case Shape::annulus: return r_out;
        case Shape::channel: return 0.5 * period;
        case Shape::mask: return 0.5 * mask.ny * mask.spacing;
        }
        return 0;
    }

    double min_feature() const
    {
        switch (shape) {
        case Shape::disc: return 2 * radius;
        case Shape::rectangle: return std::min(width, height);
        case Shape::annulus: return r_out - r_in;
        case Shape::channel: return width;
        case Shape::mask: return 4 * mask.spacing;  // resolution is the mask's own
        }
        return 0;
    }
};

struct SignedDistanceField {
    Grid grid;
    std::vector<double> rho;
    bool exact = true;  // analytic, as opposed to distance-transform
};

namespace detail {

// 1D squared distance transform of sampled function f (Felzenszwalb &
// Huttenlocher), unit spacing.
inline void dt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z)
{
    const int n = int(f.size());
    const double inf = std::numeric_limits<double>::infinity();
    d.assign(n, inf);
    v.assign(n, 0);
    z.assign(n + 1, 0);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        if (k < 0) {
            k = 0; v[0] = q; z[0] = -inf; z[1] = inf;
            continue;
        }
        double s;
        for (;;) {
            int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k] && k > 0) --k;
            else break;
        }
        if (s <= z[k]) {  // k == 0 and new parabola dominates everywhere
            v[0] = q; z[0] = -inf; z[1] = inf;
            continue;
        }
        ++k;
        v[k] = q; z[k] = s; z[k + 1] = inf;
    }
    if (k < 0) return;
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        double t = q - v[j];
        d[q] = t * t + f[v[j]];
    }
}

}  // namespace detail

// Exact Euclidean distance (in cells) from every cell to the nearest cell
// with feature[c] != 0. Infinity if there are none.
inline std::vector<double> distance_transform(const Mask2D& feature, int nx, int ny)
{
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(std::size_t(nx) * ny);
    std::vector<double> f, d, z;
    std::vector<int> v;
    f.resize(nx);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) f[i] = feature[std::size_t(j) * nx + i] ? 0.0 : inf;
        detail::dt1d(f, d, v, z);
        for (int i = 0; i < nx; ++i) g[std::size_t(j) * nx + i] = d[i];
    }
    f.resize(ny);
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) f[j] = g[std::size_t(j) * nx + i];
        detail::dt1d(f, d, v, z);
        for (int j = 0; j < ny; ++j) g[std::size_t(j) * nx + i] = std::sqrt(d[j]);
    }
    return g;
}

// Rasterize a mask spec onto grid (requires matching, aligned spacing).
inline Mask2D rasterize_mask(const DomainSpec& spec, const Grid& g)
{
    const MaskBitmap& m = spec.mask;
    if (std::abs(g.hx - m.spacing) > 1e-12 * m.spacing || std::abs(g.hy - m.spacing) > 1e-12 * m.spacing)
        throw std::invalid_argument("mask: grid spacing must equal the mask spacing");
    Mask2D out(g.size(), 0);
    double fx = (g.x(0) - spec.cx) / m.spacing + 0.5 * m.nx - 0.5;
    double fy = (g.y(0) - spec.cy) / m.spacing + 0.5 * m.ny - 0.5;
    int ox = int(std::lround(fx)), oy = int(std::lround(fy));
    if (std::abs(fx - ox) > 1e-6 || std::abs(fy - oy) > 1e-6)
        throw std::invalid_argument("mask: grid cells not aligned with mask pixels");
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) out[g.idx(i, j)] = m.at(i + ox, j + oy) ? 1 : 0;
    return out;
}

inline void check_grid_covers(const DomainSpec& spec, const Grid& g)
{
    const double tol = 1e-9 * std::max(g.lx(), g.ly());
    bool x_ok = g.x0 <= spec.cx - spec.half_w() + tol && g.x0 + g.lx() >= spec.cx + spec.half_w() - tol;
    bool y_ok;
    if (spec.shape == Shape::channel) {
        if (!g.periodic_y) throw std::invalid_argument("channel domain needs a y-periodic grid");
        y_ok = std::abs(g.ly() - spec.period) <= 1e-9 * spec.period;
        if (!y_ok) throw std::invalid_argument("channel period must equal the grid y-extent");
    } else {
        y_ok = g.y0 <= spec.cy - spec.half_h() + tol && g.y0 + g.ly() >= spec.cy + spec.half_h() - tol;
    }
    if (!x_ok || !y_ok) throw std::invalid_argument("grid box does not contain the domain");
}

inline SignedDistanceField signed_distance(const DomainSpec& spec, const Grid& g)
{
    check_grid_covers(spec, g);
    double h = std::max(g.hx, g.hy);
    if (spec.min_feature() < 4 * h)
        throw std::invalid_argument("signed_distance: grid too coarse, fewer than 4 cells across " +
                                    std::to_string(spec.min_feature()));
    SignedDistanceField s;
    s.grid = g;
    s.rho.resize(g.size());
    if (spec.analytic()) {
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) s.rho[g.idx(i, j)] = spec.sdf(g.x(i), g.y(j));
        return s;
    }
    if (g.periodic_x || g.periodic_y)
        throw std::invalid_argument("mask domains need a non-periodic grid");
    s.exact = false;
    Mask2D in = rasterize_mask(spec, g);
    Mask2D out(in.size());
    for (std::size_t k = 0; k < in.size(); ++k) out[k] = !in[k];
    auto d_to_out = distance_transform(out, g.nx, g.ny);
    auto d_to_in = distance_transform(in, g.nx, g.ny);
    // cell-centre distances shifted by half a cell put the zero level on
    // the pixel boundary
    for (std::size_t k = 0; k < in.size(); ++k) {
        if (in[k]) {
            double d = std::isinf(d_to_out[k]) ? double(g.nx + g.ny) : d_to_out[k];
            s.rho[k] = (d - 0.5) * g.hx;
        } else {
            double d = std::isinf(d_to_in[k]) ? double(g.nx + g.ny) : d_to_in[k];
            s.rho[k] = -(d - 0.5) * g.hx;
        }
    }
    return s;
}

// Quintic smoothstep on [1, 2].
inline double eta(double t)
{
    if (t <= 1) return 0;
    if (t >= 2) return 1;
    double s = t - 1;
    return s * s * s * (s * (6 * s - 15) + 10);
}

inline double eta_prime(double t)
{
    if (t <= 1 || t >= 2) return 0;
    double s = t - 1;
    return 30 * s * s * (s - 1) * (s - 1);
}

struct CutoffField {
    Grid grid;
    double delta = 0;
    std::vector<double> chi;
    bool under_resolved = false;
};

inline CutoffField cutoff_chi(const SignedDistanceField& sdf, double delta)
{
    if (!(delta > 0)) throw std::invalid_argument("cutoff_chi: delta must be > 0");
    CutoffField c;
    c.grid = sdf.grid;
    c.delta = delta;
    c.under_resolved = delta < 2 * std::max(sdf.grid.hx, sdf.grid.hy);
    c.chi.resize(sdf.rho.size());
    for (std::size_t k = 0; k < sdf.rho.size(); ++k) c.chi[k] = eta(std::max(sdf.rho[k], 0.0) / delta);
    return c;
}

// chi == 1 everywhere; used on fully periodic cells
inline CutoffField unit_cutoff(const Grid& g)
{
    CutoffField c;
    c.grid = g;
    c.chi.assign(g.size(), 1.0);
    return c;
}

inline Mask2D erode(const SignedDistanceField& sdf, double delta)
{
    if (delta < 0) throw std::invalid_argument("erode: delta must be >= 0");
    Mask2D m(sdf.rho.size());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = sdf.rho[k] > delta;
    return m;
}

// Length of the level set {v = level} by marching squares on the dual
// lattice of cell centres. Off-grid values are `outside` on non-periodic
// axes, so contours close around the box.
inline double contour_length(const std::vector<double>& v, const Grid& g, double outside, double level = 0)
{
    auto val = [&](int i, int j) {
        if (g.periodic_x) i = (i % g.nx + g.nx) % g.nx;
        if (g.periodic_y) j = (j % g.ny + g.ny) % g.ny;
        if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) return outside;
        return v[g.idx(i, j)];
    };
    // square (i, j) spans cells i..i+1, j..j+1
    int i_lo = g.periodic_x ? 0 : -1, j_lo = g.periodic_y ? 0 : -1;
    int i_hi = g.nx, j_hi = g.ny;
    double total = 0;
    for (int j = j_lo; j < j_hi; ++j) {
        for (int i = i_lo; i < i_hi; ++i) {
            double c[4] = {val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)};
            // corner positions in units of (hx, hy), counter-clockwise
            static const double px[4] = {0, 1, 1, 0}, py[4] = {0, 0, 1, 1};
            bool s[4];
            for (int q = 0; q < 4; ++q) s[q] = c[q] >= level;
            double ex[4], ey[4];
            bool cut[4];
            int ncut = 0;
            for (int e = 0; e < 4; ++e) {
                int a = e, b = (e + 1) % 4;
                cut[e] = s[a] != s[b];
                if (!cut[e]) continue;
                ++ncut;
                double t = (level - c[a]) / (c[b] - c[a]);
                ex[e] = (px[a] + t * (px[b] - px[a])) * g.hx;
                ey[e] = (py[a] + t * (py[b] - py[a])) * g.hy;
            }
            auto seg = [&](int e1, int e2) { total += std::hypot(ex[e1] - ex[e2], ey[e1] - ey[e2]); };
            if (ncut == 2) {
                int e1 = -1, e2 = -1;
                for (int e = 0; e < 4; ++e)
                    if (cut[e]) (e1 < 0 ? e1 : e2) = e;
                seg(e1, e2);
            } else if (ncut == 4) {
                // edges: 0 bottom, 1 right, 2 top, 3 left
                bool centre = 0.25 * (c[0] + c[1] + c[2] + c[3]) >= level;
                if (centre == s[0]) {
                    seg(0, 1);  // isolate corner 1
                    seg(2, 3);  // isolate corner 3
                } else {
                    seg(3, 0);
                    seg(1, 2);
                }
            }
        }
    }
    return total;
}

struct Measures {
    double area = 0, perimeter = 0;
    double area_uncertainty = 0, perimeter_uncertainty = 0;
};

namespace detail {

// Contour length of the indicator blurred with a Gaussian of `sigma` pixels,
// at level 1/2. The raw staircase overestimates lengths by ~4/pi on average
// over orientations; blurring removes that bias up to O(sigma^2 curvature).
inline double blurred_contour(const MaskBitmap& m, double sigma)
{
    const int r = int(std::ceil(3 * sigma));
    const int pad = r + 2;
    Grid g = Grid::centered(m.nx + 2 * pad, m.ny + 2 * pad, m.spacing, m.spacing);
    std::vector<double> w(2 * r + 1);
    double ws = 0;
    for (int q = -r; q <= r; ++q) ws += w[q + r] = std::exp(-0.5 * q * q / (sigma * sigma));
    for (auto& x : w) x /= ws;
    std::vector<double> a(g.size(), 0.0), b(g.size(), 0.0);
    for (int j = 0; j < m.ny; ++j)
        for (int i = 0; i < m.nx; ++i) a[g.idx(i + pad, j + pad)] = m.at(i, j);
    for (int j = 0; j < g.ny; ++j)
        for (int i = r; i < g.nx - r; ++i) {
            double t = 0;
            for (int q = -r; q <= r; ++q) t += w[q + r] * a[g.idx(i + q, j)];
            b[g.idx(i, j)] = t;
        }
    std::fill(a.begin(), a.end(), 0.0);
    for (int j = r; j < g.ny - r; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double t = 0;
            for (int q = -r; q <= r; ++q) t += w[q + r] * b[g.idx(i, j + q)];
            a[g.idx(i, j)] = t;
        }
    return contour_length(a, g, 0.0, 0.5);
}

inline Measures mask_measures(const MaskBitmap& m)
{
    std::size_t count = 0;
    for (auto b : m.bits) count += b;
    Measures r;
    r.area = double(count) * m.spacing * m.spacing;
    r.perimeter = blurred_contour(m, 1.5);
    r.perimeter_uncertainty = 0.5 * std::abs(blurred_contour(m, 1) - blurred_contour(m, 2));
    return r;
}

inline MaskBitmap coarsen2(const MaskBitmap& m)
{
    MaskBitmap c;
    c.nx = (m.nx + 1) / 2;
    c.ny = (m.ny + 1) / 2;
    c.spacing = 2 * m.spacing;
    c.bits.assign(std::size_t(c.nx) * c.ny, 0);
    for (int j = 0; j < c.ny; ++j)
        for (int i = 0; i < c.nx; ++i) {
            int n = m.at(2 * i, 2 * j) + m.at(2 * i + 1, 2 * j) + m.at(2 * i, 2 * j + 1) +
                    m.at(2 * i + 1, 2 * j + 1);
            c.bits[std::size_t(j) * c.nx + i] = n >= 2;
        }
    return c;
}

}  // namespace detail

inline Measures measures(const DomainSpec& spec)
{
    using std::numbers::pi;
    Measures r;
    switch (spec.shape) {
    case Shape::disc:
        r.area = pi * spec.radius * spec.radius;
        r.perimeter = 2 * pi * spec.radius;
        return r;
    case Shape::rectangle: {
        double a = spec.corner_radius;
        r.area = spec.width * spec.height - (4 - pi) * a * a;
        r.perimeter = 2 * (spec.width + spec.height) - 8 * a + 2 * pi * a;
        return r;
    }
    case Shape::annulus:
        r.area = pi * (spec.r_out * spec.r_out - spec.r_in * spec.r_in);
        r.perimeter = 2 * pi * (spec.r_out + spec.r_in);
        return r;
    case Shape::channel:
        r.area = spec.width * spec.period;
        r.perimeter = 2 * spec.period;
        return r;
    case Shape::mask: {
        // spacing is in the units of the pixel coordinates, so scale after
        MaskBitmap unit = spec.mask;
        double s = unit.spacing;
        unit.spacing = 1;
        Measures fine = detail::mask_measures(unit);
        Measures coarse = detail::mask_measures(detail::coarsen2(unit));
        r.area = fine.area * s * s;
        r.perimeter = fine.perimeter * s;
        r.area_uncertainty = std::abs(fine.area - coarse.area) * s * s;
        r.perimeter_uncertainty =
            std::max(fine.perimeter_uncertainty, std::abs(fine.perimeter - coarse.perimeter)) * s;
        return r;
    }
    }
    return r;
}

// Discretized domain: grid, signed distance, inside mask and measures.
struct Domain {
    DomainSpec spec;
    Grid grid;
    SignedDistanceField sdf;
    Mask2D inside;
    Measures meas;

    std::size_t count() const
    {
        std::size_t n = 0;
        for (auto b : inside) n += b;
        return n;
    }
};

inline Domain discretize(const DomainSpec& spec, const Grid& g)
{
    Domain d;
    d.spec = spec;
    d.grid = g;
    d.sdf = signed_distance(spec, g);
    d.inside = spec.analytic() ? erode(d.sdf, 0.0) : rasterize_mask(spec, g);
    d.meas = measures(spec);
    return d;
}

// All cells inside; for periodic cells with no boundary.
inline Domain periodic_cell(const Grid& g)
{
    if (!g.periodic()) throw std::invalid_argument("periodic_cell: grid must be periodic in x and y");
    Domain d;
    d.grid = g;
    d.spec.shape = Shape::rectangle;
    d.spec.width = g.lx();
    d.spec.height = g.ly();
    d.spec.corner_radius = 0;
    d.sdf.grid = g;
    d.sdf.rho.assign(g.size(), std::numeric_limits<double>::infinity());
    d.inside.assign(g.size(), 1);
    d.meas.area = g.lx() * g.ly();
    d.meas.perimeter = 0;
    return d;
}

}  // namespace dpfilm
