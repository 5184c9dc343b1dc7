#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpfilm {

// Cell-centred tensor grid. (x0, y0) is the lower-left corner of the box,
// so cell (i, j) sits at x0 + (i + 1/2) hx.
struct Grid {
    int nx = 0, ny = 0;
    double hx = 1, hy = 1;
    double x0 = 0, y0 = 0;
    bool periodic_x = false, periodic_y = false;

    static Grid centered(int nx, int ny, double hx, double hy, double cx = 0, double cy = 0)
    {
        Grid g;
        g.nx = nx; g.ny = ny; g.hx = hx; g.hy = hy;
        g.x0 = cx - 0.5 * nx * hx;
        g.y0 = cy - 0.5 * ny * hy;
        return g;
    }

    // smallest centred grid with spacing h covering [-half_w, half_w] x [-half_h, half_h]
    static Grid covering(double half_w, double half_h, double h, double cx = 0, double cy = 0)
    {
        int nx = int(std::ceil(2 * half_w / h - 1e-9));
        int ny = int(std::ceil(2 * half_h / h - 1e-9));
        return centered(nx, ny, h, h, cx, cy);
    }

    std::size_t size() const { return std::size_t(nx) * std::size_t(ny); }
    std::size_t idx(int i, int j) const { return std::size_t(j) * nx + i; }
    double x(int i) const { return x0 + (i + 0.5) * hx; }
    double y(int j) const { return y0 + (j + 0.5) * hy; }
    double cell_area() const { return hx * hy; }
    double lx() const { return nx * hx; }
    double ly() const { return ny * hy; }
    bool periodic() const { return periodic_x && periodic_y; }

    bool same_as(const Grid& o) const
    {
        return nx == o.nx && ny == o.ny && hx == o.hx && hy == o.hy && x0 == o.x0 &&
               y0 == o.y0 && periodic_x == o.periodic_x && periodic_y == o.periodic_y;
    }
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what)
{
    if (!a.same_as(b))
        throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

template <class T>
struct BasicField2D {
    Grid grid;
    std::vector<T> v;

    BasicField2D() = default;
    explicit BasicField2D(const Grid& g, T fill = T{}) : grid(g), v(g.size(), fill) {}

    T& operator()(int i, int j) { return v[grid.idx(i, j)]; }
    const T& operator()(int i, int j) const { return v[grid.idx(i, j)]; }
    T& operator[](std::size_t k) { return v[k]; }
    const T& operator[](std::size_t k) const { return v[k]; }
    std::size_t size() const { return v.size(); }
};

using Field2D = BasicField2D<double>;
using Mask2D = std::vector<std::uint8_t>;

// Piecewise-constant-in-z stack of nz layers over (0, delta); layer l is
// v[l*size .. (l+1)*size).
struct Field3D {
    Grid grid;
    int nz = 1;
    double delta = 1;
    std::vector<double> v;

    Field3D() = default;
    Field3D(const Grid& g, int nz_, double delta_, double fill = 0)
        : grid(g), nz(nz_), delta(delta_), v(g.size() * std::size_t(nz_), fill)
    {
        if (nz_ < 1) throw std::invalid_argument("Field3D: nz must be >= 1");
        if (!(delta_ > 0)) throw std::invalid_argument("Field3D: delta must be > 0");
    }

    double dz() const { return delta / nz; }
    double* layer(int l) { return v.data() + std::size_t(l) * grid.size(); }
    const double* layer(int l) const { return v.data() + std::size_t(l) * grid.size(); }
    double& at(int i, int j, int l) { return v[std::size_t(l) * grid.size() + grid.idx(i, j)]; }
    double at(int i, int j, int l) const { return v[std::size_t(l) * grid.size() + grid.idx(i, j)]; }

    Field2D layer_field(int l) const
    {
        Field2D f(grid);
        const double* p = layer(l);
        std::copy(p, p + grid.size(), f.v.begin());
        return f;
    }

    static Field3D replicate(const Field2D& f, int nz, double delta)
    {
        Field3D s(f.grid, nz, delta);
        for (int l = 0; l < nz; ++l) std::copy(f.v.begin(), f.v.end(), s.layer(l));
        return s;
    }
};

inline void require_finite(const std::vector<double>& v, const char* what)
{
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

}  // namespace dpfilm
