#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"

namespace dpfilm {

namespace detail {

// |k| on the stored half plane, shared between spectra of the same shape
class KTableCache {
public:
    static std::shared_ptr<const std::vector<double>> get(int nx, int ny, double lx, double ly)
    {
        static KTableCache c;
        std::lock_guard<std::mutex> lk(c.mu_);
        auto key = std::make_tuple(nx, ny, lx, ly);
        auto it = c.tab_.find(key);
        if (it != c.tab_.end()) return it->second;
        const int ncx = nx / 2 + 1;
        auto t = std::make_shared<std::vector<double>>(std::size_t(ncx) * ny);
        for (int n = 0; n < ny; ++n) {
            int nn = n <= ny / 2 ? n : n - ny;  // Nyquist row counts as +ny/2
            double ky = 2 * std::numbers::pi * nn / ly;
            for (int m = 0; m < ncx; ++m)
                (*t)[std::size_t(n) * ncx + m] = std::hypot(2 * std::numbers::pi * m / lx, ky);
        }
        c.tab_.emplace(key, t);
        return t;
    }

private:
    std::mutex mu_;
    std::map<std::tuple<int, int, double, double>, std::shared_ptr<const std::vector<double>>> tab_;
};

}  // namespace detail

// In-plane spectrum of a zero-padded real field. Only the half plane
// m = 0..nx/2 is stored (r2c layout); weight(m) restores full-plane sums.
struct Spectrum2D {
    int nx = 0, ny = 0;     // padded sizes
    double lx = 0, ly = 0;  // padded box
    int padding = 1;
    Grid src;  // unpadded grid, for the inverse
    CplxBuf c;
    std::shared_ptr<const std::vector<double>> ktab;

    int ncx() const { return nx / 2 + 1; }
    cplx& operator()(int m, int n) { return c[std::size_t(n) * ncx() + m]; }
    const cplx& operator()(int m, int n) const { return c[std::size_t(n) * ncx() + m]; }

    double kx(int m) const { return 2 * std::numbers::pi * m / lx; }
    double ky(int n) const
    {
        int nn = n <= ny / 2 ? n : n - ny;  // Nyquist row counts as +ny/2
        return 2 * std::numbers::pi * nn / ly;
    }
    double kabs(int m, int n) const { return (*ktab)[std::size_t(n) * ncx() + m]; }
    double weight(int m) const { return (m == 0 || (nx % 2 == 0 && m == nx / 2)) ? 1.0 : 2.0; }
    // hx*hy / (nx*ny): turns sum_k |U_k|^2 into an L2 integral
    double norm() const { return src.cell_area() / (double(nx) * ny); }
};

inline void check_padding(int p)
{
    if (p != 1 && p != 2 && p != 4) throw std::invalid_argument("padding must be 1, 2 or 4");
}

inline int padded_nx(const Grid& g, int p) { return g.periodic_x ? g.nx : p * g.nx; }
inline int padded_ny(const Grid& g, int p) { return g.periodic_y ? g.ny : p * g.ny; }

namespace detail {

inline void load_padded(const Grid& g, const double* src, int nx, int ny, RealBuf& buf)
{
    buf.assign(std::size_t(nx) * ny, 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) buf[std::size_t(j) * nx + i] = src[g.idx(i, j)];
}

}  // namespace detail

inline Spectrum2D transform_raw(const Grid& g, const double* data, int p)
{
    check_padding(p);
    Spectrum2D s;
    s.src = g;
    s.padding = p;
    s.nx = padded_nx(g, p);
    s.ny = padded_ny(g, p);
    s.lx = s.nx * g.hx;
    s.ly = s.ny * g.hy;
    s.ktab = detail::KTableCache::get(s.nx, s.ny, s.lx, s.ly);
    RealBuf buf;
    detail::load_padded(g, data, s.nx, s.ny, buf);
    fft_r2c(s.nx, s.ny, buf, s.c);
    return s;
}

inline Spectrum2D transform(const Field2D& f, int p = 2)
{
    require_finite(f.v, "transform");
    return transform_raw(f.grid, f.v.data(), p);
}

// Inverse onto the unpadded grid (crops the padding). Consumes a copy.
inline Field2D inverse(Spectrum2D s)
{
    RealBuf buf;
    fft_c2r(s.nx, s.ny, s.c, buf);
    Field2D f(s.src);
    const double inv = 1.0 / (double(s.nx) * s.ny);
    for (int j = 0; j < s.src.ny; ++j)
        for (int i = 0; i < s.src.nx; ++i) f(i, j) = buf[std::size_t(j) * s.nx + i] * inv;
    return f;
}

// Full-plane sum of w(k) |U_k|^2
template <class Fn>
double mode_sum(const Spectrum2D& s, Fn&& w)
{
    double acc = 0;
    for (int n = 0; n < s.ny; ++n)
        for (int m = 0; m < s.ncx(); ++m) acc += s.weight(m) * w(s.kabs(m, n)) * std::norm(s(m, n));
    return acc;
}

// True if a non-padded-away edge of the box carries nonzero values
inline bool support_touches_edge(const Field2D& f)
{
    const Grid& g = f.grid;
    if (!g.periodic_x)
        for (int j = 0; j < g.ny; ++j)
            if (f(0, j) != 0 || f(g.nx - 1, j) != 0) return true;
    if (!g.periodic_y)
        for (int i = 0; i < g.nx; ++i)
            if (f(i, 0) != 0 || f(i, g.ny - 1) != 0) return true;
    return false;
}

// (-Delta)^{1/2} u via the |k| symbol on the padded box.
inline Field2D half_laplacian(const Field2D& u, int p = 2, bool* edge_warning = nullptr)
{
    if (edge_warning) *edge_warning = support_touches_edge(u);
    Spectrum2D s = transform(u, p);
    for (int n = 0; n < s.ny; ++n)
        for (int m = 0; m < s.ncx(); ++m) s(m, n) *= s.kabs(m, n);
    return inverse(std::move(s));
}

// H(u) = int u (-Delta)^{1/2} u d^2r  =  (1/4pi) iint (u(r)-u(r'))^2/|r-r'|^3
inline double h12(const Field2D& u, int p = 2)
{
    Spectrum2D s = transform(u, p);
    return s.norm() * mode_sum(s, [](double k) { return k; });
}

// (1 - e^{-x})/x
inline double phi1(double x)
{
    if (x < 1e-4) return 1 - x / 2 + x * x / 6 - x * x * x / 24;
    return -std::expm1(-x) / x;
}

// f_delta(k) = (1 - e^{-k delta})/k, with f(0) = delta
inline double slab_symbol(double k, double delta)
{
    if (k < 0 || !(delta > 0)) throw std::invalid_argument("slab_symbol: need k >= 0, delta > 0");
    return delta * phi1(k * delta);
}

struct DipolarParts {
    double total = 0;      // E_d
    double d0 = 0;         // |k|^{-1} kernel, vanishes identically
    double d1 = 0;         // -|z - z'| kernel, equals int psi^2
    double d2 = 0;         // (|k|/2)(z - z')^2 kernel, equals -(delta^2/2) H(psi_bar)
    double remainder = 0;  // total - d0 - d1 - d2
};

namespace detail {

inline std::vector<Spectrum2D> layer_spectra(const Field3D& s, int p)
{
    require_finite(s.v, "dipolar_energy");
    std::vector<Spectrum2D> out;
    out.reserve(s.nz);
    for (int l = 0; l < s.nz; ++l) out.push_back(transform_raw(s.grid, s.layer(l), p));
    return out;
}

// Per-mode kernel pieces for layer thickness a and x = k a.
struct ModeKernel {
    double diag;   // 2 a phi1(x)
    double off;    // a x phi1(x)^2
    double decay;  // e^{-x}
    ModeKernel(double k, double a)
    {
        double x = k * a;
        double f = phi1(x);
        diag = 2 * a * f;
        off = a * x * f * f;
        decay = std::exp(-x);
    }
};

}  // namespace detail

// Layered dipolar energy with exact z-kernels:
//   E(k) = sum_{ll'} Psi_l^* M_{ll'} Psi_l',  M_ll = 2a phi1(ka),
//   M_ll' = -a (ka) phi1(ka)^2 e^{-(|l-l'|-1) ka},
//   E_d = (A/2N) sum_k E(k).
inline DipolarParts dipolar_decomposition(const Field3D& st, int p = 2)
{
    auto sp = detail::layer_spectra(st, p);
    const Spectrum2D& s0 = sp[0];
    const double a = st.dz();
    const int nz = st.nz;
    DipolarParts r;
    for (int n = 0; n < s0.ny; ++n) {
        for (int m = 0; m < s0.ncx(); ++m) {
            const double k = s0.kabs(m, n), w = s0.weight(m);
            detail::ModeKernel K(k, a);
            double self = 0, cross = 0;
            cplx run = 0, sum = 0, q = 0;
            for (int l = 0; l < nz; ++l) {
                cplx psi = sp[l](m, n);
                self += std::norm(psi);
                if (l > 0) cross += std::real(std::conj(psi) * run);
                run = run * K.decay + psi;
                sum += psi;
            }
            // total jump charge: +Psi_0 at the bottom, differences between
            // layers, -Psi_top at the top
            q = sp[0](m, n);
            for (int l = 1; l < nz; ++l) q += sp[l](m, n) - sp[l - 1](m, n);
            q -= sp[nz - 1](m, n);
            double e = K.diag * self - 2 * K.off * cross;
            double e1 = 2 * a * self;
            double e2 = -k * a * a * std::norm(sum);
            double e0 = k > 0 ? std::norm(q) / k : 0;
            r.total += w * e;
            r.d0 += w * e0;
            r.d1 += w * e1;
            r.d2 += w * e2;
        }
    }
    const double c = 0.5 * s0.norm();
    r.total *= c;
    r.d0 *= c;
    r.d1 *= c;
    r.d2 *= c;
    r.remainder = r.total - r.d0 - r.d1 - r.d2;
    return r;
}

inline double dipolar_energy(const Field3D& st, int p = 2) { return dipolar_decomposition(st, p).total; }

// E_d and its gradient dE_d/dpsi (per cell value, not per volume).
inline double dipolar_energy_grad(const Field3D& st, int p, std::vector<double>& grad)
{
    auto sp = detail::layer_spectra(st, p);
    const Spectrum2D& s0 = sp[0];
    const double a = st.dz();
    const int nz = st.nz;
    double e_tot = 0;
    std::vector<cplx> psi(nz), fwd(nz), bwd(nz);
    std::vector<Spectrum2D> out = sp;  // reuse shapes
    for (int n = 0; n < s0.ny; ++n) {
        for (int m = 0; m < s0.ncx(); ++m) {
            const double k = s0.kabs(m, n), w = s0.weight(m);
            detail::ModeKernel K(k, a);
            for (int l = 0; l < nz; ++l) psi[l] = sp[l](m, n);
            cplx run = 0;
            for (int l = 0; l < nz; ++l) {
                fwd[l] = run;
                run = run * K.decay + psi[l];
            }
            run = 0;
            for (int l = nz - 1; l >= 0; --l) {
                bwd[l] = run;
                run = run * K.decay + psi[l];
            }
            double e = 0;
            for (int l = 0; l < nz; ++l) {
                cplx mp = K.diag * psi[l] - K.off * (fwd[l] + bwd[l]);
                e += std::real(std::conj(psi[l]) * mp);
                out[l](m, n) = mp;
            }
            e_tot += w * e;
        }
    }
    grad.assign(st.v.size(), 0.0);
    const double A = st.grid.cell_area();
    for (int l = 0; l < nz; ++l) {
        Field2D g = inverse(std::move(out[l]));
        double* dst = grad.data() + std::size_t(l) * st.grid.size();
        for (std::size_t i = 0; i < g.v.size(); ++i) dst[i] = A * g.v[i];
    }
    return 0.5 * s0.norm() * e_tot;
}

// int |grad_inplane psi|^2 d^3r with the spectral symbol k^2
inline double spectral_dirichlet_inplane(const Field3D& st, int p = 2)
{
    double acc = 0;
    for (int l = 0; l < st.nz; ++l) {
        Spectrum2D s = transform_raw(st.grid, st.layer(l), p);
        acc += s.norm() * mode_sum(s, [](double k) { return k * k; });
    }
    return acc * st.dz();
}

}  // namespace dpfilm
