#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "geometry.hpp"
#include "grid.hpp"
#include "spectral.hpp"

namespace dpfilm {

inline constexpr double sigma0 = 2 * std::numbers::sqrt2 / 3;
inline constexpr double sigma1 = 1 / std::numbers::pi;
inline constexpr double lambda_c = 2 * std::numbers::pi * std::numbers::sqrt2 / 3;

// delta_eps = lambda / (gamma |ln eps|)
inline double delta_eps(double lambda, double gamma, double eps)
{
    if (!(gamma > 0)) throw std::invalid_argument("delta_eps: gamma must be > 0");
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("delta_eps: eps must lie in (0,1)");
    return lambda / (gamma * std::abs(std::log(eps)));
}

struct Params {
    double delta = 0.1;
    double gamma = 0;
    double alpha = std::numeric_limits<double>::quiet_NaN();  // NaN: 1/pi^2 + gamma
    double eps = 0.5;
    double lambda = 0;
    double rho_pin = 0;
    std::optional<Field2D> h;

    double alpha_value() const
    {
        return std::isnan(alpha) ? 1 / (std::numbers::pi * std::numbers::pi) + gamma : alpha;
    }

    // delta from (lambda, gamma, eps); gamma = 0 or lambda = 0 gives 0
    double delta_from_lambda() const
    {
        if (lambda == 0) return 0;
        return delta_eps(lambda, gamma, eps);
    }

    static Params lambda_driven(double lambda, double eps, double gamma)
    {
        Params p;
        p.lambda = lambda;
        p.eps = eps;
        p.gamma = gamma;
        p.delta = p.delta_from_lambda();
        return p;
    }
};

struct EnergyBreakdown {
    double dirichlet = 0, double_well = 0, nonlocal = 0, field_term = 0, total = 0;
    void close() { total = dirichlet + double_well + nonlocal + field_term; }
};

// total = (grad/2) int |grad phi|^2 + (well/4) int (1-phi^2)^2
//       - nonlocal * H(chi phi) - int h phi
struct Weights2D {
    double grad = 1, well = 1, nonlocal = 0;
};

namespace detail {

template <class Fn>
void for_each_edge(const Grid& g, const Mask2D& in, Fn&& fn)
{
    const double wx = g.hy / g.hx, wy = g.hx / g.hy;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            std::size_t a = g.idx(i, j);
            if (!in[a]) continue;
            int ir = i + 1, ju = j + 1;
            if (ir == g.nx && g.periodic_x) ir = 0;
            if (ju == g.ny && g.periodic_y) ju = 0;
            if (ir < g.nx && !(ir == i)) {
                std::size_t b = g.idx(ir, j);
                if (in[b]) fn(a, b, wx);
            }
            if (ju < g.ny && !(ju == j)) {
                std::size_t b = g.idx(i, ju);
                if (in[b]) fn(a, b, wy);
            }
        }
    }
}

inline void check_cutoff(const CutoffField& chi, const Grid& g, double want_delta)
{
    require_same_grid(chi.grid, g, "cutoff");
    if (chi.delta == 0) return;  // unit cutoff on periodic cells
    if (std::abs(chi.delta - want_delta) > 1e-12 * std::max(1.0, want_delta)) {
        std::ostringstream os;
        os << "cutoff built for delta=" << chi.delta << " but energy needs delta=" << want_delta;
        throw std::invalid_argument(os.str());
    }
}

}  // namespace detail

// Discrete 2D energy with optional gradient (per cell, i.e. scaled by the
// cell area). Cells outside the domain carry no energy and zero gradient.
// `gq`, if given, receives the gradient of the non-well (quadratic and
// linear) part alone; the minimizer uses it for exact energy differences.
inline EnergyBreakdown evaluate_2d(const Field2D& phi, const Domain& dom, const CutoffField* chi,
                                   const Weights2D& w, const Field2D* h, int p,
                                   std::vector<double>* grad, std::vector<double>* gq = nullptr)
{
    const Grid& g = dom.grid;
    require_same_grid(phi.grid, g, "energy");
    require_finite(phi.v, "energy");
    const double A = g.cell_area();
    const std::size_t n = g.size();
    EnergyBreakdown e;
    if (grad) grad->assign(n, 0.0);

    double dsum = 0;
    detail::for_each_edge(g, dom.inside, [&](std::size_t a, std::size_t b, double wt) {
        double d = phi.v[a] - phi.v[b];
        dsum += wt * d * d;
        if (grad) {
            (*grad)[a] += w.grad * wt * d;
            (*grad)[b] -= w.grad * wt * d;
        }
    });
    e.dirichlet = 0.5 * w.grad * dsum;

    double wsum = 0, fsum = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!dom.inside[k]) continue;
        double f = phi.v[k];
        double q = 1 - f * f;
        wsum += q * q;
        if (grad) (*grad)[k] += A * w.well * (f * f * f - f);
        if (h) {
            fsum += h->v[k] * f;
            if (grad) (*grad)[k] -= A * h->v[k];
        }
    }
    e.double_well = 0.25 * w.well * wsum * A;
    e.field_term = -fsum * A;
    if (grad && gq) {
        *gq = *grad;
        for (std::size_t k = 0; k < n; ++k) {
            if (!dom.inside[k]) continue;
            double f = phi.v[k];
            (*gq)[k] -= A * w.well * (f * f * f - f);
        }
    }

    if (w.nonlocal != 0) {
        if (!chi) throw std::invalid_argument("energy: non-local term needs a cutoff field");
        Field2D u(g);
        for (std::size_t k = 0; k < n; ++k) u.v[k] = dom.inside[k] ? chi->chi[k] * phi.v[k] : 0.0;
        Spectrum2D s = transform(u, p);
        e.nonlocal = -w.nonlocal * s.norm() * mode_sum(s, [](double k) { return k; });
        if (grad) {
            for (int jn = 0; jn < s.ny; ++jn)
                for (int m = 0; m < s.ncx(); ++m) s(m, jn) *= s.kabs(m, jn);
            Field2D ku = inverse(std::move(s));
            for (std::size_t k = 0; k < n; ++k) {
                if (!dom.inside[k]) continue;
                double gk = 2 * w.nonlocal * A * chi->chi[k] * ku.v[k];
                (*grad)[k] -= gk;
                if (gq) (*gq)[k] -= gk;
            }
        }
    }
    e.close();
    return e;
}

// Quadratic part (Dirichlet + non-local, no field, no well) of the 2D
// energy evaluated at d.
inline double quadratic_2d(const std::vector<double>& d, const Domain& dom, const CutoffField* chi,
                           const Weights2D& w, int p)
{
    const Grid& g = dom.grid;
    double dsum = 0;
    detail::for_each_edge(g, dom.inside, [&](std::size_t a, std::size_t b, double wt) {
        double q = d[a] - d[b];
        dsum += wt * q * q;
    });
    double q = 0.5 * w.grad * dsum;
    if (w.nonlocal != 0) {
        Field2D u(g);
        for (std::size_t k = 0; k < u.v.size(); ++k) u.v[k] = dom.inside[k] ? chi->chi[k] * d[k] : 0.0;
        q -= w.nonlocal * h12(u, p);
    }
    return q;
}

// (A w/4) sum [(1 - y^2)^2 - (1 - x^2)^2] over masked cells, without
// cancellation
inline double well_delta(const double* x, const double* y, std::size_t n, const Mask2D& in, double cell,
                         double w)
{
    double s = 0;
    const std::size_t m = in.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (!in[k % m]) continue;
        double a = x[k], b = y[k];
        s += (a - b) * (a + b) * (2 - a * a - b * b);
    }
    return 0.25 * w * cell * s;
}

inline Weights2D reduced_weights(const Params& prm)
{
    double ad2 = prm.alpha_value() * prm.delta * prm.delta;
    if (!(ad2 < 1)) {
        std::ostringstream os;
        os << "alpha*delta^2 = " << ad2 << " must be < 1";
        throw std::invalid_argument(os.str());
    }
    return {1 - ad2, 1, prm.gamma * prm.delta / 4};
}

// E(phi_bar): the reduced thin-film energy
inline EnergyBreakdown reduced_energy(const Field2D& phi, const Params& prm, const Domain& dom,
                                      const CutoffField& chi, int p = 2)
{
    detail::check_cutoff(chi, dom.grid, prm.delta);
    const Field2D* h = prm.h ? &*prm.h : nullptr;
    return evaluate_2d(phi, dom, &chi, reduced_weights(prm), h, p, nullptr);
}

inline Field2D gradient_reduced(const Field2D& phi, const Params& prm, const Domain& dom,
                                const CutoffField& chi, int p = 2)
{
    detail::check_cutoff(chi, dom.grid, prm.delta);
    const Field2D* h = prm.h ? &*prm.h : nullptr;
    Field2D g(dom.grid);
    evaluate_2d(phi, dom, &chi, reduced_weights(prm), h, p, &g.v);
    return g;
}

inline double local_energy_E0(const Field2D& phi, const Domain& dom)
{
    return evaluate_2d(phi, dom, nullptr, {1, 1, 0}, nullptr, 1, nullptr).total;
}

inline Weights2D eps_weights(const Params& prm)
{
    double de = prm.delta_from_lambda();
    double ad2 = prm.alpha_value() * de * de;
    if (!(ad2 < 1)) {
        std::ostringstream os;
        os << "alpha*delta_eps^2 = " << ad2 << " must be < 1";
        throw std::invalid_argument(os.str());
    }
    return {prm.eps * (1 - ad2), 1 / prm.eps, prm.gamma * de / 4};
}

// cutoff length eps * delta_eps used by the rescaled energy
inline double eps_cutoff_length(const Params& prm) { return prm.eps * prm.delta_from_lambda(); }

// E_eps(phi_bar), with delta_eps from (lambda, gamma, eps)
inline EnergyBreakdown rescaled_energy_Eeps(const Field2D& phi, const Params& prm, const Domain& dom,
                                            const CutoffField& chi, int p = 2,
                                            std::vector<double>* grad = nullptr)
{
    Weights2D w = eps_weights(prm);
    if (w.nonlocal != 0) detail::check_cutoff(chi, dom.grid, eps_cutoff_length(prm));
    const Field2D* h = prm.h ? &*prm.h : nullptr;
    return evaluate_2d(phi, dom, &chi, w, h, p, grad);
}

// Interface length of the sign field, cells outside D counted as +1
inline double interface_length(const Field2D& phi, const Domain& dom)
{
    std::vector<double> s(phi.v.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = dom.inside[k] ? (phi.v[k] < 0 ? -1.0 : 1.0) : 1.0;
    return contour_length(s, dom.grid, 1.0, 0.0);
}

inline double sharp_interface_Estar(double length, double lambda, double boundary_length)
{
    return -0.25 * sigma1 * lambda * boundary_length + (sigma0 - sigma1 * lambda) * length;
}

inline double sharp_interface_Estar(const Field2D& indicator, double lambda, const Domain& dom)
{
    require_same_grid(indicator.grid, dom.grid, "sharp_interface_Estar");
    for (std::size_t k = 0; k < indicator.v.size(); ++k)
        if (dom.inside[k] && indicator.v[k] != 1.0 && indicator.v[k] != -1.0)
            throw std::invalid_argument("sharp_interface_Estar: values must be +1 or -1");
    return sharp_interface_Estar(interface_length(indicator, dom), lambda, dom.meas.perimeter);
}

// ---- 3D ----

// total = (grad/2) int |grad phi|^2 + (well/4) int (1-phi^2)^2
//       + nonlocal * (E_d(psi) - int psi^2) - int h phi,   psi = chi phi or phi
struct Weights3D {
    double grad = 1, well = 1, nonlocal = 0;
};

inline EnergyBreakdown evaluate_3d(const Field3D& st, const Mask2D& omega, const CutoffField* chi,
                                   const Weights3D& w, const Field2D* h, int p,
                                   std::vector<double>* grad, std::vector<double>* gq = nullptr)
{
    const Grid& g = st.grid;
    if (omega.size() != g.size()) throw std::invalid_argument("energy3d: mask/grid mismatch");
    if (chi) require_same_grid(chi->grid, g, "energy3d cutoff");
    require_finite(st.v, "energy3d");
    const double A = g.cell_area(), a = st.dz();
    const std::size_t n = g.size();
    EnergyBreakdown e;
    if (grad) grad->assign(st.v.size(), 0.0);

    double dsum = 0;
    for (int l = 0; l < st.nz; ++l) {
        const double* f = st.layer(l);
        double* gl = grad ? grad->data() + std::size_t(l) * n : nullptr;
        detail::for_each_edge(g, omega, [&](std::size_t i, std::size_t j, double wt) {
            double d = f[i] - f[j];
            dsum += a * wt * d * d;
            if (gl) {
                gl[i] += w.grad * a * wt * d;
                gl[j] -= w.grad * a * wt * d;
            }
        });
    }
    for (int l = 0; l + 1 < st.nz; ++l) {
        const double* f0 = st.layer(l);
        const double* f1 = st.layer(l + 1);
        for (std::size_t k = 0; k < n; ++k) {
            if (!omega[k]) continue;
            double d = f1[k] - f0[k];
            dsum += A / a * d * d;
            if (grad) {
                (*grad)[std::size_t(l + 1) * n + k] += w.grad * A / a * d;
                (*grad)[std::size_t(l) * n + k] -= w.grad * A / a * d;
            }
        }
    }
    e.dirichlet = 0.5 * w.grad * dsum;

    double wsum = 0, fsum = 0;
    for (int l = 0; l < st.nz; ++l) {
        for (std::size_t k = 0; k < n; ++k) {
            if (!omega[k]) continue;
            std::size_t q = std::size_t(l) * n + k;
            double f = st.v[q];
            double s = 1 - f * f;
            wsum += s * s;
            if (grad) (*grad)[q] += A * a * w.well * (f * f * f - f);
            if (h) {
                fsum += h->v[k] * f;
                if (grad) (*grad)[q] -= A * a * h->v[k];
            }
        }
    }
    e.double_well = 0.25 * w.well * wsum * A * a;
    e.field_term = -fsum * A * a;
    if (grad && gq) {
        *gq = *grad;
        for (std::size_t q = 0; q < st.v.size(); ++q) {
            if (!omega[q % n]) continue;
            double f = st.v[q];
            (*gq)[q] -= A * a * w.well * (f * f * f - f);
        }
    }

    if (w.nonlocal != 0) {
        Field3D psi(g, st.nz, st.delta);
        for (int l = 0; l < st.nz; ++l)
            for (std::size_t k = 0; k < n; ++k) {
                std::size_t q = std::size_t(l) * n + k;
                psi.v[q] = omega[k] ? (chi ? chi->chi[k] : 1.0) * st.v[q] : 0.0;
            }
        double sq = 0;
        for (double x : psi.v) sq += x * x;
        sq *= A * a;
        double ed;
        if (grad) {
            std::vector<double> gd;
            ed = dipolar_energy_grad(psi, p, gd);
            for (int l = 0; l < st.nz; ++l)
                for (std::size_t k = 0; k < n; ++k) {
                    if (!omega[k]) continue;
                    std::size_t q = std::size_t(l) * n + k;
                    double c = chi ? chi->chi[k] : 1.0;
                    double gk = w.nonlocal * c * (gd[q] - 2 * A * a * psi.v[q]);
                    (*grad)[q] += gk;
                    if (gq) (*gq)[q] += gk;
                }
        } else {
            ed = dipolar_energy(psi, p);
        }
        e.nonlocal = w.nonlocal * (ed - sq);
    }
    e.close();
    return e;
}

// Quadratic part of the layered energy evaluated at the increment d.
inline double quadratic_3d(const Field3D& shape, const std::vector<double>& d, const Mask2D& omega,
                           const CutoffField* chi, const Weights3D& w, int p)
{
    Field3D dd = shape;
    dd.v = d;
    Weights3D wq = w;
    wq.well = 0;
    EnergyBreakdown e = evaluate_3d(dd, omega, chi, wq, nullptr, p, nullptr);
    return e.dirichlet + e.nonlocal;
}

// The 3D energy of a stack over Omega = (omega cross-section) x (0, delta).
// chi == nullptr evaluates the dipolar term on the raw field.
inline EnergyBreakdown full_energy_3d(const Field3D& st, const Params& prm, const Mask2D& omega,
                                      const CutoffField* chi = nullptr, int p = 2,
                                      std::vector<double>* grad = nullptr)
{
    const Field2D* h = prm.h ? &*prm.h : nullptr;
    return evaluate_3d(st, omega, chi, {1, 1, prm.gamma / 2}, h, p, grad);
}

// The eps-rescaled 3D energy (thickness of the stack is eps * delta_eps).
inline EnergyBreakdown full_energy_3d_eps(const Field3D& st, const Params& prm, const Mask2D& omega,
                                          const CutoffField* chi = nullptr, int p = 2,
                                          std::vector<double>* grad = nullptr)
{
    const Field2D* h = prm.h ? &*prm.h : nullptr;
    const double e2 = prm.eps * prm.eps;
    return evaluate_3d(st, omega, chi, {1, 1 / e2, prm.gamma / (2 * e2)}, h, p, grad);
}

inline Field2D z_average(const Field3D& st)
{
    Field2D f(st.grid);
    for (int l = 0; l < st.nz; ++l) {
        const double* s = st.layer(l);
        for (std::size_t k = 0; k < f.v.size(); ++k) f.v[k] += s[k];
    }
    for (double& x : f.v) x /= st.nz;
    return f;
}

namespace detail {

inline double bilinear(const std::vector<double>& v, const Grid& g, double x, double y,
                       const Mask2D* only, double* wsum_out = nullptr)
{
    double fx = (x - g.x0) / g.hx - 0.5, fy = (y - g.y0) / g.hy - 0.5;
    int i0 = int(std::floor(fx)), j0 = int(std::floor(fy));
    double tx = fx - i0, ty = fy - j0;
    double acc = 0, ws = 0;
    for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
            int i = i0 + di, j = j0 + dj;
            if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) continue;
            std::size_t k = g.idx(i, j);
            if (only && !(*only)[k]) continue;
            double wt = (di ? tx : 1 - tx) * (dj ? ty : 1 - ty);
            acc += wt * v[k];
            ws += wt;
        }
    if (wsum_out) *wsum_out = ws;
    return ws > 0 ? acc / ws : 0.0;
}

}  // namespace detail

// Reflection extension of phi_bar across the boundary into the collar
// {-delta < rho <= 0}: phi(r) = phi_bar(r - 2 rho(r) grad rho(r)).
inline Field2D extend_reflect(const Field2D& phi, const SignedDistanceField& sdf, double delta)
{
    const Grid& g = sdf.grid;
    require_same_grid(phi.grid, g, "extend_reflect");
    Mask2D in(g.size());
    for (std::size_t k = 0; k < in.size(); ++k) in[k] = sdf.rho[k] > 0;
    Field2D out(g);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            std::size_t k = g.idx(i, j);
            double r = sdf.rho[k];
            if (r > 0) {
                out.v[k] = phi.v[k];
                continue;
            }
            if (r <= -delta) continue;
            auto at = [&](int ii, int jj) {
                ii = std::clamp(ii, 0, g.nx - 1);
                jj = std::clamp(jj, 0, g.ny - 1);
                return sdf.rho[g.idx(ii, jj)];
            };
            int il = std::max(i - 1, 0), ir = std::min(i + 1, g.nx - 1);
            int jl = std::max(j - 1, 0), jr = std::min(j + 1, g.ny - 1);
            double gx = (at(ir, j) - at(il, j)) / ((ir - il) * g.hx);
            double gy = (at(i, jr) - at(i, jl)) / ((jr - jl) * g.hy);
            double gn = std::hypot(gx, gy);
            if (!(gn > 0)) throw std::runtime_error("extend_reflect: degenerate distance gradient");
            gx /= gn;
            gy /= gn;
            double xr = g.x(i) - 2 * r * gx, yr = g.y(j) - 2 * r * gy;
            double rho_r = detail::bilinear(sdf.rho, g, xr, yr, nullptr);
            double ws = 0;
            double val = detail::bilinear(phi.v, g, xr, yr, &in, &ws);
            if (!(rho_r > 0) || ws < 1e-3) {
                std::ostringstream os;
                os << "extend_reflect: reflected point of node (" << i << "," << j
                   << ") falls outside D; delta too large for the boundary curvature";
                throw std::runtime_error(os.str());
            }
            out.v[k] = val;
        }
    }
    return out;
}

// ---- quadrature helpers ----

// int |grad u|^2 over the whole box, u = `outside` beyond non-periodic edges
inline double dirichlet_box(const std::vector<double>& u, const Grid& g, double outside = 0)
{
    auto val = [&](int i, int j) {
        if (g.periodic_x) i = (i % g.nx + g.nx) % g.nx;
        if (g.periodic_y) j = (j % g.ny + g.ny) % g.ny;
        if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) return outside;
        return u[g.idx(i, j)];
    };
    double s = 0;
    int ilo = g.periodic_x ? 0 : -1, jlo = g.periodic_y ? 0 : -1;
    for (int j = jlo; j < g.ny; ++j)
        for (int i = ilo; i < g.nx; ++i) {
            if (j >= 0) {
                double d = val(i + 1, j) - val(i, j);
                s += d * d * g.hy / g.hx;
            }
            if (i >= 0) {
                double d = val(i, j + 1) - val(i, j);
                s += d * d * g.hx / g.hy;
            }
        }
    return s;
}

// int |grad u| over the whole box from dual-cell gradients
inline double grad_l1_box(const std::vector<double>& u, const Grid& g, double outside = 0)
{
    auto val = [&](int i, int j) {
        if (g.periodic_x) i = (i % g.nx + g.nx) % g.nx;
        if (g.periodic_y) j = (j % g.ny + g.ny) % g.ny;
        if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) return outside;
        return u[g.idx(i, j)];
    };
    double s = 0;
    int ilo = g.periodic_x ? 0 : -1, jlo = g.periodic_y ? 0 : -1;
    for (int j = jlo; j < g.ny; ++j)
        for (int i = ilo; i < g.nx; ++i) {
            double a = val(i, j), b = val(i + 1, j), c = val(i, j + 1), d = val(i + 1, j + 1);
            double gx = 0.5 * ((b - a) + (d - c)) / g.hx;
            double gy = 0.5 * ((c - a) + (d - b)) / g.hy;
            s += std::hypot(gx, gy) * g.cell_area();
        }
    return s;
}

inline double lp_pow(const Field2D& f, const Mask2D* m, double pw)
{
    double s = 0;
    for (std::size_t k = 0; k < f.v.size(); ++k)
        if (!m || (*m)[k]) s += std::pow(std::abs(f.v[k]), pw);
    return s * f.grid.cell_area();
}

inline double linf(const std::vector<double>& v, const Mask2D* m = nullptr)
{
    double s = 0;
    for (std::size_t k = 0; k < v.size(); ++k)
        if (!m || (*m)[k % m->size()]) s = std::max(s, std::abs(v[k]));
    return s;
}

}  // namespace dpfilm
