#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dpfilm/minimize.hpp"

using namespace dpfilm;

namespace {

Domain disc(double R, double h)
{
    return discretize(DomainSpec::disc(R), Grid::covering(R + 2 * h, R + 2 * h, h));
}

Field2D small_random(const Domain& d, std::uint64_t seed, double amp, double mean = 0)
{
    InitSpec s;
    s.kind = InitKind::random;
    s.value = mean;
    s.amplitude = amp;
    s.seed = seed;
    MinimizeConfig mc;
    mc.box = false;
    return make_init(s, d, mc);
}

}  // namespace

TEST(Minimize, DoubleWellRelaxation)
{
    Domain d = disc(1, 0.1);
    Params prm;
    prm.delta = 0.1;
    prm.gamma = 0;
    CutoffField chi = cutoff_chi(d.sdf, prm.delta);
    MinimizeConfig mc;
    mc.box = false;
    for (std::uint64_t s : {1, 2, 3}) {
        MinimizeResult r = minimize_reduced(small_random(d, s, 0.1), prm, d, chi, mc);
        ASSERT_TRUE(r.converged) << r.status;
        Field2D f(d.grid);
        f.v = r.x;
        EXPECT_LE(local_energy_E0(f, d), 1e-10);
        double sgn = 0;
        for (std::size_t k = 0; k < f.v.size(); ++k)
            if (d.inside[k]) {
                if (sgn == 0) sgn = f.v[k] > 0 ? 1 : -1;
                EXPECT_NEAR(f.v[k], sgn, 1e-6);
            }
    }
}

TEST(Minimize, SingleNodeGoesToSignOfInit)
{
    Domain d = disc(1, 0.25);
    std::size_t keep = d.grid.idx(d.grid.nx / 2, d.grid.ny / 2);
    for (std::size_t k = 0; k < d.inside.size(); ++k) d.inside[k] = k == keep;
    Params prm;
    prm.delta = 0.1;
    prm.gamma = 0;
    CutoffField chi = cutoff_chi(d.sdf, prm.delta);
    for (double v0 : {-0.3, 0.05, 0.9, -1.0}) {
        Field2D f(d.grid);
        f.v[keep] = v0;
        MinimizeResult r = minimize_reduced(f, prm, d, chi, MinimizeConfig{});
        EXPECT_TRUE(r.converged);
        EXPECT_EQ(r.x[keep], v0 > 0 ? 1.0 : -1.0);
    }
}

TEST(Minimize, ConstraintsHoldExactly)
{
    Domain d = disc(1, 0.05);
    Params prm;
    prm.delta = 0.1;
    prm.gamma = 4;
    CutoffField chi = cutoff_chi(d.sdf, prm.delta);
    MinimizeConfig mc;
    mc.pin = true;
    mc.rho_pin = 0.15;
    mc.max_iters = 300;
    InitSpec s;
    s.kind = InitKind::stripes;
    s.period = 0.6;
    MinimizeResult r = minimize_reduced(make_init(s, d, mc), prm, d, chi, mc);
    int pinned = 0;
    for (std::size_t k = 0; k < r.x.size(); ++k) {
        if (!d.inside[k]) {
            EXPECT_EQ(r.x[k], 0.0);
        } else if (!(d.sdf.rho[k] > mc.rho_pin)) {
            EXPECT_EQ(r.x[k], 1.0);
            ++pinned;
        } else {
            EXPECT_LE(std::abs(r.x[k]), 1.0);
        }
    }
    EXPECT_GT(pinned, 0);
    // accepted steps never raise the energy
    for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
    // tracked energy agrees with a fresh evaluation
    Field2D f(d.grid);
    f.v = r.x;
    EXPECT_NEAR(r.history.back(), reduced_energy(f, prm, d, chi).total, 1e-9);
}

TEST(Minimize, ConvergedMeansSmallProjectedGradient)
{
    Domain d = disc(1, 0.1);
    Params prm;
    prm.delta = 0.2;
    prm.gamma = 1;
    CutoffField chi = cutoff_chi(d.sdf, prm.delta);
    MinimizeConfig mc;
    MinimizeResult r = minimize_reduced(small_random(d, 4, 0.5, 0.3), prm, d, chi, mc);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.pg_norm, mc.grad_tol);
    Field2D f(d.grid);
    f.v = r.x;
    Field2D g = gradient_reduced(f, prm, d, chi);
    Constraints c = make_constraints(d, mc);
    EXPECT_LE(detail::projected_grad_norm(r.x, g.v, c, d.grid.cell_area()), mc.grad_tol);
}

TEST(Minimize, MirrorSymmetry)
{
    Domain d = disc(1, 0.08);
    Params prm;
    prm.delta = 0.15;
    prm.gamma = 3;
    CutoffField chi = cutoff_chi(d.sdf, prm.delta);
    MinimizeConfig mc;
    Field2D a = small_random(d, 9, 0.8);
    Field2D b(d.grid);
    const Grid& g = d.grid;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) b(i, j) = a(g.nx - 1 - i, j);
    MinimizeResult ra = minimize_reduced(a, prm, d, chi, mc);
    MinimizeResult rb = minimize_reduced(b, prm, d, chi, mc);
    ASSERT_TRUE(ra.converged && rb.converged);
    EXPECT_NEAR(ra.energy.total, rb.energy.total, 1e-10);
    double diff = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) diff = std::max(diff, std::abs(ra.x[g.idx(i, j)] - rb.x[g.idx(g.nx - 1 - i, j)]));
    EXPECT_LT(diff, 1e-5);
}

TEST(Minimize, RejectsBadConfigAndGrid)
{
    Domain d = disc(1, 0.2);
    Params prm;
    CutoffField chi = cutoff_chi(d.sdf, prm.delta);
    MinimizeConfig mc;
    mc.max_iters = 0;
    EXPECT_THROW(minimize_reduced(Field2D(d.grid), prm, d, chi, mc), std::invalid_argument);
    Domain other = disc(1, 0.1);
    EXPECT_THROW(minimize_reduced(Field2D(other.grid), prm, d, chi, MinimizeConfig{}), std::invalid_argument);
}

TEST(Minimize, SupercriticalStripesBeatUniform)
{
    const double eps = 1.0 / 64;
    Domain d = channel_domain(2, 4, eps / 4);
    Params prm = Params::lambda_driven(2 * lambda_c, eps, 20);
    CutoffField chi = cutoff_chi(d.sdf, eps_cutoff_length(prm));
    MinimizeConfig mc;
    mc.pin = true;
    mc.rho_pin = 0.2;
    InitSpec u;
    Field2D fu = make_init(u, d, mc);
    double e_uniform = rescaled_energy_Eeps(fu, prm, d, chi).total;
    InitSpec s;
    s.kind = InitKind::stripes;
    s.period = 1.6 / 3;
    s.phase_x = -0.8;
    MinimizeResult r = minimize_reduced(make_init(s, d, mc), prm, d, chi, mc, 2, Energy2D::rescaled);
    EXPECT_LT(r.energy.total, e_uniform);
    Field2D f(d.grid);
    f.v = r.x;
    EXPECT_GT(interface_length(f, d), 4 * d.grid.ly());
    EXPECT_TRUE(r.converged) << r.status << " after " << r.iterations;
}

TEST(Minimize3D, NoDipolarTermReproducesPlaneResult)
{
    Domain d = disc(1, 0.1);
    Params prm;
    prm.gamma = 0;
    prm.delta = 0.1;
    MinimizeConfig mc;
    Field2D f0 = small_random(d, 12, 0.6, 0.2);
    MinimizeResult r2 = minimize_reduced(f0, prm, d, cutoff_chi(d.sdf, 0.1), mc);
    MinimizeResult r3 = minimize_3d(Field3D::replicate(f0, 3, 0.3), prm, d, nullptr, mc);
    ASSERT_TRUE(r2.converged && r3.converged);
    const std::size_t n = d.grid.size();
    for (int l = 0; l < 3; ++l)
        for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(r3.x[l * n + k], r2.x[k], 1e-6);
    EXPECT_NEAR(r3.energy.total, 0.3 * r2.energy.total, 1e-8);
}

TEST(Minimize3D, ZIndependentInitStaysZIndependent)
{
    Domain d = disc(1, 0.1);
    Params prm;
    prm.gamma = 1;
    MinimizeConfig mc;
    Field2D f0 = small_random(d, 5, 0.4, 0.5);
    const int nz = 3;
    MinimizeResult r = minimize_3d(Field3D::replicate(f0, nz, 0.1), prm, d, nullptr, mc);
    ASSERT_TRUE(r.converged) << r.status;
    const std::size_t n = d.grid.size();
    double spread = 0;
    for (std::size_t k = 0; k < n; ++k)
        for (int l = 1; l < nz; ++l) spread = std::max(spread, std::abs(r.x[l * n + k] - r.x[k]));
    EXPECT_LE(spread, 1e-6);
}

TEST(Stripes, LambdaZeroMatchesLineTension)
{
    const double eps = 1.0 / 64;
    for (double L : {0.25, 0.5, 1.0}) {
        double e = stripe_energy(L, 0, eps, 1);
        EXPECT_NEAR(e * L / 2, sigma0, 2e-3) << "L=" << L;
    }
}

TEST(Stripes, DecreasingInPeriodBelowThreshold)
{
    const double eps = 1.0 / 32;
    double prev = std::numeric_limits<double>::infinity();
    for (double L = 0.2; L < 7; L *= 1.5) {
        double e = stripe_energy(L, 0, eps, 1);
        EXPECT_LT(e, prev);
        EXPECT_GT(e, 0);
        prev = e;
    }
    // positive and diluting for 0 < lambda < lambda_c as well
    double a = stripe_energy(1, 0.5 * lambda_c, eps, 5), b = stripe_energy(4, 0.5 * lambda_c, eps, 5);
    EXPECT_GT(a, b);
    EXPECT_GT(b, 0);
}

TEST(Stripes, SupercriticalOptimumIsNegative)
{
    const double eps = 1.0 / 32;
    StripeOptimum o = optimal_stripe_period(1.5 * lambda_c, eps, 5, 0.2, 4, 30);
    EXPECT_LT(o.energy, 0);
    EXPECT_GT(o.period, 0.2 + 1e-3);
    EXPECT_LT(o.period, 4 - 1e-3);
    EXPECT_LE(o.energy, stripe_energy(0.25, 1.5 * lambda_c, eps, 5));
    EXPECT_LE(o.energy, stripe_energy(3.5, 1.5 * lambda_c, eps, 5));
}

TEST(Stripes, RejectsUnresolved)
{
    EXPECT_THROW(stripe_energy(0.1, 0, 0.05, 1), std::invalid_argument);
    EXPECT_THROW(stripe_energy(1, 0, 0.05, 1, 4), std::invalid_argument);
}

TEST(Sweep, EndpointsAndCrossing)
{
    SweepConfig sc;
    sc.eps = 1.0 / 16;
    sc.bisect_steps = 3;
    Domain d = channel_domain(sc.width, sc.ny, sc.eps / sc.cells_per_eps);
    SweepRecord rec = sweep_lambda({0.5 * lambda_c, 2 * lambda_c}, sc, d);
    ASSERT_GE(rec.points.size(), 2u);
    EXPECT_FALSE(rec.points[0].modulated);
    EXPECT_TRUE(rec.points[0].all_converged);
    EXPECT_NEAR(rec.points[0].best_energy, rec.points[0].uniform_energy, 1e-10);
    EXPECT_TRUE(rec.points[1].modulated);
    ASSERT_TRUE(rec.crossing_found);
    EXPECT_LT(rec.bracket_lo, rec.lambda_star);
    EXPECT_LT(rec.lambda_star, rec.bracket_hi);
    EXPECT_NEAR(rec.bracket_hi - rec.bracket_lo, 1.5 * lambda_c / 8, 1e-12);
    EXPECT_THROW(sweep_lambda({2, 1}, sc, d), std::invalid_argument);
}

TEST(Gioia, DeviationShrinksWithThickness)
{
    GioiaConfig gc;
    gc.h = 0.2;
    GioiaPoint a = gioia_point(0.4, gc), b = gioia_point(0.2, gc);
    EXPECT_TRUE(a.converged && b.converged);
    EXPECT_LT(b.deviation, a.deviation);
    EXPECT_GT(b.deviation, 0);
}
