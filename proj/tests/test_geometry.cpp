#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dpfilm/geometry.hpp"
#include "dpfilm/grid.hpp"

using namespace dpfilm;
using std::numbers::pi;

namespace {

// unsigned distance to a dense polyline through the boundary
double polyline_distance(const std::vector<std::pair<double, double>>& pts, double x, double y)
{
    double best = 1e300;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto [ax, ay] = pts[i];
        auto [bx, by] = pts[(i + 1) % pts.size()];
        double dx = bx - ax, dy = by - ay;
        double t = std::clamp(((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
        best = std::min(best, std::hypot(x - ax - t * dx, y - ay - t * dy));
    }
    return best;
}

std::vector<std::pair<double, double>> rounded_rect_outline(double w, double h, double rc, int per_arc)
{
    std::vector<std::pair<double, double>> p;
    double cx[4] = {w / 2 - rc, -w / 2 + rc, -w / 2 + rc, w / 2 - rc};
    double cy[4] = {h / 2 - rc, h / 2 - rc, -h / 2 + rc, -h / 2 + rc};
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i <= per_arc; ++i) {
            double a = c * pi / 2 + pi / 2 * i / per_arc;
            p.push_back({cx[c] + rc * std::cos(a), cy[c] + rc * std::sin(a)});
        }
    return p;
}

}  // namespace

TEST(SignedDistance, DiscCentreAndOutside)
{
    DomainSpec d = DomainSpec::disc(1);
    EXPECT_DOUBLE_EQ(d.sdf(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(d.sdf(2, 0), -1.0);
}

TEST(SignedDistance, RoundedCornerArcMidpointIsOnBoundary)
{
    DomainSpec r = DomainSpec::rectangle(2, 2, 0.2);
    double c = 1 - 0.2 + 0.2 / std::sqrt(2.0);
    EXPECT_NEAR(r.sdf(c, c), 0.0, 1e-14);
    EXPECT_NEAR(r.sdf(c - 0.01, c - 0.01), 0.01 * std::sqrt(2.0), 1e-12);
}

TEST(SignedDistance, AnalyticShapesMatchPolylineOracle)
{
    const double w = 2, h = 1.2, rc = 0.25;
    DomainSpec r = DomainSpec::rectangle(w, h, rc);
    auto outline = rounded_rect_outline(w, h, rc, 4000);
    Grid g = Grid::covering(1.3, 0.9, 0.05);
    SignedDistanceField s = signed_distance(r, g);
    double worst = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double d = polyline_distance(outline, g.x(i), g.y(j));
            worst = std::max(worst, std::abs(std::abs(s.rho[g.idx(i, j)]) - d));
        }
    // the polyline chord error at 4000 points per arc is ~2e-9
    EXPECT_LT(worst, 1e-6);

    DomainSpec a = DomainSpec::annulus(0.5, 1);
    std::vector<std::pair<double, double>> inner, outer;
    for (int i = 0; i < 20000; ++i) {
        double t = 2 * pi * i / 20000;
        inner.push_back({0.5 * std::cos(t), 0.5 * std::sin(t)});
        outer.push_back({std::cos(t), std::sin(t)});
    }
    Grid ga = Grid::covering(1.2, 1.2, 0.04);
    SignedDistanceField sa = signed_distance(a, ga);
    worst = 0;
    for (int j = 0; j < ga.ny; ++j)
        for (int i = 0; i < ga.nx; ++i) {
            double d = std::min(polyline_distance(inner, ga.x(i), ga.y(j)), polyline_distance(outer, ga.x(i), ga.y(j)));
            worst = std::max(worst, std::abs(std::abs(sa.rho[ga.idx(i, j)]) - d));
        }
    EXPECT_LT(worst, 1e-6);
}

TEST(SignedDistance, SignConvention)
{
    Grid g = Grid::covering(1.5, 1.5, 0.1);
    DomainSpec d = DomainSpec::disc(1);
    SignedDistanceField s = signed_distance(d, g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double r = std::hypot(g.x(i), g.y(j));
            if (r < 0.999) {
                EXPECT_GT(s.rho[g.idx(i, j)], 0);
            }
            if (r > 1.001) {
                EXPECT_LT(s.rho[g.idx(i, j)], 0);
            }
        }
}

TEST(SignedDistance, RejectsCoarseGridAndUncoveredBox)
{
    EXPECT_THROW(signed_distance(DomainSpec::disc(0.1), Grid::covering(0.5, 0.5, 0.1)), std::invalid_argument);
    EXPECT_THROW(signed_distance(DomainSpec::disc(1), Grid::covering(0.8, 0.8, 0.05)), std::invalid_argument);
}

TEST(SignedDistance, RectangleNeedsRoundedCorners)
{
    EXPECT_THROW(DomainSpec::rectangle(2, 1, 0), std::invalid_argument);
}

TEST(SignedDistance, MaskGradientNormNearOneAwayFromMedialAxis)
{
    // disc bitmap; compare distance-transform rho with the exact disc
    const int n = 128;
    const double sp = 2.4 / n;
    MaskBitmap m;
    m.nx = m.ny = n;
    m.spacing = sp;
    m.bits.resize(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double x = (i + 0.5) * sp - 1.2, y = (j + 0.5) * sp - 1.2;
            m.bits[j * n + i] = std::hypot(x, y) < 1;
        }
    DomainSpec spec = DomainSpec::from_mask(m);
    Grid g = Grid::centered(n, n, sp, sp);
    SignedDistanceField s = signed_distance(spec, g);
    EXPECT_FALSE(s.exact);
    int checked = 0, bad = 0;
    for (int j = 1; j < n - 1; ++j)
        for (int i = 1; i < n - 1; ++i) {
            double r = std::hypot(g.x(i), g.y(j));
            if (r < 0.25 || std::abs(r - 1) < 3 * sp) continue;  // medial axis, pixel staircase
            double gx = (s.rho[g.idx(i + 1, j)] - s.rho[g.idx(i - 1, j)]) / (2 * sp);
            double gy = (s.rho[g.idx(i, j + 1)] - s.rho[g.idx(i, j - 1)]) / (2 * sp);
            ++checked;
            if (std::abs(std::hypot(gx, gy) - 1) > 0.05) ++bad;
            EXPECT_NEAR(s.rho[g.idx(i, j)], 1 - r, 2 * sp);
        }
    EXPECT_GT(checked, 1000);
    EXPECT_LT(double(bad) / checked, 0.05);
}

TEST(Eta, Values)
{
    EXPECT_EQ(eta(0.5), 0.0);
    EXPECT_EQ(eta(3.0), 1.0);
    EXPECT_DOUBLE_EQ(eta(1.5), 0.5);
}

TEST(Eta, MonotoneWithSlopeAtMostTwo)
{
    double prev = 0, maxd = 0;
    for (int i = 0; i <= 100000; ++i) {
        double t = 1 + i / 100000.0;
        double e = eta(t);
        EXPECT_GE(e, prev);
        prev = e;
        maxd = std::max(maxd, eta_prime(t));
        if (i > 0 && i < 100000) {
            EXPECT_NEAR(eta_prime(t), (eta(t + 1e-6) - eta(t - 1e-6)) / 2e-6, 1e-6);
        }
    }
    EXPECT_NEAR(maxd, 15.0 / 8, 1e-9);
    EXPECT_LE(maxd, 2.0);
}

TEST(Cutoff, NodeValues)
{
    Grid g = Grid::centered(3, 1, 1, 1);
    SignedDistanceField s;
    s.grid = g;
    const double d = 0.2;
    s.rho = {3 * d, 0.5 * d, 1.5 * d};
    CutoffField c = cutoff_chi(s, d);
    EXPECT_EQ(c.chi[0], 1.0);
    EXPECT_EQ(c.chi[1], 0.0);
    EXPECT_DOUBLE_EQ(c.chi[2], 0.5);
}

TEST(Cutoff, InvariantsOnDisc)
{
    Grid g = Grid::covering(1.2, 1.2, 0.02);
    DomainSpec d = DomainSpec::disc(1);
    SignedDistanceField s = signed_distance(d, g);
    const double delta = 0.1;
    CutoffField c = cutoff_chi(s, delta);
    EXPECT_FALSE(c.under_resolved);
    double maxslope = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            std::size_t k = g.idx(i, j);
            double v = c.chi[k], r = s.rho[k];
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            if (r <= delta) {
                EXPECT_EQ(v, 0.0);
            }
            if (r >= 2 * delta) {
                EXPECT_EQ(v, 1.0);
            }
            if (i + 1 < g.nx) maxslope = std::max(maxslope, std::abs(c.chi[g.idx(i + 1, j)] - v) / g.hx);
        }
    EXPECT_LE(maxslope, 2 / delta + 1e-9);
    EXPECT_TRUE(cutoff_chi(s, 0.03).under_resolved);
}

TEST(Erode, ZeroDiscAndEmpty)
{
    Grid g = Grid::covering(1.2, 1.2, 0.02);
    SignedDistanceField s = signed_distance(DomainSpec::disc(1), g);
    Mask2D in0 = erode(s, 0);
    Mask2D e = erode(s, 0.25);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            std::size_t k = g.idx(i, j);
            double r = std::hypot(g.x(i), g.y(j));
            EXPECT_EQ(bool(in0[k]), r < 1);
            if (r < 0.75 - g.hx) {
                EXPECT_TRUE(e[k]);
            }
            if (r > 0.75 + g.hx) {
                EXPECT_FALSE(e[k]);
            }
        }
    Mask2D none = erode(s, 1.0);
    for (auto b : none) EXPECT_FALSE(b);
}

TEST(Erode, Nesting)
{
    Grid g = Grid::covering(1.3, 0.8, 0.02);
    SignedDistanceField s = signed_distance(DomainSpec::rectangle(2.4, 1.4, 0.3), g);
    Mask2D prev = erode(s, 0);
    for (double d : {0.05, 0.1, 0.2, 0.4}) {
        Mask2D m = erode(s, d);
        for (std::size_t k = 0; k < m.size(); ++k)
            if (m[k]) {
                EXPECT_TRUE(prev[k]);
            }
        prev = m;
    }
}

TEST(Measures, AnalyticShapes)
{
    Measures d = measures(DomainSpec::disc(1));
    EXPECT_DOUBLE_EQ(d.area, pi);
    EXPECT_DOUBLE_EQ(d.perimeter, 2 * pi);
    Measures r = measures(DomainSpec::rectangle(2, 1, 0.1));
    EXPECT_NEAR(r.area, 2 - (4 - pi) * 0.01, 1e-14);
    EXPECT_NEAR(r.perimeter, 6 - 0.8 + 0.2 * pi, 1e-14);
    Measures a = measures(DomainSpec::annulus(1, 2));
    EXPECT_NEAR(a.area, 3 * pi, 1e-14);
    EXPECT_NEAR(a.perimeter, 6 * pi, 1e-14);
}

TEST(Measures, MaskDiscWithinReportedUncertainty)
{
    const int n = 200;
    const double sp = 2.2 / n;
    MaskBitmap m;
    m.nx = m.ny = n;
    m.spacing = sp;
    m.bits.resize(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            m.bits[j * n + i] = std::hypot((i + 0.5) * sp - 1.1, (j + 0.5) * sp - 1.1) < 1;
    Measures ms = measures(DomainSpec::from_mask(m));
    EXPECT_NEAR(ms.area, pi, std::max(ms.area_uncertainty, 2 * pi * sp));
    EXPECT_NEAR(ms.perimeter, 2 * pi, std::max(ms.perimeter_uncertainty, 0.01 * 2 * pi));
}

TEST(Discretize, ChannelIsPeriodicInY)
{
    Grid g = Grid::centered(40, 4, 0.05, 0.05);
    EXPECT_THROW(discretize(DomainSpec::channel(2, 0.2), g), std::invalid_argument);
    g.periodic_y = true;
    Domain d = discretize(DomainSpec::channel(2, 0.2), g);
    EXPECT_EQ(d.count(), g.size());
    EXPECT_NEAR(d.meas.perimeter, 0.4, 1e-14);
}
