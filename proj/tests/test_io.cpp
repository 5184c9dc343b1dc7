#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "dpfilm/config.hpp"
#include "dpfilm/io.hpp"
#include "dpfilm/rng.hpp"

using namespace dpfilm;

namespace {

template <class Fn>
std::string error_of(Fn&& fn)
{
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

RunConfig parse(const std::string& text) { return parse_config(json::parse(text)); }

}  // namespace

TEST(FieldFile, RoundTrip2DIsBitExact)
{
    Grid g = Grid::centered(7, 5, 0.125, 0.25);
    Field2D f(g);
    SplitMix64 rng(3);
    for (double& v : f.v) v = rng.normal();
    f.v[0] = -0.0;
    f.v[1] = std::numeric_limits<double>::denorm_min();
    std::stringstream ss;
    write_field(ss, f);
    FieldFile r = read_field(ss);
    ASSERT_EQ(r.rank, 2);
    EXPECT_EQ(r.f2.grid.nx, 7);
    EXPECT_EQ(r.f2.grid.ny, 5);
    EXPECT_EQ(r.f2.grid.hx, 0.125);
    EXPECT_EQ(r.f2.grid.hy, 0.25);
    ASSERT_EQ(r.f2.v.size(), f.v.size());
    EXPECT_EQ(std::memcmp(r.f2.v.data(), f.v.data(), f.v.size() * sizeof(double)), 0);
}

TEST(FieldFile, RoundTrip3DIsBitExact)
{
    Grid g = Grid::centered(4, 6, 0.1, 0.1);
    Field3D s(g, 3, 0.3);
    SplitMix64 rng(4);
    for (double& v : s.v) v = rng.uniform(-1, 1);
    std::stringstream ss;
    write_field(ss, s);
    FieldFile r = read_field(ss);
    ASSERT_EQ(r.rank, 3);
    EXPECT_EQ(r.f3.nz, 3);
    EXPECT_NEAR(r.f3.delta, 0.3, 1e-15);
    EXPECT_EQ(r.f3.v, s.v);
}

TEST(FieldFile, LayoutIsLittleEndianXFastest)
{
    Grid g = Grid::centered(2, 1, 1, 1);
    Field2D f(g);
    f.v = {1.0, 2.0};
    std::stringstream ss;
    write_field(ss, f);
    std::string b = ss.str();
    ASSERT_EQ(b.size(), 8u + 4 + 8 + 16 + 16);
    EXPECT_EQ(b.substr(0, 8), "DPFILM01");
    EXPECT_EQ(b[8], 2);
    EXPECT_EQ(b[12], 2);
    EXPECT_EQ(b[16], 1);
    // 1.0 = 0x3FF0000000000000, low byte first
    EXPECT_EQ(static_cast<unsigned char>(b[36 + 7]), 0x3F);
    EXPECT_EQ(static_cast<unsigned char>(b[36 + 6]), 0xF0);
}

TEST(FieldFile, RejectsCorruptInput)
{
    std::stringstream bad("NOTAFILE");
    EXPECT_THROW(read_field(bad), std::runtime_error);
    Grid g = Grid::centered(3, 3, 0.1, 0.1);
    std::stringstream ss;
    write_field(ss, Field2D(g));
    std::string b = ss.str();
    std::stringstream trunc(b.substr(0, b.size() - 5));
    EXPECT_THROW(read_field(trunc), std::runtime_error);
    std::string r = b;
    r[8] = 4;
    std::stringstream rk(r);
    EXPECT_NE(error_of([&] { read_field(rk); }).find("rank"), std::string::npos);
}

TEST(Pgm, RoundTripAndOrientation)
{
    MaskBitmap m;
    m.nx = 5;
    m.ny = 3;
    m.spacing = 0.02;
    m.bits.assign(15, 0);
    m.bits[0] = 1;                   // bottom-left pixel
    m.bits[std::size_t(2) * 5 + 4] = 1;  // top-right pixel
    std::stringstream ss;
    write_pgm(ss, m);
    std::string text = ss.str();
    // image row 0 is the top: its last pixel is set
    std::size_t raster = text.size() - 15;
    EXPECT_EQ(static_cast<unsigned char>(text[raster + 4]), 255);
    EXPECT_EQ(static_cast<unsigned char>(text[raster + 10]), 255);
    MaskBitmap r = read_pgm(ss);
    EXPECT_EQ(r.nx, 5);
    EXPECT_EQ(r.ny, 3);
    EXPECT_EQ(r.spacing, 0.02);
    EXPECT_EQ(r.bits, m.bits);
}

TEST(Pgm, Rejections)
{
    std::stringstream p2("P2\n# spacing 1\n2 2\n255\n0 0 0 0\n");
    EXPECT_NE(error_of([&] { read_pgm(p2); }).find("P5"), std::string::npos);
    std::stringstream nosp("P5\n2 1\n255\n\xff\xff");
    EXPECT_NE(error_of([&] { read_pgm(nosp); }).find("spacing"), std::string::npos);
    std::stringstream grey("P5\n# spacing 0.5\n2 1\n255\n\xff\x80");
    std::string e = error_of([&] { read_pgm(grey); });
    EXPECT_NE(e.find("pixel (1,0)"), std::string::npos) << e;
    std::stringstream shortr("P5\n# spacing 0.5\n4 4\n255\n\xff");
    EXPECT_NE(error_of([&] { read_pgm(shortr); }).find("truncated"), std::string::npos);
}

TEST(Numbers, ParseNumberForms)
{
    EXPECT_EQ(parse_number("0.25"), 0.25);
    EXPECT_EQ(parse_number("1e-3"), 1e-3);
    EXPECT_EQ(parse_number("2^-6"), 1.0 / 64);
    EXPECT_THROW(parse_number("abc"), ConfigError);
    EXPECT_THROW(parse_number("1.5x"), ConfigError);
    EXPECT_THROW(parse_number(""), ConfigError);
    EXPECT_THROW(parse_number("2^"), ConfigError);
}

TEST(Numbers, ParseRangeForms)
{
    auto a = parse_range("1.5..6:1.5");
    ASSERT_EQ(a.size(), 4u);
    EXPECT_DOUBLE_EQ(a.back(), 6);
    auto b = parse_range("0..1:0.1");
    EXPECT_EQ(b.size(), 11u);
    auto c = parse_range("2^-4,2^-5,0.01");
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[1], 1.0 / 32);
    EXPECT_THROW(parse_range("1..2"), ConfigError);
    EXPECT_THROW(parse_range("2..1:0.1"), ConfigError);
    EXPECT_THROW(parse_range("1,,2"), ConfigError);
}

TEST(Config, MinimalAndDefaults)
{
    RunConfig rc = parse(R"({"schema_version": 1})");
    EXPECT_FALSE(rc.domain.has_value());
    EXPECT_FALSE(rc.have_params);
    EXPECT_EQ(rc.padding, 2);
    EXPECT_FALSE(rc.seed_set);
}

TEST(Config, FullDocument)
{
    RunConfig rc = parse(R"({
        "schema_version": 1,
        "domain": {"shape": "rectangle", "width": 3, "height": 2, "corner_radius": 0.2, "center": [1, -1]},
        "grid": {"h": 0.05},
        "params": {"delta": 0.2, "gamma": 1.5},
        "minimize": {"max_iters": 500, "grad_tol": 1e-7, "energy": "rescaled", "nz": 3,
                     "init": {"kind": "stripes", "period": 0.5}},
        "seed": 9, "padding": 4, "out": "o"
    })");
    ASSERT_TRUE(rc.domain.has_value());
    EXPECT_EQ(rc.domain->shape, Shape::rectangle);
    EXPECT_EQ(rc.domain->cx, 1);
    EXPECT_EQ(rc.params.gamma, 1.5);
    EXPECT_EQ(rc.minimize.max_iters, 500);
    EXPECT_EQ(rc.energy, "rescaled");
    EXPECT_EQ(rc.nz, 3);
    EXPECT_EQ(rc.init.kind, InitKind::stripes);
    EXPECT_TRUE(rc.seed_set);
    EXPECT_EQ(rc.seed, 9u);
    Grid g = make_grid(rc, *rc.domain);
    EXPECT_NEAR(g.x0 + 0.5 * g.lx(), 1, 1e-12);
    EXPECT_GE(g.lx(), 3 + 8 * 0.05 - 1e-9);
}

TEST(Config, LambdaDrivenDelta)
{
    RunConfig rc = parse(R"({"schema_version": 1, "params": {"lambda": 2, "gamma": 4, "eps": 0.125}})");
    EXPECT_NEAR(rc.params.delta, 2 / (4 * std::log(8.0)), 1e-15);
}

TEST(Config, ErrorsNameTheField)
{
    EXPECT_NE(error_of([] { parse(R"({"schema_version": 1, "grid": {"nxx": 4}})"); }).find("grid.nxx"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse(R"({"schema_version": 1, "params": {"delta": "abc"}})"); }).find("params.delta"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse(R"({})"); }).find("schema_version"), std::string::npos);
    EXPECT_NE(error_of([] { parse(R"({"schema_version": 2})"); }).find("unsupported"), std::string::npos);
    EXPECT_NE(error_of([] { parse(R"({"schema_version": 1, "params": {"delta": 0.9, "gamma": 2}})"); })
                  .find("alpha*delta^2"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse(R"({"schema_version": 1, "domain": {"shape": "hexagon"}})"); }).find("hexagon"),
              std::string::npos);
    EXPECT_THROW(parse(R"({"schema_version": 1, "padding": 0})"), ConfigError);
    EXPECT_THROW(parse(R"({"schema_version": 1, "grid": {"nx": 4}})"), ConfigError);
}

TEST(Config, ChannelGridNeedsCommensuratePeriod)
{
    RunConfig rc = parse(R"({"schema_version": 1, "domain": {"shape": "channel", "width": 2, "period": 0.33},
                             "grid": {"h": 0.05}})");
    EXPECT_THROW(make_grid(rc, *rc.domain), ConfigError);
    RunConfig ok = parse(R"({"schema_version": 1, "domain": {"shape": "channel", "width": 2, "period": 0.2},
                             "grid": {"h": 0.05}})");
    Grid g = make_grid(ok, *ok.domain);
    EXPECT_TRUE(g.periodic_y);
    EXPECT_EQ(g.ny, 4);
    EXPECT_EQ(g.nx, 40);
}

TEST(Config, JsonSyntaxErrorHasPosition)
{
    std::string path = ::testing::TempDir() + "dpfilm_bad.json";
    {
        std::ofstream os(path);
        os << "{\n  \"schema_version\": 1,\n  \"seed\": ,\n}\n";
    }
    std::string e = error_of([&] { load_config(path); });
    EXPECT_NE(e.find("line 3"), std::string::npos) << e;
}

TEST(Output, CsvAndJsonAreDeterministic)
{
    SweepRecord rec;
    SweepPoint p;
    p.lambda = 0.1;
    p.eps = 1.0 / 64;
    p.best_energy = -1.0 / 3;
    p.modulated = true;
    p.interface_length = 2;
    p.iterations = 17;
    p.converged = true;
    rec.points = {p, p};
    std::ostringstream a, b;
    write_sweep_csv(a, rec);
    write_sweep_csv(b, rec);
    EXPECT_EQ(a.str(), b.str());
    std::istringstream lines(a.str());
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    EXPECT_EQ(header, "lambda,eps,best_energy,modulated,interface_length,iterations,converged");
    EXPECT_EQ(row, "0.10000000000000001,0.015625,-0.33333333333333331,1,2,17,1");
    // full precision survives a text round trip
    EXPECT_EQ(std::stod("-0.33333333333333331"), -1.0 / 3);
    EXPECT_EQ(to_json(rec).dump(), to_json(rec).dump());

    CheckReport r;
    r.name = "ded";
    r.tol = 1e-6;
    CheckCase c;
    c.ratio = 0.5;
    r.cases = {c};
    r.finalize();
    std::ostringstream cs;
    write_check_summary_csv(cs, {r});
    EXPECT_EQ(cs.str(), "check,cases,worst_ratio,tol,pass\nded,1,0.5,9.9999999999999995e-07,1\n");
    json j = to_json(r);
    EXPECT_EQ(j["check"], "ded");
    EXPECT_EQ(j["pass"], true);

    std::ostringstream gs;
    write_gioia_csv(gs, {GioiaPoint{0.4, 0.25, -1, 10, true}});
    EXPECT_EQ(gs.str(), "delta,deviation,energy_per_delta,iterations,converged\n0.40000000000000002,0.25,-1,10,1\n");
}

TEST(Output, EnergyJsonFields)
{
    EnergyBreakdown e{1, 2, -3, 0.5, 0};
    e.close();
    json j = to_json(e);
    EXPECT_EQ(j["total"], 0.5);
    EXPECT_EQ(j["nonlocal"], -3);
}
