#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "energy.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "minimize.hpp"
#include "verify.hpp"

namespace dpfilm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "0.25", "1e-3", "2^-6"
inline double parse_number(const std::string& s, const std::string& what = "number")
{
    auto fail = [&] { throw ConfigError(what + ": cannot parse '" + s + "' as a number"); };
    if (s.empty()) fail();
    auto caret = s.find('^');
    try {
        std::size_t pos = 0;
        if (caret != std::string::npos) {
            std::string b = s.substr(0, caret), e = s.substr(caret + 1);
            double base = std::stod(b, &pos);
            if (pos != b.size()) fail();
            double ex = std::stod(e, &pos);
            if (pos != e.size()) fail();
            return std::pow(base, ex);
        }
        double v = std::stod(s, &pos);
        if (pos != s.size()) fail();
        return v;
    } catch (const std::logic_error&) {
        fail();
    }
    return 0;
}

// "a..b:step" (inclusive, tolerant of rounding) or a comma list "a,b,c"
inline std::vector<double> parse_range(const std::string& s, const std::string& what = "range")
{
    std::vector<double> out;
    auto dots = s.find("..");
    if (dots != std::string::npos) {
        auto colon = s.find(':', dots);
        if (colon == std::string::npos) throw ConfigError(what + ": expected a..b:step, got '" + s + "'");
        double a = parse_number(s.substr(0, dots), what);
        double b = parse_number(s.substr(dots + 2, colon - dots - 2), what);
        double st = parse_number(s.substr(colon + 1), what);
        if (!(st > 0) || b < a) throw ConfigError(what + ": need step > 0 and a <= b in '" + s + "'");
        long n = std::lround(std::floor((b - a) / st + 1e-9));
        for (long i = 0; i <= n; ++i) out.push_back(a + double(i) * st);
        return out;
    }
    std::size_t start = 0;
    while (start <= s.size()) {
        auto c = s.find(',', start);
        std::string tok = s.substr(start, c == std::string::npos ? std::string::npos : c - start);
        out.push_back(parse_number(tok, what));
        if (c == std::string::npos) break;
        start = c + 1;
    }
    return out;
}

// Typed access to one JSON object with field-path diagnostics; unknown keys
// are rejected so typos do not pass silently.
class Block {
public:
    Block(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!allowed.count(it.key())) throw ConfigError("unknown field '" + field(it.key()) + "'");
    }

    bool has(const std::string& k) const { return j_.contains(k); }
    const json& raw(const std::string& k) const { return j_.at(k); }
    std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    double num(const std::string& k, double def) const
    {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) return parse_number(v.get<std::string>(), field(k));
        throw ConfigError("field '" + field(k) + "': expected a number");
    }
    double positive(const std::string& k, double def) const
    {
        double v = num(k, def);
        if (!(v > 0)) throw ConfigError("field '" + field(k) + "': must be > 0");
        return v;
    }
    long integer(const std::string& k, long def) const
    {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (!v.is_number_integer()) throw ConfigError("field '" + field(k) + "': expected an integer");
        return v.get<long>();
    }
    bool boolean(const std::string& k, bool def) const
    {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (!v.is_boolean()) throw ConfigError("field '" + field(k) + "': expected true or false");
        return v.get<bool>();
    }
    std::string str(const std::string& k, const std::string& def) const
    {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (!v.is_string()) throw ConfigError("field '" + field(k) + "': expected a string");
        return v.get<std::string>();
    }
    // array of numbers, or a range / list string
    std::vector<double> numbers(const std::string& k, std::vector<double> def) const
    {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (v.is_string()) return parse_range(v.get<std::string>(), field(k));
        if (v.is_number()) return {v.get<double>()};
        if (!v.is_array()) throw ConfigError("field '" + field(k) + "': expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i].is_number()) out.push_back(v[i].get<double>());
            else if (v[i].is_string()) out.push_back(parse_number(v[i].get<std::string>(), field(k)));
            else throw ConfigError("field '" + field(k) + "[" + std::to_string(i) + "]': expected a number");
        }
        return out;
    }
    std::vector<std::string> strings(const std::string& k, std::vector<std::string> def) const
    {
        if (!has(k)) return def;
        const json& v = j_.at(k);
        if (v.is_string()) return {v.get<std::string>()};
        if (!v.is_array()) throw ConfigError("field '" + field(k) + "': expected an array of strings");
        std::vector<std::string> out;
        for (auto& e : v) {
            if (!e.is_string()) throw ConfigError("field '" + field(k) + "': expected an array of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

private:
    std::string where() const { return path_.empty() ? "config" : "field '" + path_ + "'"; }
    const json& j_;
    std::string path_;
};

struct GridBlock {
    int nx = 0, ny = 0;   // 0: cover the domain
    double h = 0.05;
    double margin = -1;   // < 0: 4h
    bool periodic_x = false, periodic_y = false;
};

struct RunConfig {
    int schema_version = 1;
    std::optional<DomainSpec> domain;
    GridBlock grid;
    Params params;
    bool have_params = false;

    MinimizeConfig minimize;
    std::string energy = "reduced";  // reduced | rescaled (2D); plain | rescaled (3D)
    InitSpec init;
    int nz = 2;

    SweepConfig sweep;
    std::vector<double> sweep_eps{1.0 / 64};
    std::vector<double> lambdas;
    bool lambda_relative = false;  // lambdas in units of lambda_c

    std::vector<std::string> suite{"core"};
    int cases = 0;  // 0: each check's default

    GioiaConfig gioia;
    std::vector<double> gioia_deltas{0.4, 0.2, 0.1, 0.05};

    std::uint64_t seed = 1;
    bool seed_set = false;
    int padding = 2;
    int jobs = 0;
    std::string out = ".";
    std::filesystem::path base_dir;  // relative paths in the config resolve here
};

namespace detail {

inline DomainSpec parse_domain(const json& j, const std::filesystem::path& base)
{
    Block b(j, "domain",
            {"shape", "radius", "width", "height", "corner_radius", "r_in", "r_out", "period", "file", "center"});
    double cx = 0, cy = 0;
    if (b.has("center")) {
        auto c = b.numbers("center", {});
        if (c.size() != 2) throw ConfigError("field 'domain.center': expected [x, y]");
        cx = c[0];
        cy = c[1];
    }
    std::string shape = b.str("shape", "disc");
    try {
        if (shape == "disc") return DomainSpec::disc(b.positive("radius", 1), cx, cy);
        if (shape == "rectangle")
            return DomainSpec::rectangle(b.positive("width", 2), b.positive("height", 2),
                                         b.num("corner_radius", 0.1), cx, cy);
        if (shape == "annulus") return DomainSpec::annulus(b.num("r_in", 0.5), b.num("r_out", 1), cx, cy);
        if (shape == "channel") return DomainSpec::channel(b.positive("width", 2), b.positive("period", 1), cx, cy);
        if (shape == "mask") {
            if (!b.has("file")) throw ConfigError("field 'domain.file': required for mask domains");
            std::filesystem::path p = b.str("file", "");
            if (p.is_relative()) p = base / p;
            return DomainSpec::from_mask(read_pgm_file(p.string()), cx, cy);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("domain: ") + e.what());
    }
    throw ConfigError("field 'domain.shape': unknown shape '" + shape +
                      "' (disc, rectangle, annulus, channel, mask)");
}

inline Params parse_params(const json& j, const std::string& path)
{
    Block b(j, path, {"delta", "gamma", "alpha", "eps", "lambda", "rho_pin"});
    Params p;
    p.gamma = b.num("gamma", 0);
    if (p.gamma < 0) throw ConfigError("field '" + b.field("gamma") + "': must be >= 0");
    p.alpha = b.num("alpha", p.alpha);
    p.eps = b.num("eps", p.eps);
    p.lambda = b.num("lambda", 0);
    p.rho_pin = b.num("rho_pin", 0);
    if (b.has("lambda") && !b.has("delta")) {
        if (!(p.eps > 0 && p.eps < 1)) throw ConfigError("field '" + b.field("eps") + "': must lie in (0,1)");
        if (!(p.gamma > 0)) throw ConfigError("field '" + b.field("gamma") + "': lambda-driven runs need gamma > 0");
        p.delta = p.delta_from_lambda();
    } else {
        p.delta = b.num("delta", p.delta);
    }
    if (!(p.delta > 0)) throw ConfigError("field '" + b.field("delta") + "': must be > 0");
    double ad2 = p.alpha_value() * p.delta * p.delta;
    if (!(ad2 < 1))
        throw ConfigError("params: alpha*delta^2 = " + std::to_string(ad2) + " must be < 1");
    return p;
}

inline void parse_minimize(const json& j, RunConfig& rc)
{
    Block b(j, "minimize", {"max_iters", "grad_tol", "box", "pin", "rho_pin", "energy", "nz", "init"});
    MinimizeConfig& m = rc.minimize;
    m.max_iters = int(b.integer("max_iters", m.max_iters));
    if (m.max_iters < 1) throw ConfigError("field 'minimize.max_iters': must be >= 1");
    m.grad_tol = b.positive("grad_tol", m.grad_tol);
    m.box = b.boolean("box", m.box);
    m.pin = b.boolean("pin", m.pin);
    m.rho_pin = b.num("rho_pin", m.rho_pin);
    rc.energy = b.str("energy", rc.energy);
    if (rc.energy != "reduced" && rc.energy != "rescaled" && rc.energy != "plain")
        throw ConfigError("field 'minimize.energy': expected reduced, rescaled or plain");
    rc.nz = int(b.integer("nz", rc.nz));
    if (rc.nz < 1) throw ConfigError("field 'minimize.nz': must be >= 1");
    if (b.has("init")) {
        Block ib(b.raw("init"), "minimize.init",
                 {"kind", "value", "period", "angle", "phase_x", "period_y", "amplitude", "seed"});
        std::string k = ib.str("kind", "uniform");
        InitSpec& s = rc.init;
        if (k == "uniform") s.kind = InitKind::uniform;
        else if (k == "stripes") s.kind = InitKind::stripes;
        else if (k == "checkerboard") s.kind = InitKind::checkerboard;
        else if (k == "random") s.kind = InitKind::random;
        else throw ConfigError("field 'minimize.init.kind': unknown '" + k + "'");
        s.value = ib.num("value", s.value);
        s.period = ib.positive("period", s.period);
        s.angle = ib.num("angle", s.angle);
        s.phase_x = ib.num("phase_x", s.phase_x);
        s.period_y = ib.num("period_y", s.period_y);
        s.amplitude = ib.num("amplitude", s.amplitude);
        if (ib.has("seed")) s.seed = std::uint64_t(ib.integer("seed", 1));
    }
}

inline void parse_sweep(const json& j, RunConfig& rc)
{
    Block b(j, "sweep",
            {"eps", "gamma", "width", "rho_pin", "ny", "cells_per_eps", "bisect_steps", "lambda",
             "lambda_units", "early_certify", "max_iters", "stripe_counts"});
    SweepConfig& s = rc.sweep;
    rc.sweep_eps = b.numbers("eps", rc.sweep_eps);
    for (double e : rc.sweep_eps)
        if (!(e > 0 && e < 1)) throw ConfigError("field 'sweep.eps': values must lie in (0,1)");
    s.gamma = b.positive("gamma", s.gamma);
    s.width = b.positive("width", s.width);
    s.rho_pin = b.num("rho_pin", s.rho_pin);
    if (!(s.rho_pin >= 0 && 2 * s.rho_pin < s.width))
        throw ConfigError("field 'sweep.rho_pin': need 0 <= rho_pin < width/2");
    s.ny = int(b.integer("ny", s.ny));
    if (s.ny < 1) throw ConfigError("field 'sweep.ny': must be >= 1");
    s.cells_per_eps = b.positive("cells_per_eps", s.cells_per_eps);
    s.bisect_steps = int(b.integer("bisect_steps", s.bisect_steps));
    s.early_certify = b.boolean("early_certify", s.early_certify);
    s.minimize.max_iters = int(b.integer("max_iters", s.minimize.max_iters));
    if (b.has("stripe_counts")) {
        s.stripe_counts.clear();
        for (double v : b.numbers("stripe_counts", {})) s.stripe_counts.push_back(int(v));
    }
    rc.lambdas = b.numbers("lambda", rc.lambdas);
    std::string units = b.str("lambda_units", "absolute");
    if (units == "lambda_c") rc.lambda_relative = true;
    else if (units != "absolute") throw ConfigError("field 'sweep.lambda_units': expected absolute or lambda_c");
}

inline void parse_verify(const json& j, RunConfig& rc)
{
    Block b(j, "verify", {"suite", "cases"});
    rc.suite = b.strings("suite", rc.suite);
    rc.cases = int(b.integer("cases", 0));
    if (rc.cases < 0) throw ConfigError("field 'verify.cases': must be >= 0");
}

inline void parse_gioia(const json& j, RunConfig& rc)
{
    Block b(j, "gioia", {"deltas", "radius", "gamma", "h", "nz", "init_value", "max_iters"});
    GioiaConfig& g = rc.gioia;
    rc.gioia_deltas = b.numbers("deltas", rc.gioia_deltas);
    for (double d : rc.gioia_deltas)
        if (!(d > 0)) throw ConfigError("field 'gioia.deltas': values must be > 0");
    g.radius = b.positive("radius", g.radius);
    g.gamma = b.num("gamma", g.gamma);
    g.h = b.positive("h", g.h);
    g.nz = int(b.integer("nz", g.nz));
    if (g.nz < 1) throw ConfigError("field 'gioia.nz': must be >= 1");
    g.init_value = b.num("init_value", g.init_value);
    g.minimize.max_iters = int(b.integer("max_iters", g.minimize.max_iters));
}

}  // namespace detail

inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir = ".")
{
    Block b(j, "",
            {"schema_version", "domain", "grid", "params", "minimize", "sweep", "verify", "gioia", "seed",
             "padding", "jobs", "out"});
    RunConfig rc;
    rc.base_dir = base_dir;
    if (!b.has("schema_version")) throw ConfigError("field 'schema_version': required (current version is 1)");
    rc.schema_version = int(b.integer("schema_version", 1));
    if (rc.schema_version != 1)
        throw ConfigError("field 'schema_version': unsupported version " + std::to_string(rc.schema_version));
    if (b.has("domain")) rc.domain = detail::parse_domain(b.raw("domain"), base_dir);
    if (b.has("grid")) {
        Block g(b.raw("grid"), "grid", {"nx", "ny", "h", "margin", "periodic_x", "periodic_y"});
        rc.grid.nx = int(g.integer("nx", 0));
        rc.grid.ny = int(g.integer("ny", 0));
        if (rc.grid.nx < 0 || rc.grid.ny < 0 || (rc.grid.nx == 0) != (rc.grid.ny == 0))
            throw ConfigError("field 'grid.nx'/'grid.ny': give both (> 0) or neither");
        rc.grid.h = g.positive("h", rc.grid.h);
        rc.grid.margin = g.num("margin", rc.grid.margin);
        rc.grid.periodic_x = g.boolean("periodic_x", false);
        rc.grid.periodic_y = g.boolean("periodic_y", false);
    }
    if (b.has("params")) {
        rc.params = detail::parse_params(b.raw("params"), "params");
        rc.have_params = true;
    }
    if (b.has("minimize")) detail::parse_minimize(b.raw("minimize"), rc);
    if (b.has("sweep")) detail::parse_sweep(b.raw("sweep"), rc);
    if (b.has("verify")) detail::parse_verify(b.raw("verify"), rc);
    if (b.has("gioia")) detail::parse_gioia(b.raw("gioia"), rc);
    if (b.has("seed")) {
        long s = b.integer("seed", 1);
        if (s < 0) throw ConfigError("field 'seed': must be >= 0");
        rc.seed = std::uint64_t(s);
        rc.seed_set = true;
    }
    rc.padding = int(b.integer("padding", rc.padding));
    if (rc.padding < 1) throw ConfigError("field 'padding': must be >= 1");
    rc.jobs = int(b.integer("jobs", 0));
    rc.out = b.str("out", rc.out);
    return rc;
}

// Parse errors carry nlohmann's line/column message.
inline json load_json_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline RunConfig load_config(const std::string& path)
{
    std::filesystem::path p(path);
    return parse_config(load_json_file(path), p.has_parent_path() ? p.parent_path() : ".");
}

// Grid for the configured domain: explicit nx/ny centred on the domain, or
// the smallest box with spacing h covering D plus the margin.
inline Grid make_grid(const RunConfig& rc, const DomainSpec& d)
{
    const GridBlock& gb = rc.grid;
    double h = d.shape == Shape::mask ? d.mask.spacing : gb.h;
    Grid g;
    if (gb.nx > 0) {
        g = Grid::centered(gb.nx, gb.ny, h, h, d.cx, d.cy);
    } else if (d.shape == Shape::channel) {
        int nx = int(std::ceil(d.width / h - 1e-9));
        int ny = int(std::lround(d.period / h));
        if (std::abs(ny * h - d.period) > 1e-9 * d.period)
            throw ConfigError("grid: channel period must be a multiple of grid.h");
        g = Grid::centered(nx, ny, h, h, d.cx, d.cy);
    } else {
        double m = gb.margin < 0 ? 4 * h : gb.margin;
        g = Grid::covering(d.half_w() + m, d.half_h() + m, h, d.cx, d.cy);
        if (d.shape == Shape::mask) {
            // keep cells aligned with pixels: same parity as the mask
            if ((g.nx - d.mask.nx) % 2) g = Grid::centered(g.nx + 1, g.ny, h, h, d.cx, d.cy);
            if ((g.ny - d.mask.ny) % 2) g = Grid::centered(g.nx, g.ny + 1, h, h, d.cx, d.cy);
        }
    }
    g.periodic_x = gb.periodic_x;
    g.periodic_y = gb.periodic_y || d.shape == Shape::channel;
    return g;
}

}  // namespace dpfilm
