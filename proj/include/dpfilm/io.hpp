#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "energy.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "minimize.hpp"
#include "verify.hpp"

namespace dpfilm {

using json = nlohmann::json;

// ---- flat binary fields ----
//
// "DPFILM01", u32 rank (2|3), u32 dims (x, y[, z]), f64 spacings (hx, hy[, dz]),
// f64 samples with z outermost and x fastest. All little-endian.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v)
{
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double d)
{
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& is)
{
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("field file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is)
{
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("field file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

constexpr char field_magic[9] = "DPFILM01";

}  // namespace detail

inline void write_field(std::ostream& os, const Field2D& f)
{
    os.write(detail::field_magic, 8);
    detail::put_u32(os, 2);
    detail::put_u32(os, std::uint32_t(f.grid.nx));
    detail::put_u32(os, std::uint32_t(f.grid.ny));
    detail::put_f64(os, f.grid.hx);
    detail::put_f64(os, f.grid.hy);
    for (double v : f.v) detail::put_f64(os, v);
}

inline void write_field(std::ostream& os, const Field3D& f)
{
    os.write(detail::field_magic, 8);
    detail::put_u32(os, 3);
    detail::put_u32(os, std::uint32_t(f.grid.nx));
    detail::put_u32(os, std::uint32_t(f.grid.ny));
    detail::put_u32(os, std::uint32_t(f.nz));
    detail::put_f64(os, f.grid.hx);
    detail::put_f64(os, f.grid.hy);
    detail::put_f64(os, f.dz());
    for (double v : f.v) detail::put_f64(os, v);
}

// Either rank; the grid comes back centred on the origin, non-periodic.
struct FieldFile {
    int rank = 2;
    Field2D f2;
    Field3D f3;
};

inline FieldFile read_field(std::istream& is)
{
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, detail::field_magic, 8) != 0)
        throw std::runtime_error("not a DPFILM01 field file");
    FieldFile out;
    std::uint32_t rank = detail::get_u32(is);
    if (rank != 2 && rank != 3) throw std::runtime_error("field file: rank must be 2 or 3, got " + std::to_string(rank));
    out.rank = int(rank);
    std::array<std::uint32_t, 3> dims{1, 1, 1};
    std::array<double, 3> sp{1, 1, 1};
    for (std::uint32_t a = 0; a < rank; ++a) dims[a] = detail::get_u32(is);
    for (std::uint32_t a = 0; a < rank; ++a) sp[a] = detail::get_f64(is);
    for (std::uint32_t a = 0; a < rank; ++a) {
        if (dims[a] == 0 || dims[a] > (1u << 20)) throw std::runtime_error("field file: bad dimension");
        if (!(sp[a] > 0) || !std::isfinite(sp[a])) throw std::runtime_error("field file: bad spacing");
    }
    Grid g = Grid::centered(int(dims[0]), int(dims[1]), sp[0], sp[1]);
    std::size_t n = std::size_t(dims[0]) * dims[1] * dims[2];
    std::vector<double> v(n);
    for (auto& x : v) x = detail::get_f64(is);
    if (rank == 2) {
        out.f2 = Field2D(g);
        out.f2.v = std::move(v);
    } else {
        out.f3 = Field3D(g, int(dims[2]), sp[2] * dims[2]);
        out.f3.v = std::move(v);
    }
    return out;
}

inline void write_field_file(const std::string& path, const Field2D& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_field(os, f);
}

inline void write_field_file(const std::string& path, const Field3D& f)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_field(os, f);
}

inline FieldFile read_field_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_field(is);
}

// ---- PGM masks ----
// P5, maxval <= 255, a "# spacing <h>" comment in the header. Row 0 of the
// image is the top (highest y). Pixels must be 0 or maxval.

inline MaskBitmap read_pgm(std::istream& is)
{
    std::string magic;
    is >> magic;
    if (magic != "P5") throw std::runtime_error("mask: only binary PGM (P5) is supported");
    double spacing = std::numeric_limits<double>::quiet_NaN();
    std::vector<long> vals;
    while (vals.size() < 3) {
        is >> std::ws;
        if (is.peek() == '#') {
            std::string line;
            std::getline(is, line);
            std::istringstream ls(line.substr(1));
            std::string key;
            double h;
            if (ls >> key >> h && key == "spacing") spacing = h;
            continue;
        }
        long v;
        if (!(is >> v)) throw std::runtime_error("mask: malformed PGM header");
        vals.push_back(v);
    }
    is.get();  // single whitespace before the raster
    long w = vals[0], hgt = vals[1], maxval = vals[2];
    if (w <= 0 || hgt <= 0 || maxval <= 0 || maxval > 255) throw std::runtime_error("mask: bad PGM dimensions or maxval");
    if (!(spacing > 0)) throw std::runtime_error("mask: PGM header needs a '# spacing <h>' comment");
    std::vector<unsigned char> raw(std::size_t(w) * hgt);
    if (!is.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size())))
        throw std::runtime_error("mask: PGM raster truncated");
    MaskBitmap m;
    m.nx = int(w);
    m.ny = int(hgt);
    m.spacing = spacing;
    m.bits.resize(raw.size());
    for (long r = 0; r < hgt; ++r)
        for (long c = 0; c < w; ++c) {
            unsigned char p = raw[std::size_t(r) * w + c];
            if (p != 0 && p != maxval) {
                std::ostringstream os;
                os << "mask: pixel (" << c << "," << r << ") = " << int(p) << " is neither 0 nor " << maxval;
                throw std::runtime_error(os.str());
            }
            m.bits[std::size_t(hgt - 1 - r) * w + c] = p != 0;
        }
    return m;
}

inline void write_pgm(std::ostream& os, const MaskBitmap& m)
{
    os << "P5\n# spacing " << std::setprecision(17) << m.spacing << "\n" << m.nx << " " << m.ny << "\n255\n";
    for (int r = 0; r < m.ny; ++r)
        for (int c = 0; c < m.nx; ++c) os.put(m.at(c, m.ny - 1 - r) ? char(255) : char(0));
}

inline MaskBitmap read_pgm_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_pgm(is);
}

// ---- JSON ----

inline json to_json(const EnergyBreakdown& e)
{
    return {{"dirichlet", e.dirichlet},
            {"double_well", e.double_well},
            {"nonlocal", e.nonlocal},
            {"field_term", e.field_term},
            {"total", e.total}};
}

inline json to_json(const CheckReport& r)
{
    json cases = json::array();
    for (const auto& c : r.cases) {
        json j = {{"family", c.family}, {"seed", c.seed}, {"grid", {c.nx, c.ny, c.nz}},
                  {"delta", c.delta},   {"gamma", c.gamma}, {"lhs", c.lhs},
                  {"rhs", c.rhs},       {"ratio", c.ratio}};
        for (auto& [k, v] : c.extra) j[k] = v;
        cases.push_back(j);
    }
    return {{"check", r.name}, {"tol", r.tol}, {"worst_ratio", r.worst}, {"pass", r.pass},
            {"notes", r.notes}, {"cases", cases}};
}

inline json to_json(const SweepPoint& p)
{
    return {{"lambda", p.lambda},
            {"eps", p.eps},
            {"best_energy", p.best_energy},
            {"uniform_energy", p.uniform_energy},
            {"modulated", p.modulated},
            {"interface_length", p.interface_length},
            {"iterations", p.iterations},
            {"converged", p.converged},
            {"all_converged", p.all_converged},
            {"certified", p.certified},
            {"best_init", p.best_init},
            {"cutoff_under_resolved", p.cutoff_under_resolved}};
}

inline json to_json(const SweepRecord& r)
{
    json pts = json::array();
    for (const auto& p : r.points) pts.push_back(to_json(p));
    return {{"crossing_found", r.crossing_found},
            {"lambda_star", r.lambda_star},
            {"lambda_star_over_lambda_c", r.lambda_star / lambda_c},
            {"bracket", {r.bracket_lo, r.bracket_hi}},
            {"points", pts}};
}

inline json to_json(const MinimizeResult& r)
{
    return {{"energy", to_json(r.energy)}, {"iterations", r.iterations}, {"pg_norm", r.pg_norm},
            {"converged", r.converged},    {"status", r.status}};
}

inline json to_json(const GioiaPoint& p)
{
    return {{"delta", p.delta},
            {"deviation", p.deviation},
            {"energy_per_delta", p.energy_per_delta},
            {"iterations", p.iterations},
            {"converged", p.converged}};
}

// ---- CSV ----

namespace detail {

inline std::string num(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

// lambda,eps,best_energy,modulated,interface_length,iterations,converged
inline void write_sweep_csv(std::ostream& os, const SweepRecord& r, bool header = true)
{
    if (header) os << "lambda,eps,best_energy,modulated,interface_length,iterations,converged\n";
    for (const auto& p : r.points)
        os << detail::num(p.lambda) << ',' << detail::num(p.eps) << ',' << detail::num(p.best_energy) << ','
           << int(p.modulated) << ',' << detail::num(p.interface_length) << ',' << p.iterations << ','
           << int(p.converged) << '\n';
}

// check,cases,worst_ratio,tol,pass
inline void write_check_summary_csv(std::ostream& os, const std::vector<CheckReport>& reps)
{
    os << "check,cases,worst_ratio,tol,pass\n";
    for (const auto& r : reps)
        os << r.name << ',' << r.cases.size() << ',' << detail::num(r.worst) << ',' << detail::num(r.tol) << ','
           << int(r.pass) << '\n';
}

// delta,deviation,energy_per_delta,iterations,converged
inline void write_gioia_csv(std::ostream& os, const std::vector<GioiaPoint>& pts)
{
    os << "delta,deviation,energy_per_delta,iterations,converged\n";
    for (const auto& p : pts)
        os << detail::num(p.delta) << ',' << detail::num(p.deviation) << ',' << detail::num(p.energy_per_delta)
           << ',' << p.iterations << ',' << int(p.converged) << '\n';
}

}  // namespace dpfilm
