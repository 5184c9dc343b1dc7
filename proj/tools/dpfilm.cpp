// dpfilm: batch front-end for the thin-film library.
//
// exit codes: 0 ok, 1 a check failed or a run did not converge, 2 bad input

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpfilm/config.hpp"
#include "dpfilm/energy.hpp"
#include "dpfilm/io.hpp"
#include "dpfilm/minimize.hpp"
#include "dpfilm/parallel.hpp"
#include "dpfilm/verify.hpp"

namespace fs = std::filesystem;
using namespace dpfilm;

namespace {

struct Common {
    std::string config;
    std::string out;
    int jobs = 0;
    std::optional<std::uint64_t> seed;
    std::optional<int> padding;
};

struct Ctx {
    RunConfig rc;
    fs::path out;
    int jobs = 1;
};

Ctx make_ctx(const Common& c)
{
    Ctx x;
    if (!c.config.empty()) x.rc = load_config(c.config);
    if (c.seed) {
        x.rc.seed = *c.seed;
        x.rc.seed_set = true;
    }
    if (c.padding) {
        if (*c.padding < 1) throw ConfigError("--padding must be >= 1");
        x.rc.padding = *c.padding;
    }
    x.out = c.out.empty() ? fs::path(x.rc.out) : fs::path(c.out);
    fs::create_directories(x.out);
    x.jobs = resolve_jobs(c.jobs > 0 ? c.jobs : x.rc.jobs);
    return x;
}

void write_text(const fs::path& p, const std::string& s)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << s;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// support of the field as a mask domain, for field files without a config domain
Domain support_domain(const Grid& g, const std::vector<double>& v)
{
    if (g.hx != g.hy) throw ConfigError("field has hx != hy; give a domain in --config");
    MaskBitmap m;
    m.nx = g.nx;
    m.ny = g.ny;
    m.spacing = g.hx;
    m.bits.assign(g.size(), 0);
    for (std::size_t k = 0; k < g.size(); ++k) m.bits[k] = v[k] != 0;
    return discretize(DomainSpec::from_mask(m, g.x0 + 0.5 * g.lx(), g.y0 + 0.5 * g.ly()), g);
}

Domain config_domain(const RunConfig& rc)
{
    if (!rc.domain) throw ConfigError("field 'domain': required for this subcommand");
    Grid g = make_grid(rc, *rc.domain);
    try {
        return discretize(*rc.domain, g);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("domain/grid: ") + e.what());
    }
}

// field-file grid placed on the configured domain's centre
Grid place(Grid g, const RunConfig& rc)
{
    if (!rc.domain) return g;
    g = Grid::centered(g.nx, g.ny, g.hx, g.hy, rc.domain->cx, rc.domain->cy);
    g.periodic_x = rc.grid.periodic_x;
    g.periodic_y = rc.grid.periodic_y || rc.domain->shape == Shape::channel;
    return g;
}

Params load_params(const std::string& path, RunConfig& rc)
{
    if (path.empty()) {
        if (!rc.have_params) throw ConfigError("field 'params': required (or pass --params)");
        return rc.params;
    }
    json j = load_json_file(path);
    if (j.is_object() && j.contains("schema_version")) {
        fs::path p(path);
        RunConfig pc = parse_config(j, p.has_parent_path() ? p.parent_path() : ".");
        if (!pc.have_params) throw ConfigError(path + ": no 'params' block");
        if (pc.domain && !rc.domain) rc.domain = pc.domain;
        return pc.params;
    }
    return detail::parse_params(j, "params");
}

json params_json(const Params& p)
{
    json j = {{"delta", p.delta}, {"gamma", p.gamma}, {"alpha", p.alpha_value()}};
    if (p.lambda != 0) {
        j["lambda"] = p.lambda;
        j["eps"] = p.eps;
    }
    return j;
}

// ---- energy ----

int cmd_energy(const Common& c, const std::string& field, const std::string& params_path)
{
    Ctx x = make_ctx(c);
    Params prm = load_params(params_path, x.rc);
    FieldFile ff = read_field_file(field);
    json out;
    out["params"] = params_json(prm);
    if (ff.rank == 2) {
        Field2D phi(place(ff.f2.grid, x.rc));
        phi.v = ff.f2.v;
        Domain dom = x.rc.domain ? discretize(*x.rc.domain, phi.grid) : support_domain(phi.grid, phi.v);
        CutoffField chi = cutoff_chi(dom.sdf, prm.delta);
        out["rank"] = 2;
        out["reduced"] = to_json(reduced_energy(phi, prm, dom, chi, x.rc.padding));
        out["E0"] = local_energy_E0(phi, dom);
        out["interface_length"] = interface_length(phi, dom);
        out["cutoff_under_resolved"] = chi.under_resolved;
        if (prm.lambda != 0) {
            CutoffField ce = cutoff_chi(dom.sdf, eps_cutoff_length(prm));
            out["rescaled"] = to_json(rescaled_energy_Eeps(phi, prm, dom, ce, x.rc.padding));
        }
    } else {
        Field3D st = ff.f3;
        st.grid = place(st.grid, x.rc);
        Domain dom = x.rc.domain ? discretize(*x.rc.domain, st.grid) : support_domain(st.grid, st.v);
        out["rank"] = 3;
        out["delta"] = st.delta;
        out["energy3d"] = to_json(full_energy_3d(st, prm, dom.inside, nullptr, x.rc.padding));
    }
    write_json(x.out / "energy.json", out);
    std::cout << out.dump(2) << "\n";
    return 0;
}

// ---- minimize ----

Field2D initial_2d(const Ctx& x, const Domain& dom, const MinimizeConfig& mc, const std::string& init_field)
{
    if (init_field.empty()) {
        InitSpec s = x.rc.init;
        if (s.kind == InitKind::random) s.seed = x.rc.seed;
        return make_init(s, dom, mc);
    }
    FieldFile ff = read_field_file(init_field);
    if (ff.rank != 2) throw ConfigError("--field: expected a rank-2 field");
    if (ff.f2.grid.nx != dom.grid.nx || ff.f2.grid.ny != dom.grid.ny)
        throw ConfigError("--field: grid " + std::to_string(ff.f2.grid.nx) + "x" + std::to_string(ff.f2.grid.ny) +
                          " does not match the configured grid " + std::to_string(dom.grid.nx) + "x" +
                          std::to_string(dom.grid.ny));
    Field2D f(dom.grid);
    f.v = ff.f2.v;
    return f;
}

MinimizeConfig effective_minimize(const RunConfig& rc, const Params& prm)
{
    MinimizeConfig mc = rc.minimize;
    if (mc.pin && mc.rho_pin == 0) mc.rho_pin = prm.rho_pin;
    return mc;
}

int cmd_minimize(const Common& c, const std::string& init_field)
{
    Ctx x = make_ctx(c);
    Params prm = load_params("", x.rc);
    Domain dom = config_domain(x.rc);
    MinimizeConfig mc = effective_minimize(x.rc, prm);
    Field2D f0 = initial_2d(x, dom, mc, init_field);
    const bool rescaled = x.rc.energy == "rescaled";
    if (rescaled && prm.lambda == 0) throw ConfigError("minimize.energy = rescaled needs params.lambda");
    double cut = rescaled ? eps_cutoff_length(prm) : prm.delta;
    CutoffField chi = cutoff_chi(dom.sdf, cut);
    auto t0 = std::chrono::steady_clock::now();
    MinimizeResult r = minimize_reduced(f0, prm, dom, chi, mc, x.rc.padding,
                                        rescaled ? Energy2D::rescaled : Energy2D::reduced);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Field2D f(dom.grid);
    f.v = r.x;
    write_field_file((x.out / "phi.bin").string(), f);
    json j = to_json(r);
    j["params"] = params_json(prm);
    j["energy_kind"] = x.rc.energy;
    j["grid"] = {dom.grid.nx, dom.grid.ny};
    j["interface_length"] = interface_length(f, dom);
    write_json(x.out / "minimize.json", j);
    std::printf("minimize: %s after %d iterations, E = %.12g (%.1fs)\n", r.status.c_str(), r.iterations,
                r.energy.total, secs);
    return r.converged ? 0 : 1;
}

int cmd_minimize3d(const Common& c, const std::string& init_field)
{
    Ctx x = make_ctx(c);
    Params prm = load_params("", x.rc);
    Domain dom = config_domain(x.rc);
    MinimizeConfig mc = effective_minimize(x.rc, prm);
    const bool rescaled = x.rc.energy == "rescaled";
    double thick = prm.delta;
    if (rescaled) {
        if (prm.lambda == 0) throw ConfigError("minimize.energy = rescaled needs params.lambda");
        thick = prm.eps * prm.delta_from_lambda();
    }
    Field3D s0;
    if (!init_field.empty()) {
        FieldFile ff = read_field_file(init_field);
        if (ff.rank == 3) {
            if (ff.f3.grid.nx != dom.grid.nx || ff.f3.grid.ny != dom.grid.ny)
                throw ConfigError("--field: grid does not match the configured grid");
            s0 = Field3D(dom.grid, ff.f3.nz, ff.f3.delta);
            s0.v = ff.f3.v;
        } else {
            s0 = Field3D::replicate(initial_2d(x, dom, mc, init_field), x.rc.nz, thick);
        }
    } else {
        s0 = Field3D::replicate(initial_2d(x, dom, mc, ""), x.rc.nz, thick);
    }
    auto t0 = std::chrono::steady_clock::now();
    MinimizeResult r =
        minimize_3d(s0, prm, dom, nullptr, mc, x.rc.padding, rescaled ? Energy3D::rescaled : Energy3D::plain);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Field3D s = s0;
    s.v = r.x;
    write_field_file((x.out / "phi3d.bin").string(), s);
    write_field_file((x.out / "phi_bar.bin").string(), z_average(s));
    json j = to_json(r);
    j["params"] = params_json(prm);
    j["energy_kind"] = rescaled ? "rescaled" : "plain";
    j["grid"] = {dom.grid.nx, dom.grid.ny, s.nz};
    j["thickness"] = s.delta;
    write_json(x.out / "minimize3d.json", j);
    std::printf("minimize3d: %s after %d iterations, E = %.12g (%.1fs)\n", r.status.c_str(), r.iterations,
                r.energy.total, secs);
    return r.converged ? 0 : 1;
}

// ---- sweep ----

int cmd_sweep(const Common& c, const std::string& eps_arg, const std::string& lambda_arg)
{
    Ctx x = make_ctx(c);
    SweepConfig sc = x.rc.sweep;
    sc.jobs = x.jobs;
    sc.seed = x.rc.seed;
    sc.padding = x.rc.padding;
    std::vector<double> eps = eps_arg.empty() ? x.rc.sweep_eps : parse_range(eps_arg, "--eps");
    std::vector<double> lams = lambda_arg.empty() ? x.rc.lambdas : parse_range(lambda_arg, "--lambda");
    if (lams.empty()) throw ConfigError("sweep: no lambda grid (pass --lambda a..b:step or sweep.lambda)");
    if (x.rc.lambda_relative && lambda_arg.empty())
        for (double& l : lams) l *= lambda_c;
    for (double e : eps)
        if (!(e > 0 && e < 1)) throw ConfigError("--eps: values must lie in (0,1)");

    std::ostringstream pts, sum;
    pts << "lambda,eps,best_energy,modulated,interface_length,iterations,converged\n";
    sum << "eps,crossing_found,lambda_star,lambda_star_over_lambda_c,bracket_lo,bracket_hi,points\n";
    json all = json::array();
    bool settled = true;
    for (double e : eps) {
        sc.eps = e;
        Domain dom = channel_domain(sc.width, sc.ny, e / sc.cells_per_eps);
        auto t0 = std::chrono::steady_clock::now();
        SweepRecord rec = sweep_lambda(lams, sc, dom);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_sweep_csv(pts, rec, false);
        sum << detail::num(e) << ',' << int(rec.crossing_found) << ',' << detail::num(rec.lambda_star) << ','
            << detail::num(rec.lambda_star / lambda_c) << ',' << detail::num(rec.bracket_lo) << ','
            << detail::num(rec.bracket_hi) << ',' << rec.points.size() << '\n';
        json j = to_json(rec);
        j["eps"] = e;
        all.push_back(j);
        // a point counts as settled if its best run converged or certified modulation
        for (auto& p : rec.points) settled = settled && (p.converged || p.certified);
        if (rec.crossing_found)
            std::printf("eps=%-10.6g lambda*=%.6f  lambda*/lambda_c=%.5f  (%.1fs)\n", e, rec.lambda_star,
                        rec.lambda_star / lambda_c, secs);
        else
            std::printf("eps=%-10.6g no uniform-to-modulated crossing on the grid  (%.1fs)\n", e, secs);
    }
    write_text(x.out / "sweep.csv", pts.str());
    write_text(x.out / "sweep_summary.csv", sum.str());
    write_json(x.out / "sweep.json", {{"lambda_c", lambda_c}, {"runs", all}});
    if (!settled) std::printf("note: some sweep points stopped at the iteration cap without converging\n");
    return settled ? 0 : 1;
}

// ---- verify ----

CheckReport f_bound_report()
{
    FBound b = check_F_bound(2001);
    CheckReport r;
    r.name = "F_bound";
    r.tol = 1e-12;
    CheckCase cs;
    cs.family = "lattice_2001";
    cs.lhs = b.max_abs;
    cs.rhs = 3;
    cs.ratio = b.max_abs / 3;
    cs.extra = {{"s", b.s_at}, {"t", b.t_at}, {"corner", b.corner}};
    r.cases.push_back(cs);
    r.finalize();
    if (b.corner != -3) {
        r.pass = false;
        r.notes.push_back("F(-1,1) != -3");
    }
    return r;
}

// fitted ln(1/r) slope against the sharp constant (3/pi)|grad(phi - phi^3/3)|_1, 15% band
CheckReport sharpness_report(int padding)
{
    SharpnessReport s = interp_sharpness(1, {0.32, 0.16, 0.08, 0.04}, 768, padding);
    CheckReport r;
    r.name = "interp_sharpness";
    r.tol = 0;
    for (std::size_t i = 0; i < s.r.size(); ++i) {
        CheckCase cs;
        cs.family = "mollified_disc";
        cs.lhs = s.lhs[i];
        cs.rhs = s.tv[i];
        cs.ratio = std::abs(s.slope - s.sharp_constant) / (0.15 * s.sharp_constant);
        cs.extra = {{"r", s.r[i]}, {"slope", s.slope}, {"sharp_constant", s.sharp_constant},
                    {"perimeter_form", s.perimeter_form}};
        r.cases.push_back(cs);
    }
    r.finalize();
    std::ostringstream os;
    os << "slope " << s.slope << ", sharp constant " << s.sharp_constant << ", (3/pi)*perimeter "
       << s.perimeter_form;
    r.notes.push_back(os.str());
    return r;
}

std::vector<std::string> expand_suite(const std::vector<std::string>& in)
{
    static const std::vector<std::string> core{"positivity", "ded", "interp"};
    static const std::vector<std::string> all{"positivity", "ded",    "ded_z",    "edge",     "interp",
                                              "interp_pinned", "F_bound", "sharpness", "sandwich", "coercivity"};
    std::vector<std::string> out;
    for (const auto& s : in) {
        const std::vector<std::string>* grp = s == "core" ? &core : s == "all" ? &all : nullptr;
        if (grp) out.insert(out.end(), grp->begin(), grp->end());
        else if (std::find(all.begin(), all.end(), s) != all.end()) out.push_back(s);
        else throw ConfigError("--suite: unknown check '" + s + "'");
    }
    std::vector<std::string> uniq;
    for (auto& s : out)
        if (std::find(uniq.begin(), uniq.end(), s) == uniq.end()) uniq.push_back(s);
    return uniq;
}

int cmd_verify(const Common& c, const std::vector<std::string>& suite_arg)
{
    Ctx x = make_ctx(c);
    std::vector<std::string> names = expand_suite(suite_arg.empty() ? x.rc.suite : suite_arg);
    const bool seeded = x.rc.seed_set;
    const int n = x.rc.cases, p = x.rc.padding, jobs = x.jobs;
    auto tune = [&](auto& cfg) {
        cfg.jobs = jobs;
        cfg.padding = p;
        if (seeded) cfg.seed = x.rc.seed;
    };
    std::vector<CheckReport> reps;
    for (const auto& name : names) {
        auto t0 = std::chrono::steady_clock::now();
        CheckReport r;
        if (name == "positivity") {
            PositivityConfig cfg;
            tune(cfg);
            if (n) cfg.cases = n;
            r = check_positivity(cfg);
        } else if (name == "ded" || name == "ded_z") {
            DedConfig cfg;
            tune(cfg);
            if (n) cfg.cases = n;
            cfg.z_independent = name == "ded_z";
            if (cfg.z_independent) cfg.tol = 1e-3;
            r = check_ded(cfg);
        } else if (name == "edge") {
            EdgeConfig cfg;
            tune(cfg);
            if (n) cfg.cases = n;
            r = check_edge(cfg);
        } else if (name == "interp" || name == "interp_pinned") {
            InterpConfig cfg;
            tune(cfg);
            if (n) cfg.cases = n;
            cfg.pinned = name == "interp_pinned";
            r = check_interp(cfg);
        } else if (name == "F_bound") {
            r = f_bound_report();
        } else if (name == "sharpness") {
            r = sharpness_report(p);
        } else if (name == "sandwich") {
            SandwichConfig cfg;
            tune(cfg);
            r = check_sandwich(cfg);
        } else if (name == "coercivity") {
            CoercivityConfig cfg;
            tune(cfg);
            if (n) cfg.cases = n;
            r = check_coercivity(cfg);
        }
        if (name == "ded_z") r.name = "ded_z_independent";
        if (name == "interp_pinned") r.name = "interp_pinned";
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%-20s %-4s worst %.6g  (%zu cases, %.1fs)\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                    r.worst, r.cases.size(), secs);
        write_json(x.out / ("verify_" + r.name + ".json"), to_json(r));
        reps.push_back(std::move(r));
    }
    std::ostringstream os;
    write_check_summary_csv(os, reps);
    write_text(x.out / "verify_summary.csv", os.str());
    bool ok = true;
    for (auto& r : reps) ok = ok && r.pass;
    return ok ? 0 : 1;
}

// ---- gioia ----

int cmd_gioia(const Common& c, const std::string& deltas_arg)
{
    Ctx x = make_ctx(c);
    GioiaConfig gc = x.rc.gioia;
    gc.padding = x.rc.padding;
    std::vector<double> ds = deltas_arg.empty() ? x.rc.gioia_deltas : parse_range(deltas_arg, "--deltas");
    std::vector<GioiaPoint> pts(ds.size());
    parallel_for(int(ds.size()), x.jobs, [&](int i) { pts[i] = gioia_point(ds[i], gc); });
    std::ostringstream os;
    write_gioia_csv(os, pts);
    write_text(x.out / "gioia.csv", os.str());
    json arr = json::array();
    for (auto& p : pts) arr.push_back(to_json(p));
    write_json(x.out / "gioia.json", {{"radius", gc.radius}, {"gamma", gc.gamma}, {"h", gc.h}, {"nz", gc.nz},
                                      {"points", arr}});
    bool conv = true;
    for (auto& p : pts) {
        std::printf("delta=%-8.4g deviation=%.6f  E/delta=%.6f  %s\n", p.delta, p.deviation, p.energy_per_delta,
                    p.converged ? "converged" : "NOT converged");
        conv = conv && p.converged;
    }
    return conv ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"dpfilm: dipolar Ginzburg-Landau thin films"};
    app.require_subcommand(1);
    Common com;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", com.config, "JSON run configuration");
        s->add_option("--out", com.out, "output directory (default: config 'out' or .)");
        s->add_option("--jobs", com.jobs, "worker threads (default: DPFILM_THREADS, else all cores)");
        s->add_option("--seed", com.seed, "seed for random fields and inits");
        s->add_option("--padding", com.padding, "zero-padding factor of the FFT grid");
    };

    std::string field, params, eps, lambda, deltas;
    std::vector<std::string> suite;

    auto* en = app.add_subcommand("energy", "evaluate the energy of a field file");
    add_common(en);
    en->add_option("--field", field, "DPFILM01 field file")->required();
    en->add_option("--params", params, "params JSON (a bare params object or a full config)");

    auto* mi = app.add_subcommand("minimize", "minimize the reduced 2D energy");
    add_common(mi);
    mi->add_option("--field", field, "initial field (default: minimize.init)");

    auto* m3 = app.add_subcommand("minimize3d", "minimize the layered 3D energy");
    add_common(m3);
    m3->add_option("--field", field, "initial field, rank 2 (replicated) or 3");

    auto* sw = app.add_subcommand("sweep", "lambda sweep for the uniform/modulated transition");
    add_common(sw);
    sw->add_option("--eps", eps, "eps values, e.g. 2^-6 or 2^-4,2^-5");
    sw->add_option("--lambda", lambda, "lambda grid a..b:step or a comma list");

    auto* ve = app.add_subcommand("verify", "run inequality checks");
    add_common(ve);
    ve->add_option("--suite", suite, "core, all, or check names")->delimiter(',');

    auto* gi = app.add_subcommand("gioia", "thin-film limit experiment on a disc");
    add_common(gi);
    gi->add_option("--deltas", deltas, "film thicknesses, e.g. 0.4,0.2,0.1,0.05");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*en) return cmd_energy(com, field, params);
        if (*mi) return cmd_minimize(com, field);
        if (*m3) return cmd_minimize3d(com, field);
        if (*sw) return cmd_sweep(com, eps, lambda);
        if (*ve) return cmd_verify(com, suite);
        if (*gi) return cmd_gioia(com, deltas);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "dpfilm: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "dpfilm: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dpfilm: error: %s\n", e.what());
        return 2;
    }
    return 2;
}
