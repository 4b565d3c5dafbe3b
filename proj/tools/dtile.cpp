#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dtile/affine.hpp"
#include "dtile/domino.hpp"
#include "dtile/hypgeo.hpp"
#include "dtile/tileset.hpp"
#include "dtile/tower.hpp"
#include "dtile/witness.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace dtile;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path().string());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << text;
}

struct TowerArg {
    tower::TowerSpec spec;
    std::string description;
};

// grid | qary:<q> | horosphere:<presentation file>
TowerArg parse_tower(const std::string& arg, int height, int delta, int rho,
                     std::uint64_t seed) {
    TowerArg out;
    out.description = arg;
    if (arg == "grid") {
        out.spec = tower::TowerSpec::grid_line();
        return out;
    }
    if (arg.rfind("qary:", 0) == 0) {
        out.spec = tower::TowerSpec::qary(std::stoi(arg.substr(5)));
        return out;
    }
    if (arg.rfind("horosphere:", 0) == 0) {
        auto pres = hypgeo::Presentation::parse(read_file(arg.substr(11)));
        auto scr = hypgeo::verify_small_cancellation(pres);
        if (!pres.relators.empty() && !scr.ok)
            throw ValidationError("presentation is not C'(1/6)");
        int d = delta >= 0 ? delta : 1;
        int r = rho >= 0 ? rho : std::max(2 * d, 2);
        int R = std::max(height, r + 2);
        auto ball = hypgeo::ball(pres, R);
        auto base = hypgeo::bipartite_double(ball);
        auto atlas = hypgeo::cone_types(base, r);
        std::vector<hypgeo::HorosphereGraph> graphs;
        for (int n = 0; n < height; ++n)
            graphs.push_back(hypgeo::horosphere_graph(base, atlas, n, 2 * d));
        (void)seed;
        out.spec = tower::TowerSpec::horosphere(hypgeo::to_tower(graphs));
        return out;
    }
    throw ValidationError("unknown tower '" + arg + "' (grid | qary:<q> | horosphere:<pres>)");
}

ordered_json report_header(const std::string& cmd, std::uint64_t seed) {
    ordered_json j;
    j["tool"] = "dtile";
    j["command"] = cmd;
    j["seed"] = seed;
    return j;
}

std::vector<std::pair<Vec2Q, int>> orbit_pairs(const affine::PiecewiseAffineSystem& sys,
                                               const Vec2Q& x0, int len) {
    auto r = affine::orbit(sys, x0, len - 1);
    if (!r.immortal)
        throw ValidationError("orbit dies at step " + std::to_string(r.step) +
                              "; need " + std::to_string(len) + " in-domain points");
    std::vector<std::pair<Vec2Q, int>> out;
    for (int n = 0; n < len; ++n) {
        auto ap = affine::try_apply(sys, r.trajectory[n]);
        out.push_back({r.trajectory[n], ap->piece - 1});
    }
    return out;
}

Vec2Q parse_point(const std::string& s) {
    auto comma = s.find(',');
    if (comma == std::string::npos) throw ValidationError("point must be 'x,y'");
    return {rat_from_string(s.substr(0, comma)), rat_from_string(s.substr(comma + 1))};
}

int run_compile_tm(const std::string& tm_path, const std::string& out_dir, int configs,
                   int window, std::uint64_t seed) {
    auto tm = affine::tm_from_json(read_file(tm_path));
    auto ct = affine::compile_tm(tm);
    write_file(fs::path(out_dir) / "system.json", affine::system_to_json(ct.sys));

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> sym(0, (int)tm.alphabet.size() - 1);
    std::uniform_int_distribution<int> st(0, (int)tm.states.size() - 1);
    int ok = 0, dies = 0, mism = 0, inconclusive = 0;
    for (int c = 0; c < configs; ++c) {
        affine::TmConfig cfg;
        cfg.lo = 0;
        cfg.tape.resize(window);
        for (auto& t : cfg.tape) t = tm.alphabet[sym(rng)];
        cfg.head = window / 2;
        cfg.state = st(rng);
        switch (affine::tm_step_conjugacy(ct, tm, cfg)) {
            case affine::ConjugacyResult::Ok: ++ok; break;
            case affine::ConjugacyResult::Dies: ++dies; break;
            case affine::ConjugacyResult::Mismatch: ++mism; break;
            case affine::ConjugacyResult::Inconclusive: ++inconclusive; break;
        }
    }
    ordered_json rep = report_header("compile-tm", seed);
    rep["squares"] = ct.sys.squares.size();
    rep["configs"] = configs;
    rep["window"] = window;
    rep["ok"] = ok;
    rep["dies"] = dies;
    rep["mismatch"] = mism;
    rep["inconclusive"] = inconclusive;
    write_file(fs::path(out_dir) / "conjugacy_report.json", rep.dump(2));
    std::cout << rep.dump(2) << "\n";
    return mism == 0 ? 0 : 1;
}

int run_certify_mortal(const std::string& sys_path, const std::string& out_dir, int max_depth,
                       long polygon_cap) {
    auto sys = affine::system_from_json(read_file(sys_path));
    auto res = affine::certify_mortal(sys, max_depth, (std::size_t)polygon_cap);
    ordered_json rep = report_header("certify-mortal", 0);
    rep["mortal"] = res.mortal;
    if (res.mortal) rep["bound"] = res.bound;
    rep["depth_reached"] = res.depth_reached;
    rep["peak_polygons"] = res.peak_polygons;
    if (!res.reason.empty()) rep["reason"] = res.reason;
    write_file(fs::path(out_dir) / "mortality.json", rep.dump(2));
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int run_compile_tileset(const std::string& sys_path, int q, long L_override,
                        const std::string& out_dir) {
    auto sys = affine::system_from_json(read_file(sys_path));
    std::optional<long> L;
    if (L_override >= 0) L = L_override;
    auto tc = tileset::compile_tileset(sys, q, L);
    tileset::SizeReport sr;
    auto inst = tileset::explicit_dominoes(tc, &sr);
    write_file(fs::path(out_dir) / "instance.json", domino::instance_to_json(inst));
    write_file(fs::path(out_dir) / "size_report.json", tileset::size_report_to_json(sr));
    std::cout << tileset::size_report_to_json(sr) << "\n";
    return 0;
}

int run_tile_patch(const std::string& inst_path, const std::string& tower_arg, int height,
                   long width, std::uint64_t budget, const std::string& format,
                   const std::string& out_dir, int delta, int rho, std::uint64_t seed) {
    auto inst = domino::instance_from_json(read_file(inst_path));
    TowerArg ta = parse_tower(tower_arg, height, delta, rho, seed);
    auto patch = tower::build_patch(ta.spec, height, 0, width);
    bool line = ta.spec.is_line_kind();
    auto lp = tileset::to_labeled_patch(patch, line, line ? 2 : 8);
    if (format == "dimacs") {
        write_file(fs::path(out_dir) / "patch.cnf", domino::export_cnf(lp, inst));
        std::cout << "wrote patch.cnf\n";
        return 0;
    }
    auto outcome = domino::solve_patch(lp, inst, budget);
    ordered_json rep = report_header("tile-patch", seed);
    rep["tower"] = ta.description;
    rep["height"] = height;
    rep["width"] = width;
    rep["vertices"] = lp.num_vertices;
    rep["outcome"] = outcome.kind == domino::SolveOutcome::Kind::Satisfiable ? "satisfiable"
                     : outcome.kind == domino::SolveOutcome::Kind::Unsatisfiable
                         ? "unsatisfiable"
                         : "aborted";
    rep["explored"] = outcome.explored;
    rep["budget"] = outcome.budget;
    write_file(fs::path(out_dir) / "outcome.json", rep.dump(2));
    if (outcome.kind == domino::SolveOutcome::Kind::Satisfiable && format == "dot")
        write_file(fs::path(out_dir) / "colored.dot",
                   domino::colored_patch_to_dot(lp, inst, outcome.coloring));
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int run_witness(const std::string& sys_path, const std::string& tower_arg, int height,
                long width, long margin, long L_override, const std::string& x0_arg, int q_hint,
                const std::string& out_dir, std::uint64_t seed) {
    auto sys = affine::system_from_json(read_file(sys_path));
    auto bad = affine::validate_system(sys);
    if (!bad.empty()) throw ValidationError(bad.front());
    TowerArg ta = parse_tower(tower_arg, height, -1, -1, seed);
    (void)q_hint;
    std::optional<long> L;
    if (L_override >= 0) L = L_override;
    auto params = tileset::compute_params(sys, ta.spec.q, L);
    long m = margin >= 0 ? margin : 4 * (long)params.L.get_si();
    auto patch = tower::build_patch(ta.spec, height, -m, width + m);
    auto orbit = orbit_pairs(sys, parse_point(x0_arg), height);
    auto dec = witness::decorate(orbit, sys, patch);
    dec.M = params.M;
    dec.carries.assign(height, {});
    for (int n = 0; n < height; ++n) {
        if (n + 1 < height) {
            auto mo = witness::match_carries(dec, sys, patch, params, n, m);
            if (!mo.ok) {
                ordered_json rep = report_header("witness", seed);
                rep["hall_failure"] = {{"level", mo.failure->level},
                                       {"white_side", mo.failure->white_side},
                                       {"witness_columns", mo.failure->witness_columns},
                                       {"white_count", mo.failure->white_count.get_str()},
                                       {"black_count", mo.failure->black_count.get_str()}};
                write_file(fs::path(out_dir) / "verify_report.json", rep.dump(2));
                std::cout << rep.dump(2) << "\n";
                return 4;
            }
            dec.carries[n] = std::move(mo.carries);
        } else {
            dec.carries[n].assign(std::max<std::int64_t>(patch.level_size(n) - 1, 0), {0, 0});
        }
    }
    dec.has_carries = true;
    auto rep = witness::verify_decoration(patch, sys, dec, params);
    write_file(fs::path(out_dir) / "decoration.json", witness::decoration_to_json(dec, patch));
    ordered_json vj = ordered_json::parse(witness::verify_report_to_json(rep));
    ordered_json out = report_header("witness", seed);
    out["interior_checked"] = vj["interior_checked"];
    out["violations"] = vj["violations"];
    write_file(fs::path(out_dir) / "verify_report.json", out.dump(2));
    std::cout << out.dump(2) << "\n";
    return rep.violations.empty() ? 0 : 1;
}

int run_extract(const std::string& dec_path, const std::string& sys_path, long L_override,
                long folner_width, const std::string& out_dir, std::uint64_t seed) {
    auto sys = affine::system_from_json(read_file(sys_path));
    auto [dec, patch] = witness::decoration_from_json(read_file(dec_path));
    tower::TowerSpec spec = patch.kind == tower::TowerKind::GridLine
                                ? tower::TowerSpec::grid_line()
                                : tower::TowerSpec::qary(patch.q);
    std::optional<long> L;
    if (L_override >= 0) L = L_override;
    auto params = tileset::compute_params(sys, patch.q, L);
    if (params.M != dec.M)
        throw ValidationError("decoration was built with a different denominator M");
    std::vector<std::int64_t> base(folner_width);
    for (long i = 0; i < folner_width; ++i) base[i] = i;
    auto F0 = tower::make_vertex_set(spec, 0, base);
    auto levels = witness::extract_orbit(spec, patch, dec, params, sys, F0);
    ordered_json rep = report_header("extract", seed);
    rep["levels"] = ordered_json::array();
    bool all_exact = true;
    for (const auto& l : levels) {
        ordered_json o;
        o["avg"] = {rat_to_string(l.avg.x), rat_to_string(l.avg.y)};
        o["set_size"] = l.set_size;
        o["boundary_edges"] = l.boundary_edges;
        o["identity_exact"] = l.identity_exact;
        o["residual"] = rat_to_string(l.residual);
        o["residual_bound"] = rat_to_string(l.residual_bound);
        rep["levels"].push_back(std::move(o));
        all_exact = all_exact && l.identity_exact;
    }
    write_file(fs::path(out_dir) / "extract_report.json", rep.dump(2));
    std::cout << rep.dump(2) << "\n";
    return all_exact ? 0 : 1;
}

int run_hyp(const std::string& pres_path, int radius, int delta_arg, int rho_arg, int levels,
            bool slow, std::uint64_t seed, const std::string& out_dir) {
    auto pres = hypgeo::Presentation::parse(read_file(pres_path));
    auto scr = hypgeo::verify_small_cancellation(pres);
    if (!pres.relators.empty() && !scr.ok)
        throw ValidationError("presentation is not C'(1/6): max piece " +
                              std::to_string(scr.max_piece));
    int delta_est = -1;
    int delta = delta_arg;
    int rho = rho_arg;
    if (delta < 0 || rho < 0) {
        // small probe ball for the delta estimate
        hypgeo::BallOptions probe_opts;
        auto probe = hypgeo::ball(pres, std::min(radius > 0 ? radius : 4, 4), probe_opts);
        delta_est = hypgeo::estimate_delta(probe, 300, seed);
        if (delta < 0) delta = delta_est + 1;
        if (rho < 0) rho = std::max(2 * delta, 2);
    }
    int R = radius > 0 ? radius : std::max(levels, rho + 2);
    auto t0 = std::chrono::steady_clock::now();
    hypgeo::BallOptions opts;
    opts.slow_mode = slow;
    auto b0 = hypgeo::ball(pres, R, opts);
    auto b = hypgeo::bipartite_double(b0);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();

    ordered_json ball_rep = report_header("hyp", seed);
    ball_rep["radius"] = b.radius;
    ball_rep["delta_used"] = delta;
    if (delta_est >= 0) ball_rep["delta_estimated"] = delta_est;
    ball_rep["rho"] = rho;
    ball_rep["max_piece"] = scr.max_piece;
    ball_rep["elements"] = b.size();
    auto sph = b.sphere_sizes();
    if (b.sentinel_outer && !sph.empty()) sph.pop_back();
    ball_rep["sphere_sizes"] = sph;
    ball_rep["build_ms"] = ms;
    write_file(fs::path(out_dir) / "ball_report.json", ball_rep.dump(2));
    std::cout << ball_rep.dump(2) << "\n";

    auto atlas = hypgeo::cone_types(b, rho);
    ordered_json cone_rep;
    cone_rep["rho"] = rho;
    cone_rep["types"] = atlas.types();
    cone_rep["first_seen"] = atlas.first_seen;
    int inf = 0;
    for (auto f : atlas.cone_flag)
        if (f == 1) ++inf;
    cone_rep["infinite_types"] = inf;
    cone_rep["table_closed"] = atlas.table_closed;
    write_file(fs::path(out_dir) / "cone_report.json", cone_rep.dump(2));
    write_file(fs::path(out_dir) / "cone_types.dot", hypgeo::atlas_to_dot(atlas, b.pres));

    std::vector<hypgeo::HorosphereGraph> graphs;
    for (int n = 0; n < levels; ++n) {
        graphs.push_back(hypgeo::horosphere_graph(b, atlas, n, 2 * delta));
        const auto& g = graphs.back();
        ordered_json hj;
        hj["level"] = g.level;
        hj["vertices"] = g.verts.size();
        hj["edges"] = g.edges.size();
        hj["labels"] = g.labels;
        write_file(fs::path(out_dir) / ("horosphere_" + std::to_string(n) + ".json"), hj.dump(2));
        write_file(fs::path(out_dir) / ("horosphere_" + std::to_string(n) + ".dot"),
                   hypgeo::horosphere_to_dot(g));
    }
    auto tr = hypgeo::tower_report(b, graphs, 2 * delta, atlas.types(), seed);
    ordered_json tj = report_header("hyp-tower", seed);
    tj["delta_used"] = delta;
    tj["levels"] = ordered_json::array();
    for (const auto& lc : tr.levels)
        tj["levels"].push_back({{"level", lc.level},
                                {"vertices", lc.vertices},
                                {"edges", lc.edges},
                                {"connected", lc.connected},
                                {"contraction_ok", lc.contraction_ok},
                                {"edges_to_edge", lc.edges_to_edge},
                                {"edges_to_point", lc.edges_to_point},
                                {"fibre_min", lc.fibre_min},
                                {"fibre_max", lc.fibre_max}});
    tj["contraction_power"] = tr.contraction_power;
    tj["halving_ok"] = tr.halving_ok;
    tj["growth_ok"] = tr.growth_ok;
    write_file(fs::path(out_dir) / "tower_report.json", tj.dump(2));
    std::cout << tj.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"domino-problem workbench: affine systems, tilesets, witnesses, horospheres"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    std::string out_dir = "out";
    app.add_option("--seed", seed, "seed for randomized sweeps");
    app.add_option("--out", out_dir, "output directory");

    auto* ctm = app.add_subcommand("compile-tm", "Turing machine -> affine system + conjugacy");
    std::string tm_path;
    int tm_configs = 200, tm_window = 20;
    ctm->add_option("--tm", tm_path, "machine JSON")->required();
    ctm->add_option("--configs", tm_configs, "random configurations");
    ctm->add_option("--window", tm_window, "tape window length");

    auto* cm = app.add_subcommand("certify-mortal", "polygon-chain mortality certificate");
    std::string sys_path;
    int max_depth = 64;
    long polygon_cap = 4096;
    cm->add_option("--system", sys_path, "system JSON")->required();
    cm->add_option("--max-depth", max_depth, "depth cap");
    cm->add_option("--polygon-cap", polygon_cap, "polygon count cap");

    auto* cts = app.add_subcommand("compile-tileset", "affine system -> domino instance");
    std::string cts_sys;
    int cts_q = 1;
    long cts_L = -1;
    cts->add_option("--system", cts_sys, "system JSON")->required();
    cts->add_option("--q", cts_q, "tower arity")->required();
    cts->add_option("--L", cts_L, "carry radius override");

    auto* tp = app.add_subcommand("tile-patch", "solve a domino instance on a tower patch");
    std::string tp_inst, tp_tower = "grid", tp_format = "json";
    int tp_height = 2, tp_delta = -1, tp_rho = -1;
    long tp_width = 8;
    std::uint64_t tp_budget = 10'000'000;
    tp->add_option("--instance", tp_inst, "instance JSON")->required();
    tp->add_option("--tower", tp_tower, "grid | qary:<q> | horosphere:<pres>");
    tp->add_option("--height", tp_height, "patch height");
    tp->add_option("--width", tp_width, "base width");
    tp->add_option("--budget", tp_budget, "node budget");
    tp->add_option("--format", tp_format, "json | dot | dimacs");
    tp->add_option("--delta", tp_delta, "working delta (horosphere towers)");
    tp->add_option("--rho", tp_rho, "cone data radius (horosphere towers)");

    auto* wt = app.add_subcommand("witness", "decorate an orbit and match carries");
    std::string wt_sys, wt_tower = "grid", wt_x0 = "0,0";
    int wt_height = 4;
    long wt_width = 32, wt_margin = -1, wt_L = -1;
    wt->add_option("--system", wt_sys, "system JSON")->required();
    wt->add_option("--tower", wt_tower, "grid | qary:<q>");
    wt->add_option("--height", wt_height, "patch height");
    wt->add_option("--width", wt_width, "core width");
    wt->add_option("--margin", wt_margin, "extra columns per side (default 4L)");
    wt->add_option("--L", wt_L, "carry radius override");
    wt->add_option("--x0", wt_x0, "orbit start 'x,y'");

    auto* ex = app.add_subcommand("extract", "Folner averaging of a decoration");
    std::string ex_dec, ex_sys;
    long ex_width = 8, ex_L = -1;
    ex->add_option("--decoration", ex_dec, "decoration JSON")->required();
    ex->add_option("--system", ex_sys, "system JSON")->required();
    ex->add_option("--folner-width", ex_width, "base interval width");
    ex->add_option("--L", ex_L, "carry radius override");

    auto* hy = app.add_subcommand("hyp", "Cayley ball, cone types, horosphere tower");
    std::string hy_pres;
    int hy_radius = -1, hy_delta = -1, hy_rho = -1, hy_levels = 4;
    bool hy_slow = false;
    hy->add_option("--pres", hy_pres, "presentation file")->required();
    hy->add_option("--radius", hy_radius, "ball radius");
    hy->add_option("--delta", hy_delta, "working hyperbolicity constant");
    hy->add_option("--rho", hy_rho, "cone data radius");
    hy->add_option("--levels", hy_levels, "horosphere levels to build");
    hy->add_flag("--slow", hy_slow, "quadratic identification oracle");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ctm) return run_compile_tm(tm_path, out_dir, tm_configs, tm_window, seed);
        if (*cm) return run_certify_mortal(sys_path, out_dir, max_depth, polygon_cap);
        if (*cts) return run_compile_tileset(cts_sys, cts_q, cts_L, out_dir);
        if (*tp)
            return run_tile_patch(tp_inst, tp_tower, tp_height, tp_width, tp_budget, tp_format,
                                  out_dir, tp_delta, tp_rho, seed);
        if (*wt)
            return run_witness(wt_sys, wt_tower, wt_height, wt_width, wt_margin, wt_L, wt_x0, -1,
                               out_dir, seed);
        if (*ex) return run_extract(ex_dec, ex_sys, ex_L, ex_width, out_dir, seed);
        if (*hy)
            return run_hyp(hy_pres, hy_radius, hy_delta, hy_rho, hy_levels, hy_slow, seed,
                           out_dir);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 2;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
