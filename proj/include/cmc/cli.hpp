#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "cmc/io.hpp"
#include "cmc/rescale.hpp"

namespace cmc {

/// Process exit codes. Codes 10-19 are verdicts (the run completed and a check
/// came out negative); codes 20-29 are errors (the run could not complete).
enum ExitCode : int {
    kExitOk = 0,
    kExitCheckFailed = 10,
    kExitNotConverged = 11,
    kExitNoMultigraph = 12,
    kExitConfigError = 20,
    kExitIoError = 21,
    kExitNumericalError = 22,
    kExitInternalError = 23,
};

inline bool is_verdict_failure(int code) { return code >= 10 && code < 20; }
inline bool is_error(int code) { return code >= 20 && code < 30; }

class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"build-helicoid",   "perturb", "analyze", "stability-scan",
                                                "detect-multigraph", "rescale", "verify"};
    return names;
}

/// Every key a config may contain, with its default. A user config is merged
/// onto this tree; keys outside it are rejected and the merged tree is the
/// resolved config written next to the outputs.
inline Json default_config_json() {
    const ParamGrid g = default_helicoid_grid();
    const SolverConfig s;
    return Json{
        {"command", ""},
        {"output_dir", "cmc-run"},
        {"seed", s.seed},
        {"surface", {{"kind", "helicoid"}, {"radius", 1.0}, {"grid", to_json(g)}}},
        {"input", {{"mesh_obj", ""}, {"mesh_csv", ""}}},
        {"solver",
         {{"H_target", s.H_target},
          {"max_iter", s.max_iter},
          {"step_tol", s.step_tol},
          {"residual_tol", s.residual_tol},
          {"spectral_floor", s.spectral_floor},
          {"probes", s.probes},
          {"dump_iterations", false}}},
        {"analyze", {{"gauss_tol", 1e-3}}},
        {"stability",
         {{"deltas", {0.0, 0.5, 0.9}}, {"radii", {0.25, 0.5, 1.0}}, {"center", {0.0, 0.0}}, {"eig_tol", 1e-8}}},
        {"multigraph", {{"N", 2}, {"omega", 2.0}, {"epsilon", 0.5}, {"axis_count", 21}}},
        {"rescale", {{"factors", {0.5, 2.0, 5.0}}, {"law_constant", 1.0}}},
        {"verify", {{"run_dir", ""}}},
    };
}

namespace detail {

inline bool same_kind(const Json& def, const Json& val) {
    if (def.is_number_integer()) return val.is_number_integer();
    if (def.is_number()) return val.is_number();
    return def.type() == val.type();
}

inline void merge_strict(Json& base, const Json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError("config" + (path.empty() ? "" : " key '" + path + "'") + " must be an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        Json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_strict(slot, it.value(), key);
        } else {
            if (!same_kind(slot, it.value()))
                throw ConfigError("config key '" + key + "' expects " + std::string(slot.type_name()) + ", got " +
                                  it.value().type_name());
            if (slot.is_array())
                for (const auto& e : it.value())
                    if (!e.is_number()) throw ConfigError("config key '" + key + "' must be an array of numbers");
            slot = it.value();
        }
    }
}

}  // namespace detail

struct SurfaceSpec {
    std::string kind = "helicoid";
    double radius = 1.0;
    ParamGrid grid = default_helicoid_grid();
};

/// Validated run configuration. `resolved` is the full merged JSON tree.
struct RunConfig {
    std::string command;
    std::filesystem::path output_dir = "cmc-run";
    std::uint64_t seed = SolverConfig{}.seed;
    SurfaceSpec surface;
    std::string mesh_obj, mesh_csv;
    SolverConfig solver;
    bool dump_iterations = false;
    double gauss_tol = 1e-3;
    std::vector<double> deltas, radii;
    double center_s = 0.0, center_t = 0.0;
    double eig_tol = 1e-8;
    int N = 2;
    double omega = 2.0, epsilon = 0.5;
    int axis_count = 21;
    std::vector<double> rescale_factors;
    double law_constant = 1.0;
    std::string run_dir;
    Json resolved;

    static RunConfig from_json(const Json& user) {
        Json r = default_config_json();
        detail::merge_strict(r, user, "");
        RunConfig c;
        c.resolved = r;
        c.command = r["command"].get<std::string>();
        if (std::find(subcommands().begin(), subcommands().end(), c.command) == subcommands().end())
            throw ConfigError("unknown or missing command '" + c.command + "'");
        c.output_dir = r["output_dir"].get<std::string>();
        if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
        if (r["seed"].get<std::int64_t>() < 0) throw ConfigError("seed must be non-negative");
        c.seed = r["seed"].get<std::uint64_t>();

        const Json& sf = r["surface"];
        c.surface.kind = sf["kind"].get<std::string>();
        c.surface.radius = sf["radius"].get<double>();
        const Json& gj = sf["grid"];
        c.surface.grid = {gj["s_min"].get<double>(), gj["s_max"].get<double>(), gj["t_min"].get<double>(),
                          gj["t_max"].get<double>(), gj["n_s"].get<int>(),      gj["n_t"].get<int>()};
        try {
            c.surface.grid.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("surface.grid: ") + e.what());
        }
        static const std::vector<std::string> kinds{"helicoid", "catenoid", "sphere", "stereographic_sphere",
                                                     "cylinder", "plane",    "polar_disk"};
        if (std::find(kinds.begin(), kinds.end(), c.surface.kind) == kinds.end())
            throw ConfigError("surface.kind '" + c.surface.kind + "' is not one of helicoid, catenoid, sphere, "
                              "stereographic_sphere, cylinder, plane, polar_disk");
        c.mesh_obj = r["input"]["mesh_obj"].get<std::string>();
        c.mesh_csv = r["input"]["mesh_csv"].get<std::string>();
        if (c.mesh_obj.empty() != c.mesh_csv.empty())
            throw ConfigError("input.mesh_obj and input.mesh_csv must be given together");

        const Json& sv = r["solver"];
        c.solver.H_target = sv["H_target"].get<double>();
        c.solver.max_iter = sv["max_iter"].get<int>();
        c.solver.step_tol = sv["step_tol"].get<double>();
        c.solver.residual_tol = sv["residual_tol"].get<double>();
        c.solver.spectral_floor = sv["spectral_floor"].get<double>();
        c.solver.probes = sv["probes"].get<int>();
        c.solver.seed = c.seed;
        c.solver.grid = c.surface.grid;
        c.dump_iterations = sv["dump_iterations"].get<bool>();
        try {
            c.solver.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }

        c.gauss_tol = r["analyze"]["gauss_tol"].get<double>();
        if (!(c.gauss_tol > 0.0)) throw ConfigError("analyze.gauss_tol must be positive");

        const Json& st = r["stability"];
        c.deltas = st["deltas"].get<std::vector<double>>();
        c.radii = st["radii"].get<std::vector<double>>();
        const auto center = st["center"].get<std::vector<double>>();
        if (center.size() != 2) throw ConfigError("stability.center must be a parameter point [s, t]");
        c.center_s = center[0];
        c.center_t = center[1];
        c.eig_tol = st["eig_tol"].get<double>();
        for (double d : c.deltas)
            if (!(d >= 0.0 && d < 1.0)) throw ConfigError("stability.deltas must lie in [0, 1)");
        for (double R : c.radii)
            if (!(R > 0.0)) throw ConfigError("stability.radii must be positive");
        if (!(c.eig_tol > 0.0)) throw ConfigError("stability.eig_tol must be positive");

        const Json& mg = r["multigraph"];
        c.N = mg["N"].get<int>();
        c.omega = mg["omega"].get<double>();
        c.epsilon = mg["epsilon"].get<double>();
        c.axis_count = mg["axis_count"].get<int>();
        if (c.N < 1) throw ConfigError("multigraph.N must be a positive integer");
        if (!(c.omega > 1.0)) throw ConfigError("multigraph.omega must exceed 1");
        if (!(c.epsilon > 0.0)) throw ConfigError("multigraph.epsilon must be positive");
        if (c.axis_count < 1) throw ConfigError("multigraph.axis_count must be positive");

        c.rescale_factors = r["rescale"]["factors"].get<std::vector<double>>();
        c.law_constant = r["rescale"]["law_constant"].get<double>();
        for (double R : c.rescale_factors)
            if (!std::isfinite(R) || !(R > 0.0)) throw ConfigError("rescale.factors must be finite and positive");
        if (!(c.law_constant > 0.0)) throw ConfigError("rescale.law_constant must be positive");

        c.run_dir = r["verify"]["run_dir"].get<std::string>();
        if (c.command == "verify" && c.run_dir.empty()) throw ConfigError("verify needs verify.run_dir");
        return c;
    }
};

/// Applies a `path.to.key=value` override to a user config. The value is parsed
/// as JSON when possible and taken as a string otherwise.
inline void apply_override(Json& user, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::parse_error&) {
        value = text;
    }
    Json* node = &user;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override key '" + path + "' has an empty component");
        if (!node->is_object()) *node = Json::object();
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

/// Output directory: relative paths are placed under $CMC_OUTPUT_ROOT when set.
inline std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
    if (dir.is_absolute()) return dir;
    if (const char* root = std::getenv("CMC_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / dir;
    return dir;
}

struct PipelineResult {
    int exit_code = kExitOk;
    std::filesystem::path output_dir;
    Json summary;
};

namespace detail {

inline SurfaceMesh build_surface(const SurfaceSpec& s) {
    if (s.kind == "helicoid") return build_helicoid(s.grid);
    if (s.kind == "catenoid") return build_catenoid(s.radius, s.grid);
    if (s.kind == "sphere") return build_reference(ReferenceKind::sphere, s.radius, s.grid);
    if (s.kind == "stereographic_sphere") return build_stereographic_sphere(s.radius, s.grid);
    if (s.kind == "cylinder") return build_reference(ReferenceKind::cylinder, s.radius, s.grid);
    if (s.kind == "plane") return build_reference(ReferenceKind::plane, s.radius, s.grid);
    return build_polar_disk(s.grid);
}

inline SurfaceMesh input_mesh(const RunConfig& c) {
    if (c.mesh_obj.empty()) return build_surface(c.surface);
    return read_mesh(c.mesh_obj, c.mesh_csv).mesh;
}

/// Extremes of a nodal field over nodes at least `ring` rows from the boundary.
struct FieldRange {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    double max_abs = 0.0;
};

inline FieldRange field_range(const ParamGrid& g, const std::vector<double>& f, int ring = 2) {
    FieldRange r;
    for (int i = ring; i < g.n_s - ring; ++i)
        for (int j = ring; j < g.n_t - ring; ++j) {
            const double v = f[g.index(i, j)];
            r.min = std::min(r.min, v);
            r.max = std::max(r.max, v);
            r.max_abs = std::max(r.max_abs, std::abs(v));
        }
    return r;
}

inline Json range_json(const FieldRange& r) { return {{"min", r.min}, {"max", r.max}, {"max_abs", r.max_abs}}; }

inline Json mesh_summary(const SurfaceMesh& mesh) {
    const auto fs = compute_forms_and_shape(mesh);
    const auto& g = mesh.grid;
    return {{"nodes", g.size()},
            {"max_edge", max_edge_length(mesh)},
            {"gauss_residual", gauss_residual(fs.shape, g)},
            {"H", range_json(field_range(g, fs.shape.H))},
            {"K", range_json(field_range(g, fs.shape.K))},
            {"A2", range_json(field_range(g, fs.shape.A2))}};
}

inline void write_mesh(const std::filesystem::path& dir, const std::string& stem, const SurfaceMesh& mesh,
                       const ScalarField& u, Json& artifacts) {
    write_obj(dir / (stem + ".obj"), mesh);
    write_node_csv(dir / (stem + ".csv"), mesh, u);
    artifacts.push_back(stem + ".obj");
    artifacts.push_back(stem + ".csv");
}

/// Interior deviation of the H and |A|^2 scaling laws between two meshes on one grid.
struct LawErrors {
    double H = 0.0, A2 = 0.0, bound = 0.0;
};

inline LawErrors scaling_law_errors(const SurfaceMesh& base, const SurfaceMesh& scaled, double R, double c) {
    const auto a = compute_forms_and_shape(base).shape;
    const auto b = compute_forms_and_shape(scaled).shape;
    const auto& g = base.grid;
    LawErrors e;
    for (int i = 1; i < g.n_s - 1; ++i)
        for (int j = 1; j < g.n_t - 1; ++j) {
            const std::size_t k = g.index(i, j);
            e.H = std::max(e.H, std::abs(b.H[k] - a.H[k] / R));
            e.A2 = std::max(e.A2, std::abs(b.A2[k] - a.A2[k] / (R * R)));
        }
    const double h = max_edge_length(scaled);
    e.bound = c * h * h;
    return e;
}

struct Check {
    std::string name;
    bool ok = false;
    double value = 0.0;
    double bound = 0.0;
};

inline Json checks_json(const std::vector<Check>& checks) {
    Json out = Json::array();
    for (const auto& c : checks) out.push_back({{"name", c.name}, {"ok", c.ok}, {"value", c.value}, {"bound", c.bound}});
    return out;
}

inline bool all_ok(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok; });
}

// ---------------------------------------------------------------------------
// Subcommands. Each fills `results` and `artifacts` and returns an exit code.

inline int cmd_build_helicoid(const RunConfig& c, const std::filesystem::path& dir, Json& results, Json& artifacts) {
    if (c.surface.kind != "helicoid")
        throw ConfigError("build-helicoid requires surface.kind = helicoid (got '" + c.surface.kind + "')");
    const auto mesh = build_helicoid(c.surface.grid);
    write_mesh(dir, "mesh", mesh, ScalarField(mesh.grid), artifacts);
    results = mesh_summary(mesh);
    results["stretch"] = grid_metric_stretch(mesh);
    return kExitOk;
}

inline int cmd_perturb(const RunConfig& c, const std::filesystem::path& dir, Json& results, Json& artifacts) {
    const auto mesh = detail::input_mesh(c);
    SolverConfig sc = c.solver;
    sc.grid = mesh.grid;
    IterateObserver observe;
    if (c.dump_iterations)
        observe = [&](int n, const ScalarField& u) {
            char name[32];
            std::snprintf(name, sizeof name, "iterates/iter_%04d.csv", n);
            CsvTable t{{"i", "j", "s", "t", "u"}, {}};
            const auto& g = u.grid();
            for (int i = 0; i < g.n_s; ++i)
                for (int j = 0; j < g.n_t; ++j)
                    t.rows.push_back({double(i), double(j), g.s(i), g.t(j), u.at(i, j)});
            write_csv(dir / name, t);
            artifacts.push_back(name);
        };
    SolveReport report;
    ScalarField u;
    try {
        auto [field, rep] = successive_approximation(mesh, sc, observe);
        u = std::move(field);
        report = std::move(rep);
    } catch (const ContractionFailure& e) {
        write_json(dir / "solve_report.json", to_json(e.report()));
        artifacts.push_back("solve_report.json");
        results = {{"converged", false}, {"message", e.what()}};
        return kExitNotConverged;
    }
    write_json(dir / "solve_report.json", to_json(report));
    artifacts.push_back("solve_report.json");
    write_mesh(dir, "mesh", normal_variation(mesh, u), u, artifacts);
    results = {{"converged", report.converged},
               {"embedded", report.embedded},
               {"iterations", report.iterations.size()},
               {"final_residual", report.final_residual},
               {"contraction_max", report.contraction_max()},
               {"norm_ladder_holds", report.norm_ladder_holds()},
               {"sup_u", u.sup_norm()},
               {"B_estimate", report.B_estimate},
               {"lambda_min_abs", report.lambda_min_abs},
               {"message", report.message}};
    if (!report.converged) return kExitNotConverged;
    return report.embedded ? kExitOk : kExitCheckFailed;
}

inline int cmd_analyze(const RunConfig& c, const std::filesystem::path& dir, Json& results, Json& artifacts) {
    const auto mesh = detail::input_mesh(c);
    const auto fs = compute_forms_and_shape(mesh);
    const auto& g = mesh.grid;
    CsvTable t{{"i", "j", "s", "t", "E", "F", "G", "e", "f", "g", "H", "K", "K_intrinsic", "A2"}, {}};
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) {
            const std::size_t k = g.index(i, j);
            const auto& ff = fs.forms;
            const auto& sh = fs.shape;
            t.rows.push_back({double(i), double(j), g.s(i), g.t(j), ff.E[k], ff.F[k], ff.G[k], ff.e[k], ff.f[k],
                              ff.g[k], sh.H[k], sh.K[k], sh.K_intrinsic[k], sh.A2[k]});
        }
    write_csv(dir / "forms.csv", t);
    artifacts.push_back("forms.csv");
    write_mesh(dir, "mesh", mesh, ScalarField(g), artifacts);
    results = mesh_summary(mesh);
    results["gauss_tol"] = c.gauss_tol;
    const bool ok = results["gauss_residual"].get<double>() <= c.gauss_tol;
    results["gauss_ok"] = ok;
    return ok ? kExitOk : kExitCheckFailed;
}

inline Json stability_cells(const RunConfig& c, const SurfaceMesh& mesh) {
    const auto ctx = OperatorContext::from_mesh(mesh);
    const std::size_t src = mesh.grid.nearest(c.center_s, c.center_t);
    Json cells = Json::array();
    for (double R : c.radii) {
        const auto ball = geodesic_ball(mesh, src, R);
        for (double d : c.deltas) {
            Json cell = to_json(delta_stability_test(ctx, ball, d, c.eig_tol));
            cell["radius"] = R;
            cell["source"] = src;
            cells.push_back(cell);
        }
    }
    return cells;
}

inline int cmd_stability_scan(const RunConfig& c, const std::filesystem::path& dir, Json& results, Json& artifacts) {
    const auto mesh = detail::input_mesh(c);
    write_mesh(dir, "mesh", mesh, ScalarField(mesh.grid), artifacts);
    const Json cells = stability_cells(c, mesh);
    write_json(dir / "stability.json", cells);
    artifacts.push_back("stability.json");
    Json table = Json::array();
    std::size_t stable = 0;
    for (const auto& cell : cells) {
        stable += cell["stable"].get<bool>();
        table.push_back({{"radius", cell["radius"]},
                         {"delta", cell["delta"]},
                         {"lambda1", cell["lambda1"]},
                         {"stable", cell["stable"]},
                         {"domain_nodes", cell["domain"].size()}});
    }
    results = {{"cells", table}, {"stable_cells", stable}, {"total_cells", cells.size()}};
    return kExitOk;
}

inline int cmd_detect(const RunConfig& c, const std::filesystem::path& dir, Json& results, Json& artifacts) {
    const auto mesh = detail::input_mesh(c);
    write_mesh(dir, "mesh", mesh, ScalarField(mesh.grid), artifacts);
    DetectOptions opt;
    opt.axis_count = c.axis_count;
    const auto cert = detect(mesh, c.N, c.omega, c.epsilon, opt);
    if (!cert) {
        const Json absence{{"found", false},
                           {"N", c.N},
                           {"omega", c.omega},
                           {"epsilon", c.epsilon},
                           {"axis_count", c.axis_count},
                           {"reason", "no candidate axis and inner radius gives a covered, single-valued sheet "
                                      "with gradient <= epsilon within 4 R of the base point"}};
        write_json(dir / "absence.json", absence);
        artifacts.push_back("absence.json");
        results = absence;
        return kExitNoMultigraph;
    }
    write_json(dir / "certificate.json", to_json(*cert));
    write_sheet_csv(dir / "sheet.csv", *cert);
    artifacts.push_back("certificate.json");
    artifacts.push_back("sheet.csv");
    const auto check = verify_certificate_details(mesh, *cert, opt);
    results = {{"found", true},
               {"axis", to_json(cert->axis)},
               {"N", cert->N},
               {"R_bar", cert->R_bar},
               {"omega", cert->omega},
               {"epsilon", cert->epsilon},
               {"grad_bound", cert->grad_bound},
               {"dist_to_origin", cert->dist_to_origin},
               {"verified", check.ok}};
    return check.ok ? kExitOk : kExitCheckFailed;
}

inline int cmd_rescale(const RunConfig& c, const std::filesystem::path& dir, Json& results, Json& artifacts) {
    const auto mesh = detail::input_mesh(c);
    write_mesh(dir, "mesh", mesh, ScalarField(mesh.grid), artifacts);
    Json laws = Json::array();
    bool ok = true;
    for (std::size_t n = 0; n < c.rescale_factors.size(); ++n) {
        const double R = c.rescale_factors[n];
        const auto scaled = rescale_mesh(mesh, R);
        write_mesh(dir, "rescaled_" + std::to_string(n), scaled, ScalarField(mesh.grid), artifacts);
        const auto e = scaling_law_errors(mesh, scaled, R, c.law_constant);
        const bool pass = e.H <= e.bound && e.A2 <= e.bound;
        ok = ok && pass;
        laws.push_back({{"R", R}, {"H_error", e.H}, {"A2_error", e.A2}, {"bound", e.bound}, {"ok", pass}});
    }
    results = {{"laws", laws}, {"all_ok", ok}};
    return ok ? kExitOk : kExitCheckFailed;
}

/// Re-runs the invariant checks of a finished run on its stored artifacts.
inline int cmd_verify(const RunConfig& c, const std::filesystem::path&, Json& results, Json&) {
    const std::filesystem::path run = resolve_output_dir(c.run_dir);
    const RunConfig orig = RunConfig::from_json(read_json(run / "resolved_config.json"));
    const auto stored = read_mesh(run / "mesh.obj", run / "mesh.csv");
    const auto& mesh = stored.mesh;
    std::vector<Check> checks;

    double worst_norm = 0.0;
    for (const auto& n : mesh.normal) worst_norm = std::max(worst_norm, std::abs(n.norm() - 1.0));
    checks.push_back({"unit_normals", worst_norm <= 1e-12, worst_norm, 1e-12});
    const double flips = static_cast<double>(orientation_flips(mesh).size());
    checks.push_back({"normals_continuous", flips == 0.0, flips, 0.0});

    const auto& cmd = orig.command;
    if (cmd == "build-helicoid" || cmd == "analyze") {
        const double gr = gauss_residual(compute_forms_and_shape(mesh).shape, mesh.grid);
        checks.push_back({"gauss_residual", gr <= orig.gauss_tol, gr, orig.gauss_tol});
    } else if (cmd == "perturb") {
        const auto rep = solve_report_from_json(read_json(run / "solve_report.json"));
        checks.push_back({"converged", rep.converged, rep.final_residual, orig.solver.residual_tol});
        checks.push_back({"contraction_below_one", rep.contraction_max() < 1.0, rep.contraction_max(), 1.0});
        checks.push_back({"norm_ladder", rep.norm_ladder_holds(), 0.0, 0.0});
        checks.push_back({"embedded", rep.embedded, 0.0, 0.0});
        const auto H = compute_forms_and_shape(mesh).shape.H;
        double res = 0.0;
        for (std::size_t k = 0; k < H.size(); ++k)
            if (!mesh.grid.is_boundary(k)) res = std::max(res, std::abs(H[k] - rep.H_target));
        checks.push_back({"stored_mesh_residual", res <= orig.solver.residual_tol, res, orig.solver.residual_tol});
        const double gr = gauss_residual(compute_forms_and_shape(mesh).shape, mesh.grid);
        checks.push_back({"gauss_residual", gr <= orig.gauss_tol, gr, orig.gauss_tol});
    } else if (cmd == "stability-scan") {
        const Json stored_cells = read_json(run / "stability.json");
        const Json cells = stability_cells(orig, mesh);
        double worst = 0.0;
        bool same = stored_cells.size() == cells.size();
        for (std::size_t n = 0; same && n < cells.size(); ++n) {
            const double a = cells[n]["lambda1"].get<double>(), b = stored_cells[n]["lambda1"].get<double>();
            worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(b)));
            same = same && cells[n]["stable"] == stored_cells[n]["stable"];
        }
        checks.push_back({"stability_verdicts_reproduced", same, 0.0, 0.0});
        checks.push_back({"lambda1_reproduced", worst <= 1e-6, worst, 1e-6});
    } else if (cmd == "detect-multigraph") {
        if (std::filesystem::exists(run / "certificate.json")) {
            const auto cert = certificate_from_json(read_json(run / "certificate.json"));
            const auto check = verify_certificate_details(mesh, cert);
            checks.push_back({"certificate", check.ok, check.measured_grad, cert.grad_bound});
        } else {
            checks.push_back({"certificate_present", false, 0.0, 0.0});
        }
    } else if (cmd == "rescale") {
        for (std::size_t n = 0; n < orig.rescale_factors.size(); ++n) {
            const std::string stem = "rescaled_" + std::to_string(n);
            const auto scaled = read_mesh(run / (stem + ".obj"), run / (stem + ".csv")).mesh;
            const double R = orig.rescale_factors[n];
            const auto e = scaling_law_errors(mesh, scaled, R, orig.law_constant);
            checks.push_back({stem + "_H_law", e.H <= e.bound, e.H, e.bound});
            checks.push_back({stem + "_A2_law", e.A2 <= e.bound, e.A2, e.bound});
        }
    } else {
        throw ConfigError("cannot verify a '" + cmd + "' run");
    }
    const bool ok = all_ok(checks);
    results = {{"run_dir", c.run_dir}, {"verified_command", cmd}, {"checks", checks_json(checks)}, {"all_ok", ok}};
    return ok ? kExitOk : kExitCheckFailed;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

/// Runs one subcommand and writes resolved_config.json, summary.json and
/// metadata.json into the output directory. summary.json depends only on the
/// config; wall-clock data goes to metadata.json.
inline PipelineResult run_pipeline(const RunConfig& config) {
    PipelineResult out;
    out.output_dir = resolve_output_dir(config.output_dir);
    const auto start = std::chrono::system_clock::now();
    Json results = Json::object(), artifacts = Json::array();
    std::string error;
    try {
        std::filesystem::create_directories(out.output_dir);
        write_json(out.output_dir / "resolved_config.json", config.resolved);
        const auto& cmd = config.command;
        if (cmd == "build-helicoid")
            out.exit_code = detail::cmd_build_helicoid(config, out.output_dir, results, artifacts);
        else if (cmd == "perturb")
            out.exit_code = detail::cmd_perturb(config, out.output_dir, results, artifacts);
        else if (cmd == "analyze")
            out.exit_code = detail::cmd_analyze(config, out.output_dir, results, artifacts);
        else if (cmd == "stability-scan")
            out.exit_code = detail::cmd_stability_scan(config, out.output_dir, results, artifacts);
        else if (cmd == "detect-multigraph")
            out.exit_code = detail::cmd_detect(config, out.output_dir, results, artifacts);
        else if (cmd == "rescale")
            out.exit_code = detail::cmd_rescale(config, out.output_dir, results, artifacts);
        else
            out.exit_code = detail::cmd_verify(config, out.output_dir, results, artifacts);
    } catch (const ConfigError& e) {
        out.exit_code = kExitConfigError;
        error = e.what();
    } catch (const IoError& e) {
        out.exit_code = kExitIoError;
        error = e.what();
    } catch (const std::filesystem::filesystem_error& e) {
        out.exit_code = kExitIoError;
        error = e.what();
    } catch (const SpectralDegeneracy& e) {
        out.exit_code = kExitNumericalError;
        error = e.what();
    } catch (const DegenerateMetric& e) {
        out.exit_code = kExitNumericalError;
        error = e.what();
    } catch (const NotChartable& e) {
        out.exit_code = kExitNumericalError;
        error = e.what();
    } catch (const InvalidArgument& e) {
        out.exit_code = kExitConfigError;
        error = e.what();
    } catch (const std::exception& e) {
        out.exit_code = kExitInternalError;
        error = e.what();
    }
    const char* status = out.exit_code == kExitOk           ? "ok"
                         : is_verdict_failure(out.exit_code) ? "verdict_failure"
                                                             : "error";
    out.summary = {{"command", config.command}, {"status", status}, {"exit_code", out.exit_code},
                   {"results", results},        {"artifacts", artifacts}};
    if (!error.empty()) out.summary["error"] = error;
    const auto end = std::chrono::system_clock::now();
    try {
        write_json(out.output_dir / "summary.json", out.summary);
        write_json(out.output_dir / "metadata.json",
                   Json{{"started_utc", detail::utc_timestamp(start)},
                        {"finished_utc", detail::utc_timestamp(end)},
                        {"wall_seconds", std::chrono::duration<double>(end - start).count()}});
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (out.exit_code == kExitOk || is_verdict_failure(out.exit_code)) out.exit_code = kExitIoError;
    }
    return out;
}

}  // namespace cmc
