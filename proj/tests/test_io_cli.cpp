#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <numbers>

#include "cmc/cli.hpp"

namespace {

using namespace cmc;
namespace fs = std::filesystem;
constexpr double pi = std::numbers::pi;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cmc_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    return p;
}

Json small_grid(double s0, double s1, double t0, double t1, int ns, int nt) {
    return {{"s_min", s0}, {"s_max", s1}, {"t_min", t0}, {"t_max", t1}, {"n_s", ns}, {"n_t", nt}};
}

Json config(const std::string& command, const fs::path& out) {
    return {{"command", command},
            {"output_dir", out.string()},
            {"surface", {{"grid", small_grid(-2, 2, -2 * pi, 2 * pi, 41, 61)}}}};
}

TEST(FormatDouble, SeventeenSignificantDigits) {
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1.0), "1");
    const double x = 2.0 / 3.0;
    EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(RunConfig, DefaultsAreExplicit) {
    const auto c = RunConfig::from_json({{"command", "analyze"}});
    EXPECT_EQ(c.resolved["solver"]["H_target"], 1e-2);
    EXPECT_EQ(c.resolved["multigraph"]["N"], 2);
    EXPECT_EQ(c.resolved["surface"]["grid"]["n_s"], 161);
    EXPECT_EQ(c.solver.grid, default_helicoid_grid());
}

TEST(RunConfig, UnknownKeysAreRejected) {
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"colour", 1}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"solver", {{"H_targt", 1}}}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"surface", {{"grid", {{"nx", 3}}}}}}), ConfigError);
}

TEST(RunConfig, TypesAndRangesAreValidated) {
    EXPECT_THROW(RunConfig::from_json({{"command", "fly"}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json(Json::object()), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"seed", "x"}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"multigraph", {{"N", 1.5}}}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"multigraph", {{"omega", 1.0}}}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"stability", {{"deltas", {1.0}}}}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"surface", {{"kind", "torus"}}}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"surface", {{"grid", {{"n_s", 3}}}}}}),
                 ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "verify"}}), ConfigError);
    EXPECT_THROW(RunConfig::from_json({{"command", "analyze"}, {"input", {{"mesh_obj", "a.obj"}}}}), ConfigError);
    // integers are accepted where reals are expected
    EXPECT_NO_THROW(RunConfig::from_json({{"command", "analyze"}, {"surface", {{"radius", 2}}}}));
}

TEST(RunConfig, Overrides) {
    Json user = Json::object();
    apply_override(user, "solver.H_target=0.005");
    apply_override(user, "surface.kind=sphere");
    apply_override(user, "stability.deltas=[0.1,0.2]");
    EXPECT_EQ(user["solver"]["H_target"], 0.005);
    EXPECT_EQ(user["surface"]["kind"], "sphere");
    EXPECT_EQ(user["stability"]["deltas"].size(), 2u);
    EXPECT_THROW(apply_override(user, "novalue"), ConfigError);
    EXPECT_THROW(apply_override(user, "a..b=1"), ConfigError);
}

TEST(OutputRoot, EnvironmentVariableIsHonoured) {
    const fs::path root = scratch("root");
    ::setenv("CMC_OUTPUT_ROOT", root.c_str(), 1);
    EXPECT_EQ(resolve_output_dir("run1"), root / "run1");
    EXPECT_EQ(resolve_output_dir("/abs/run"), fs::path("/abs/run"));
    auto c = config("build-helicoid", "rel_run");
    const auto r = run_pipeline(RunConfig::from_json(c));
    ::unsetenv("CMC_OUTPUT_ROOT");
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_TRUE(fs::exists(root / "rel_run" / "summary.json"));
    EXPECT_EQ(resolve_output_dir("run1"), fs::path("run1"));
}

TEST(Pipeline, BuildHelicoidWritesArtifacts) {
    const auto out = scratch("build");
    const auto r = run_pipeline(RunConfig::from_json(config("build-helicoid", out)));
    ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump();
    for (const char* f : {"mesh.obj", "mesh.csv", "summary.json", "metadata.json", "resolved_config.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto table = read_csv(out / "mesh.csv");
    EXPECT_EQ(table.header, node_csv_columns());
    EXPECT_EQ(table.rows.size(), 41u * 61u);
    EXPECT_LE(r.summary["results"]["gauss_residual"].get<double>(), 1e-3);
}

TEST(Pipeline, BuildHelicoidRequiresHelicoid) {
    auto c = config("build-helicoid", scratch("wrong_kind"));
    c["surface"]["kind"] = "plane";
    EXPECT_EQ(run_pipeline(RunConfig::from_json(c)).exit_code, kExitConfigError);
}

TEST(Pipeline, SummaryIsDeterministic) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    auto ca = config("perturb", "same"), cb = config("perturb", "same");
    ca["output_dir"] = a.string();
    cb["output_dir"] = b.string();
    run_pipeline(RunConfig::from_json(ca));
    run_pipeline(RunConfig::from_json(cb));
    // output_dir differs; everything else in the summary must match byte for byte
    EXPECT_EQ(read_text(a / "summary.json"), read_text(b / "summary.json"));
    EXPECT_EQ(read_text(a / "solve_report.json"), read_text(b / "solve_report.json"));
    EXPECT_EQ(read_text(a / "mesh.csv"), read_text(b / "mesh.csv"));
}

TEST(Pipeline, ResolvedConfigReproducesTheRun) {
    const auto out = scratch("resolved");
    const auto first = run_pipeline(RunConfig::from_json(config("analyze", out)));
    const Json resolved = read_json(out / "resolved_config.json");
    const std::string summary = read_text(out / "summary.json");
    const auto second = run_pipeline(RunConfig::from_json(resolved));
    EXPECT_EQ(first.exit_code, second.exit_code);
    EXPECT_EQ(read_text(out / "summary.json"), summary);
    EXPECT_EQ(read_json(out / "resolved_config.json"), resolved);
}

TEST(Pipeline, PerturbWithZeroTarget) {
    const auto out = scratch("perturb0");
    auto c = config("perturb", out);
    c["solver"] = {{"H_target", 0.0}, {"dump_iterations", true}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump();
    const auto rep = solve_report_from_json(read_json(out / "solve_report.json"));
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations.size(), 1u);
    EXPECT_EQ(r.summary["results"]["sup_u"].get<double>(), 0.0);
    EXPECT_TRUE(fs::exists(out / "iterates" / "iter_0001.csv"));
}

TEST(Pipeline, PerturbAndVerify) {
    const auto out = scratch("perturb");
    auto c = config("perturb", out);
    c["analyze"] = {{"gauss_tol", 1e-2}};  // the Gauss check of the coarse test grid
    const auto r = run_pipeline(RunConfig::from_json(c));
    ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump();
    const auto report_json = read_json(out / "solve_report.json");
    for (const char* key : {"H_target", "iterations", "B_estimate", "lambda_min_abs", "final_residual", "converged",
                            "embedded", "linearization_constant", "message"})
        EXPECT_TRUE(report_json.contains(key)) << key;
    const auto v = run_pipeline(RunConfig::from_json(
        {{"command", "verify"}, {"output_dir", scratch("verify_perturb").string()}, {"verify", {{"run_dir", out.string()}}}}));
    EXPECT_EQ(v.exit_code, kExitOk) << v.summary.dump(2);
}

TEST(Pipeline, ContractionFailureIsAVerdict) {
    auto c = config("perturb", scratch("perturb_big"));
    c["solver"] = {{"H_target", 0.03}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    EXPECT_EQ(r.exit_code, kExitNotConverged);
    EXPECT_TRUE(is_verdict_failure(r.exit_code));
}

TEST(Pipeline, FoldedVariationIsANumericalError) {
    auto c = config("perturb", scratch("perturb_fold"));
    c["solver"] = {{"H_target", 2.0}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    EXPECT_EQ(r.exit_code, kExitNumericalError);
    EXPECT_TRUE(is_error(r.exit_code));
}

TEST(Pipeline, AnalyzeSphere) {
    const auto out = scratch("analyze_sphere");
    Json c{{"command", "analyze"},
           {"output_dir", out.string()},
           {"surface", {{"kind", "sphere"}, {"radius", 1.0}, {"grid", small_grid(0, pi, pi / 4, 3 * pi / 4, 161, 161)}}}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump();
    const auto& res = r.summary["results"];
    EXPECT_LE(res["gauss_residual"].get<double>(), 1e-3);
    const double h = res["max_edge"].get<double>();
    EXPECT_LE(std::abs(res["H"]["min"].get<double>() - 2.0), 10 * h * h);
    EXPECT_LE(std::abs(res["H"]["max"].get<double>() - 2.0), 10 * h * h);
    EXPECT_TRUE(fs::exists(out / "forms.csv"));
}

TEST(Pipeline, AnalyzeToleranceFailureIsAVerdict) {
    auto c = config("analyze", scratch("analyze_strict"));
    c["surface"] = {{"kind", "sphere"}, {"grid", small_grid(0, 2 * pi, 0.4, pi - 0.4, 21, 21)}};
    c["analyze"] = {{"gauss_tol", 1e-12}};
    EXPECT_EQ(run_pipeline(RunConfig::from_json(c)).exit_code, kExitCheckFailed);
}

TEST(Pipeline, AnalyzeStoredMesh) {
    const auto src = scratch("stored_src");
    ASSERT_EQ(run_pipeline(RunConfig::from_json(config("build-helicoid", src))).exit_code, kExitOk);
    auto c = config("analyze", scratch("stored_analyze"));
    c["input"] = {{"mesh_obj", (src / "mesh.obj").string()}, {"mesh_csv", (src / "mesh.csv").string()}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    EXPECT_EQ(r.exit_code, kExitOk);
    const auto direct = run_pipeline(RunConfig::from_json(config("analyze", scratch("direct_analyze"))));
    EXPECT_EQ(r.summary["results"], direct.summary["results"]);
}

TEST(Pipeline, MissingInputIsAnIoError) {
    auto c = config("analyze", scratch("missing"));
    c["input"] = {{"mesh_obj", "/nonexistent/a.obj"}, {"mesh_csv", "/nonexistent/a.csv"}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    EXPECT_EQ(r.exit_code, kExitIoError);
    EXPECT_TRUE(is_error(r.exit_code));
    EXPECT_TRUE(r.summary.contains("error"));
}

TEST(Pipeline, DetectMultigraphOnTheHelicoid) {
    const auto out = scratch("detect");
    auto c = config("detect-multigraph", out);
    c["surface"]["grid"] = small_grid(-5, 5, -3 * pi, 3 * pi, 101, 241);
    c["multigraph"] = {{"N", 2}, {"omega", 2.0}, {"epsilon", 0.5}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump();
    ASSERT_TRUE(fs::exists(out / "certificate.json"));
    const auto cert = certificate_from_json(read_json(out / "certificate.json"));
    EXPECT_EQ(cert.N, 2);
    const auto sheet = read_csv(out / "sheet.csv");
    EXPECT_EQ(sheet.header, (std::vector<std::string>{"rho", "theta", "u"}));
    EXPECT_EQ(sheet.rows.size(), cert.u.size());
    const auto v = run_pipeline(RunConfig::from_json(
        {{"command", "verify"}, {"output_dir", scratch("verify_detect").string()}, {"verify", {{"run_dir", out.string()}}}}));
    EXPECT_EQ(v.exit_code, kExitOk) << v.summary.dump(2);
}

TEST(Pipeline, DetectAbsentIsAVerdict) {
    const auto out = scratch("detect_none");
    auto c = config("detect-multigraph", out);
    c["surface"] = {{"kind", "catenoid"}, {"grid", small_grid(-1, 1, 0, 2 * pi, 41, 81)}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    EXPECT_EQ(r.exit_code, kExitNoMultigraph);
    EXPECT_TRUE(fs::exists(out / "absence.json"));
}

TEST(Pipeline, StabilityScanAndVerify) {
    const auto out = scratch("scan");
    auto c = config("stability-scan", out);
    c["stability"] = {{"deltas", {0.0, 0.9}}, {"radii", {0.5, 1.0}}};
    const auto r = run_pipeline(RunConfig::from_json(c));
    ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump();
    const auto cells = read_json(out / "stability.json");
    ASSERT_EQ(cells.size(), 4u);
    for (const auto& cell : cells)
        for (const char* key : {"delta", "lambda1", "stable", "domain", "eig_tol"}) EXPECT_TRUE(cell.contains(key));
    const auto v = run_pipeline(RunConfig::from_json(
        {{"command", "verify"}, {"output_dir", scratch("verify_scan").string()}, {"verify", {{"run_dir", out.string()}}}}));
    EXPECT_EQ(v.exit_code, kExitOk) << v.summary.dump(2);
}

TEST(Pipeline, RescaleAndVerify) {
    const auto out = scratch("rescale");
    const auto r = run_pipeline(RunConfig::from_json(config("rescale", out)));
    ASSERT_EQ(r.exit_code, kExitOk) << r.summary.dump();
    EXPECT_TRUE(fs::exists(out / "rescaled_2.obj"));
    const auto v = run_pipeline(RunConfig::from_json(
        {{"command", "verify"}, {"output_dir", scratch("verify_rescale").string()}, {"verify", {{"run_dir", out.string()}}}}));
    EXPECT_EQ(v.exit_code, kExitOk) << v.summary.dump(2);
}

TEST(Pipeline, VerifyDetectsTampering) {
    const auto out = scratch("tamper");
    auto c = config("detect-multigraph", out);
    c["surface"]["grid"] = small_grid(-5, 5, -3 * pi, 3 * pi, 101, 241);
    ASSERT_EQ(run_pipeline(RunConfig::from_json(c)).exit_code, kExitOk);
    Json cert = read_json(out / "certificate.json");
    cert["grad_bound"] = cert["grad_bound"].get<double>() * 0.5;
    write_json(out / "certificate.json", cert);
    const auto v = run_pipeline(RunConfig::from_json(
        {{"command", "verify"}, {"output_dir", scratch("verify_tamper").string()}, {"verify", {{"run_dir", out.string()}}}}));
    EXPECT_EQ(v.exit_code, kExitCheckFailed);
}

TEST(MeshIo, ObjAndCsvRoundTripExactly) {
    const auto out = scratch("mesh_io");
    const auto mesh = build_helicoid(ParamGrid::make(-1.3, 2.1, -0.7, 3.3, 13, 17));
    ScalarField u = ScalarField::sample(mesh.grid, [](double s, double t) { return std::sin(s * t) / 3.0; });
    write_obj(out / "m.obj", mesh);
    write_node_csv(out / "m.csv", mesh, u);
    const auto back = read_mesh(out / "m.obj", out / "m.csv");
    EXPECT_EQ(back.mesh.grid, mesh.grid);
    EXPECT_EQ(back.mesh.position, mesh.position);
    EXPECT_EQ(back.u.values(), u.values());
}

TEST(MeshIo, MalformedCsvIsReported) {
    const auto out = scratch("bad_csv");
    fs::create_directories(out);
    { open_for_write(out / "x.csv") << "a,b\n1,zz\n"; }
    EXPECT_THROW(read_csv(out / "x.csv"), IoError);
    { open_for_write(out / "y.csv") << "a,b\n1\n"; }
    EXPECT_THROW(read_csv(out / "y.csv"), IoError);
}

TEST(JsonIo, SolveReportRoundTrip) {
    SolveReport r;
    r.H_target = 0.01;
    r.iterations = {{1, 0.1, 0.2, 0.3, 0.1, std::numeric_limits<double>::quiet_NaN()}, {2, 0.11, 0.2, 0.31, 0.01, 0.1}};
    r.B_estimate = 47.2;
    r.converged = true;
    r.message = "converged";
    const auto back = solve_report_from_json(Json::parse(to_json(r).dump()));
    EXPECT_EQ(back.iterations.size(), 2u);
    EXPECT_TRUE(std::isnan(back.iterations[0].contraction));
    EXPECT_EQ(back.iterations[1].contraction, 0.1);
    EXPECT_EQ(back.B_estimate, 47.2);
    EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
}

}  // namespace
