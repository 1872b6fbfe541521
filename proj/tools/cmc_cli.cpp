// Batch front end: reads a JSON run config, applies command-line overrides and
// runs one subcommand. See README.md for the config schema.

#include <CLI11.hpp>

#include <iostream>

#include "cmc/cli.hpp"

namespace {

constexpr const char* kFooter = R"(Outputs (under $CMC_OUTPUT_ROOT/<output_dir> when output_dir is relative):
  resolved_config.json  every config key with its effective value
  summary.json          deterministic results of the run
  metadata.json         timestamps and wall time
  mesh.obj, mesh.csv    mesh positions (OBJ v/f) and per-node fields
Node CSV columns, in order: i,j,s,t,H,K,A2,u
Exit codes: 0 ok; 10 check failed, 11 solver not converged, 12 no multigraph
(verdicts); 20 config, 21 I/O, 22 numerical, 23 internal (errors).)";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CMC perturbations of the helicoid and multigraph certification"};
    app.footer(kFooter);
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir;
    std::int64_t seed = -1;
    for (const auto& name : cmc::subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "JSON run config")->check(CLI::ExistingFile);
        sub->add_option("-s,--set", overrides, "override a config key, e.g. --set solver.H_target=0.005");
        sub->add_option("-o,--output-dir", output_dir, "output directory");
        sub->add_option("--seed", seed, "seed for randomized probes")->check(CLI::NonNegativeNumber);
    }
    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    cmc::RunConfig config;
    try {
        cmc::Json user = config_path.empty() ? cmc::Json::object() : cmc::read_json(config_path);
        if (!user.is_object()) throw cmc::ConfigError("config root must be a JSON object");
        if (user.contains("command") && user["command"] != command)
            throw cmc::ConfigError("config command '" + user["command"].get<std::string>() +
                                   "' does not match subcommand '" + command + "'");
        user["command"] = command;
        for (const auto& o : overrides) cmc::apply_override(user, o);
        if (!output_dir.empty()) user["output_dir"] = output_dir;
        if (seed >= 0) user["seed"] = seed;
        config = cmc::RunConfig::from_json(user);
    } catch (const cmc::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cmc::kExitIoError;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cmc::kExitConfigError;
    }

    const auto result = cmc::run_pipeline(config);
    std::cout << command << ": " << result.summary["status"].get<std::string>() << " (exit " << result.exit_code
              << "), outputs in " << result.output_dir.string() << '\n';
    if (result.summary.contains("error")) std::cerr << "error: " << result.summary["error"].get<std::string>() << '\n';
    return result.exit_code;
}
