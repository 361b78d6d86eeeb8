#pragma once
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pivotal/diagnostics.hpp>
#include <pivotal/estimators.hpp>
#include <pivotal/experiments.hpp>
#include <pivotal/io.hpp>
#include <pivotal/simulate.hpp>

namespace pivotal {

/// Configuration shared by `fit`, `diagnose` and `lambda-max`: estimator fields at the top level plus a data source.
struct FitConfig
{
    EstimatorSpec estimator{};
    std::optional<std::string> data;  // dataset directory
    std::optional<SimulationSpec> sim;
    std::uint64_t replicate = 0;
    DiagnoseOptions diagnostics{};

    void validate() const
    {
        detail::require(data.has_value() != sim.has_value(), "exactly one of 'data' and 'sim' must be given");
        if (sim) sim->validate();
        estimator.validate();
        detail::require(diagnostics.alpha > 1.0, "diagnostics.alpha must be greater than 1");
        detail::require(diagnostics.rep_trials >= 1, "diagnostics.rep_trials must be positive");
    }
};

inline Json to_json(const FitConfig& c)
{
    Json j = Json::object();
    write_estimator_fields(j, c.estimator);
    if (c.data) j["data"] = *c.data;
    if (c.sim) j["sim"] = to_json(*c.sim);
    j["replicate"] = c.replicate;
    j["diagnostics"] = Json{{"alpha", c.diagnostics.alpha},
                            {"s", c.diagnostics.s},
                            {"rep_trials", c.diagnostics.rep_trials},
                            {"seed", c.diagnostics.seed}};
    return j;
}

inline FitConfig fit_config_from_json(const Json& j)
{
    FitConfig c;
    JsonReader r(j, "");
    read_estimator_fields(r, c.estimator);
    if (r.has("data")) {
        std::string d;
        r.text("data", d);
        c.data = d;
    }
    if (r.has("sim")) c.sim = simulation_spec_from_json(r.raw("sim"), "sim");
    r.integer("replicate", c.replicate);
    if (r.has("diagnostics")) {
        JsonReader d(r.raw("diagnostics"), "diagnostics");
        d.number("alpha", c.diagnostics.alpha);
        d.integer("s", c.diagnostics.s);
        d.integer("rep_trials", c.diagnostics.rep_trials);
        d.integer("seed", c.diagnostics.seed);
        d.finish();
    }
    r.finish();
    return c;
}

/**
 * Applies `path=value` to a resolved configuration. `path` is dot separated
 * (array elements by position, e.g. estimators.0.kind) and must already exist.
 * The value is read as JSON when it parses, otherwise as a string.
 */
inline void apply_override(Json& config, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw InvalidInput("override '" + assignment + "' must have the form key=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string seg = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (node->is_object() && node->contains(seg)) {
            node = &(*node)[seg];
        } else if (node->is_array() && !seg.empty() && seg.find_first_not_of("0123456789") == std::string::npos &&
                   std::stoull(seg) < node->size()) {
            node = &(*node)[std::stoull(seg)];
        } else {
            throw InvalidInput(path + ": unknown key");
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::parse_error&) {
        value = text;
    }
    *node = std::move(value);
}

namespace detail {

inline Json load_json(const std::string& path)
{
    try {
        return Json::parse(read_text_file(path));
    } catch (const Json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

/// Parse strictly, re-emit with every default filled in, apply overrides, parse again.
template <class Config, class Parse>
Config resolve_config(const std::string& path, const std::vector<std::string>& overrides, Parse parse)
{
    Json resolved = to_json(parse(load_json(path)));
    for (const auto& o : overrides) apply_override(resolved, o);
    Config c = parse(resolved);
    c.validate();
    return c;
}

inline Dataset load_fit_data(const FitConfig& c, const std::string& config_path)
{
    if (c.sim) return simulate(*c.sim, c.replicate);
    std::filesystem::path dir(*c.data);
    if (dir.is_relative()) dir = std::filesystem::path(config_path).parent_path() / dir;
    return read_dataset(dir.string());
}

inline void write_or_print(const Json& j, const std::optional<std::string>& out_dir, const std::string& file,
                           std::ostream& out)
{
    if (!out_dir) {
        out << j.dump(2) << "\n";
        return;
    }
    ensure_directory(*out_dir);
    const std::string path = (std::filesystem::path(*out_dir) / file).string();
    write_text_file(path, j.dump(2) + "\n");
    out << path << "\n";
}

} // namespace detail

/**
 * Entry point of the `pivotal` tool. Returns 0 on success, 2 on configuration
 * or input errors, 1 on numerical or I/O failures.
 */
inline int parse_and_dispatch(std::vector<std::string> args, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr)
{
    CLI::App app{"Pivotal sparse regression: estimators, certificates and simulation experiments", "pivotal"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::size_t jobs = 1;
    std::uint64_t replicate = 0;

    auto common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--set", overrides, "Override a configuration value, e.g. --set sim.snr=2")
            ->allow_extra_args(false);
        if (with_out) sub->add_option("--out", out_dir, "Output directory");
    };

    CLI::App* simulate_cmd = app.add_subcommand("simulate", "Draw a synthetic dataset and write it as CSV + manifest");
    common(simulate_cmd, true);
    simulate_cmd->add_option("--replicate", replicate, "Noise replicate index");
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one estimator");
    common(fit_cmd, true);
    CLI::App* diagnose_cmd = app.add_subcommand("diagnose", "Fit and report every certificate against the ground truth");
    common(diagnose_cmd, true);
    CLI::App* experiment_cmd = app.add_subcommand("experiment", "Run an experiment pipeline and write its tables");
    common(experiment_cmd, true);
    experiment_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    CLI::App* lmax_cmd = app.add_subcommand("lambda-max", "Print the smallest lambda giving the zero solution");
    common(lmax_cmd, false);

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    const std::optional<std::string> out_opt = out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir);
    try {
        if (simulate_cmd->parsed()) {
            const SimulationSpec spec = detail::resolve_config<SimulationSpec>(
                config_path, overrides, [](const Json& j) { return simulation_spec_from_json(j); });
            const Dataset d = simulate(spec, replicate);
            for (const auto& p : write_dataset(d, out_opt.value_or("dataset"))) out << p << "\n";
        } else if (experiment_cmd->parsed()) {
            const ExperimentConfig cfg =
                detail::resolve_config<ExperimentConfig>(config_path, overrides, experiment_config_from_json);
            const ExperimentTable table = run_experiment(cfg, jobs);
            for (const auto& p : emit_outputs(table, to_json(cfg), out_opt.value_or(cfg.output_path))) out << p << "\n";
        } else {
            const FitConfig cfg = detail::resolve_config<FitConfig>(config_path, overrides, fit_config_from_json);
            const Dataset data = detail::load_fit_data(cfg, config_path);
            if (lmax_cmd->parsed()) {
                out << format_double(lambda_max(cfg.estimator.kind, data.x, data.y, cfg.estimator.sigma_min,
                                                cfg.estimator.sigma_max))
                    << "\n";
            } else {
                const FitResult f = fit(data.x, data.y, cfg.estimator);
                if (fit_cmd->parsed()) {
                    detail::write_or_print(to_json(f), out_opt, "fit.json", out);
                } else {
                    DiagnoseOptions opts = cfg.diagnostics;
                    opts.sigma_min = cfg.estimator.sigma_min;
                    const DiagnosticsReport rep = diagnose(f, data, cfg.estimator.lambda, opts);
                    detail::write_or_print(to_json(rep), out_opt, "diagnostics.json", out);
                }
            }
        }
    } catch (const InvalidInput& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int parse_and_dispatch(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return parse_and_dispatch(std::move(args), out, err);
}

} // namespace pivotal
