#pragma once
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <pivotal/core/dataset.hpp>
#include <pivotal/core/serialize.hpp>
#include <pivotal/diagnostics.hpp>
#include <pivotal/estimators.hpp>
#include <pivotal/experiments.hpp>
#include <pivotal/simulate.hpp>

namespace pivotal {

// ---------------------------------------------------------------------------
// Strict JSON object reading: every key must be known, every value well typed.

class JsonReader
{
public:
    JsonReader(const Json& j, std::string path)
        : j_(j)
        , path_(std::move(path))
    {
        if (!j_.is_object()) throw InvalidInput(where() + ": expected a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void number(const std::string& key, double& out)
    {
        if (!has(key)) return;
        const Json& v = raw(key);
        if (v.is_number()) out = v.get<double>();
        else if (v.is_string() && (v == "inf" || v == "+inf")) out = infinity;
        else throw InvalidInput(key_path(key) + ": expected a number");
    }

    template <class Int>
    void integer(const std::string& key, Int& out)
    {
        if (!has(key)) return;
        const Json& v = raw(key);
        if (!v.is_number_integer()) throw InvalidInput(key_path(key) + ": expected an integer");
        if constexpr (std::is_unsigned_v<Int>) {
            if (v.is_number_unsigned()) out = static_cast<Int>(v.get<std::uint64_t>());
            else if (v.get<std::int64_t>() >= 0) out = static_cast<Int>(v.get<std::int64_t>());
            else throw InvalidInput(key_path(key) + ": expected a nonnegative integer");
        } else {
            out = static_cast<Int>(v.get<std::int64_t>());
        }
    }

    void text(const std::string& key, std::string& out)
    {
        if (!has(key)) return;
        const Json& v = raw(key);
        if (!v.is_string()) throw InvalidInput(key_path(key) + ": expected a string");
        out = v.get<std::string>();
    }

    void boolean(const std::string& key, bool& out)
    {
        if (!has(key)) return;
        const Json& v = raw(key);
        if (!v.is_boolean()) throw InvalidInput(key_path(key) + ": expected true or false");
        out = v.get<bool>();
    }

    template <class Enum, class Parse>
    void enumeration(const std::string& key, Enum& out, Parse parse)
    {
        std::string s;
        if (!has(key)) return;
        text(key, s);
        try {
            out = parse(s);
        } catch (const InvalidInput& e) {
            throw InvalidInput(key_path(key) + ": " + e.what());
        }
    }

    void numbers(const std::string& key, std::vector<double>& out)
    {
        if (!has(key)) return;
        const Json& v = raw(key);
        if (!v.is_array()) throw InvalidInput(key_path(key) + ": expected an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) throw InvalidInput(key_path(key) + ": expected an array of numbers");
            out.push_back(e.get<double>());
        }
    }

    void require_key(const std::string& key) const
    {
        if (!has(key)) throw InvalidInput(key_path(key) + ": required key is missing");
    }

    /// Rejects keys that were never read.
    void finish() const
    {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw InvalidInput(key_path(key) + ": unknown key");
        }
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

namespace detail {
inline Json number_json(double x)
{
    if (std::isinf(x) && x > 0) return "inf";
    return x;
}
} // namespace detail

// ---------------------------------------------------------------------------
// Specs

inline Json to_json(const SolverControls& c)
{
    return Json{{"tol", c.tol},
                {"max_epochs", c.max_epochs},
                {"s_update_every", c.s_update_every},
                {"record_objective", c.record_objective}};
}

inline SolverControls solver_controls_from_json(const Json& j, const std::string& path)
{
    SolverControls c;
    JsonReader r(j, path);
    r.number("tol", c.tol);
    r.integer("max_epochs", c.max_epochs);
    r.integer("s_update_every", c.s_update_every);
    r.boolean("record_objective", c.record_objective);
    r.finish();
    return c;
}

inline void write_estimator_fields(Json& j, const EstimatorSpec& e)
{
    j["kind"] = to_string(e.kind);
    j["lambda"] = e.lambda;
    j["sigma_min"] = e.sigma_min;
    j["sigma_max"] = detail::number_json(e.sigma_max);
    j["controls"] = to_json(e.controls);
}

inline void read_estimator_fields(JsonReader& r, EstimatorSpec& e)
{
    r.enumeration("kind", e.kind, estimator_kind_from_string);
    r.number("lambda", e.lambda);
    r.number("sigma_min", e.sigma_min);
    r.number("sigma_max", e.sigma_max);
    if (r.has("controls")) e.controls = solver_controls_from_json(r.raw("controls"), r.key_path("controls"));
}

inline Json to_json(const EstimatorSpec& e)
{
    Json j = Json::object();
    write_estimator_fields(j, e);
    return j;
}

inline EstimatorSpec estimator_spec_from_json(const Json& j, const std::string& path = "")
{
    EstimatorSpec e;
    JsonReader r(j, path);
    read_estimator_fields(r, e);
    r.finish();
    return e;
}

inline Json to_json(const SimulationSpec& s)
{
    return Json{{"n", s.n},
                {"p", s.p},
                {"q", s.q},
                {"s", s.s},
                {"rho_x", s.rho_x},
                {"snr", s.snr},
                {"normalization", to_string(s.normalization)},
                {"seed", s.seed},
                {"design", to_string(s.design)},
                {"alpha", s.alpha},
                {"noise", to_string(s.noise)},
                {"sigma", s.sigma},
                {"coef_scale", s.coef_scale}};
}

/// The seed must be given explicitly.
inline SimulationSpec simulation_spec_from_json(const Json& j, const std::string& path = "")
{
    SimulationSpec s;
    JsonReader r(j, path);
    r.require_key("seed");
    r.integer("n", s.n);
    r.integer("p", s.p);
    r.integer("q", s.q);
    r.integer("s", s.s);
    r.number("rho_x", s.rho_x);
    r.number("snr", s.snr);
    r.enumeration("normalization", s.normalization, normalization_from_string);
    r.integer("seed", s.seed);
    r.enumeration("design", s.design, design_kind_from_string);
    r.number("alpha", s.alpha);
    r.enumeration("noise", s.noise, noise_model_from_string);
    r.number("sigma", s.sigma);
    r.number("coef_scale", s.coef_scale);
    r.finish();
    return s;
}

inline Json to_json(const GeometricGrid& g)
{
    return Json{{"count", g.count}, {"min_ratio", g.min_ratio}};
}

inline GeometricGrid geometric_grid_from_json(const Json& j, const std::string& path)
{
    GeometricGrid g;
    JsonReader r(j, path);
    r.integer("count", g.count);
    r.number("min_ratio", g.min_ratio);
    r.finish();
    return g;
}

inline Json to_json(const ExperimentConfig& c)
{
    Json est = Json::array();
    for (const auto& e : c.estimators) est.push_back(to_json(e));
    return Json{{"experiment", to_string(c.experiment)},
                {"sim", to_json(c.sim)},
                {"estimators", std::move(est)},
                {"lambda_grid", to_json(c.lambda_grid)},
                {"sigma_min_grid", c.sigma_min_grid},
                {"noise_levels", c.noise_levels},
                {"replicates", c.replicates},
                {"folds", c.folds},
                {"a", c.a},
                {"output_path", c.output_path}};
}

inline ExperimentConfig experiment_config_from_json(const Json& j)
{
    ExperimentConfig c;
    JsonReader r(j, "");
    r.require_key("experiment");
    r.require_key("sim");
    r.enumeration("experiment", c.experiment, experiment_kind_from_string);
    c.sim = simulation_spec_from_json(r.raw("sim"), "sim");
    if (r.has("estimators")) {
        const Json& arr = r.raw("estimators");
        if (!arr.is_array()) throw InvalidInput("estimators: expected an array");
        c.estimators.clear();
        for (std::size_t i = 0; i < arr.size(); ++i)
            c.estimators.push_back(estimator_spec_from_json(arr[i], "estimators." + std::to_string(i)));
    }
    if (r.has("lambda_grid")) c.lambda_grid = geometric_grid_from_json(r.raw("lambda_grid"), "lambda_grid");
    r.numbers("sigma_min_grid", c.sigma_min_grid);
    r.numbers("noise_levels", c.noise_levels);
    r.integer("replicates", c.replicates);
    r.integer("folds", c.folds);
    r.number("a", c.a);
    r.text("output_path", c.output_path);
    r.finish();
    return c;
}

// ---------------------------------------------------------------------------
// Results

inline Json to_json(const FitResult& f)
{
    Json j{{"kind", to_string(f.kind)},
           {"coef", matrix_to_json(f.coef)},
           {"objective", f.objective},
           {"epochs", f.epochs},
           {"kkt_violation", f.kkt_violation},
           {"converged", f.converged},
           {"support", row_support(f.coef)}};
    if (f.sigma) j["sigma"] = *f.sigma;
    if (f.noise_root) j["noise_root"] = matrix_to_json(*f.noise_root);
    if (!f.objective_trace.empty()) j["objective_trace"] = f.objective_trace;
    return j;
}

inline Json to_json(const DiagnosticsReport& d)
{
    Json events = Json::object();
    for (const auto& [k, v] : d.events) events[k] = v;
    return Json{{"dantzig_margin", d.dantzig_margin},
                {"incoherence_alpha", detail::number_json(d.incoherence_alpha)},
                {"rep_ratio", d.rep_ratio},
                {"cone_ratio", detail::number_json(d.cone_ratio)},
                {"eta", d.eta},
                {"supnorm_lhs", d.supnorm_lhs},
                {"supnorm_rhs", d.supnorm_rhs},
                {"events", std::move(events)},
                {"support_hat", d.support_hat},
                {"recovery",
                 {{"hard", d.recovery.hard ? 1 : 0},
                  {"true_positives", d.recovery.true_positives},
                  {"false_positives", d.recovery.false_positives}}}};
}

// ---------------------------------------------------------------------------
// Dataset directories: X.csv, Y.csv, optional B_star.csv, manifest.json

inline void ensure_directory(const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

inline std::vector<std::string> write_dataset(const Dataset& d, const std::string& dir)
{
    d.validate();
    ensure_directory(dir);
    const std::filesystem::path base(dir);
    std::vector<std::string> paths;
    auto put = [&](const std::string& name, const std::string& text) {
        const std::string path = (base / name).string();
        write_text_file(path, text);
        paths.push_back(path);
    };
    Json manifest{{"n", d.n()}, {"p", d.p()}, {"q", d.q()}, {"normalization", to_string(d.normalization)},
                  {"x", "X.csv"}, {"y", "Y.csv"}};
    put("X.csv", matrix_to_csv(d.x));
    put("Y.csv", matrix_to_csv(d.y));
    if (d.truth) {
        put("B_star.csv", matrix_to_csv(d.truth->coef));
        manifest["truth"] = Json{{"coef", "B_star.csv"}, {"sigma_star", d.truth->sigma}, {"support", d.truth->support}};
    }
    put("manifest.json", manifest.dump(2) + "\n");
    return paths;
}

inline Dataset read_dataset(const std::string& dir)
{
    const std::filesystem::path base(dir);
    Json manifest;
    try {
        manifest = Json::parse(read_text_file((base / "manifest.json").string()));
    } catch (const Json::parse_error& e) {
        throw InvalidInput((base / "manifest.json").string() + ": " + e.what());
    }
    JsonReader r(manifest, "manifest");
    Index n = 0, p = 0, q = 0;
    std::string xf = "X.csv", yf = "Y.csv";
    Dataset d;
    r.integer("n", n);
    r.integer("p", p);
    r.integer("q", q);
    r.enumeration("normalization", d.normalization, normalization_from_string);
    r.text("x", xf);
    r.text("y", yf);
    d.x = matrix_from_csv(read_text_file((base / xf).string()));
    d.y = matrix_from_csv(read_text_file((base / yf).string()));
    if (r.has("truth")) {
        JsonReader t(r.raw("truth"), "manifest.truth");
        std::string cf = "B_star.csv";
        GroundTruth truth;
        t.text("coef", cf);
        t.number("sigma_star", truth.sigma);
        Support listed;
        if (t.has("support")) listed = t.raw("support").get<Support>();
        t.finish();
        truth.coef = matrix_from_csv(read_text_file((base / cf).string()));
        truth.support = row_support(truth.coef);
        if (t.has("support"))
            detail::require(listed == truth.support, "manifest.truth.support does not match the nonzero rows of B_star");
        d.truth = std::move(truth);
    }
    r.finish();
    detail::require(d.n() == n && d.p() == p && d.q() == q, "manifest: matrix shapes do not match n, p, q");
    d.validate();
    return d;
}

/**
 * Writes `<name>.csv` and `<name>.config.json` into `dir` (plus `<name>_cells.csv`
 * for the recovery heatmap) and returns the paths.
 */
inline std::vector<std::string> emit_outputs(const ExperimentTable& table, const Json& resolved_config,
                                             const std::string& dir)
{
    ensure_directory(dir);
    const std::filesystem::path base(dir);
    std::vector<std::string> paths;
    auto put = [&](const std::string& name, const std::string& text) {
        const std::string path = (base / name).string();
        write_text_file(path, text);
        paths.push_back(path);
    };
    put(table.name + ".csv", table.to_csv());
    put(table.name + ".config.json", resolved_config.dump(2) + "\n");
    if (table.name == "recovery_heatmap") {
        const ExperimentTable cells = heatmap_cell_means(table);
        put(cells.name + ".csv", cells.to_csv());
    }
    return paths;
}

} // namespace pivotal
