#include "ctsm/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "ctsm/data_io.hpp"
#include "ctsm/errors.hpp"
#include "ctsm/evaluation.hpp"
#include "ctsm/kalman.hpp"
#include "ctsm/simulation.hpp"

#ifndef CTSM_VERSION
#define CTSM_VERSION "0.0.0"
#endif

namespace ctsm::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
    std::vector<std::string> out;
    for (const auto& p : paths) out.push_back(p.string());
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
    out << text;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open '" + path.string() + "' for reading");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<std::string> state_names(const ParamSet& params) {
    BuildOptions build;
    build.check_psd = false;
    const AffineModelSpec spec = build_model(params, build);
    std::vector<std::string> names;
    for (FactorRole role : spec.roles) names.emplace_back(to_string(role));
    return names;
}

Eigen::MatrixXd stack_states(const std::vector<StateVector>& states) {
    const int n = states.empty() ? 0 : static_cast<int>(states.front().size());
    Eigen::MatrixXd out(static_cast<int>(states.size()), n);
    for (std::size_t t = 0; t < states.size(); ++t) out.row(static_cast<int>(t)) = states[t].transpose();
    return out;
}

// Collects artifacts and writes the manifest last.
class RunOutput {
public:
    RunOutput(const RunConfig& config, std::ostream& log) : config_(config), log_(log) {
        dir_ = config.output_dir.empty() ? default_output_dir() : config.output_dir;
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) {
        outputs_.push_back(name);
        return dir_ / name;
    }

    void text(const std::string& name, const std::string& content) { write_text(path(name), content); }

    void json(const std::string& name, const nlohmann::json& j) { text(name, j.dump(2) + "\n"); }

    void finish() {
        const nlohmann::json cfg = to_json(config_);
        nlohmann::json manifest = {
            {"command", config_.command},
            {"config", cfg},
            {"config_hash", hex(config_hash(cfg))},
            {"seed", config_.seed ? nlohmann::json(*config_.seed) : nlohmann::json(nullptr)},
            {"versions",
             {{"ctsm", CTSM_VERSION},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"compiler", __VERSION__}}},
            {"outputs", outputs_}};
        write_text(dir_ / "manifest.json", manifest.dump(2) + "\n");
        for (const auto& o : outputs_) log_ << (dir_ / o).string() << '\n';
        log_ << (dir_ / "manifest.json").string() << '\n';
    }

private:
    const RunConfig& config_;
    std::ostream& log_;
    fs::path dir_;
    std::vector<std::string> outputs_;
};

Panel load_input(const RunConfig& c, std::ostream& log) {
    if (!c.panel_csv.empty()) return read_panel_csv(c.panel_csv);
    if (c.futures_csv.empty()) throw UsageError("an input is required: --panel or --futures-csv");
    FuturesLoadOptions options;
    options.exclude_front = !c.include_front;
    IngestReport report;
    Panel futures = load_futures_csv(c.futures_csv, {}, options, &report);
    if (report.masked_missing + report.masked_nonpositive > 0) {
        log << "futures: masked " << report.masked_missing << " missing and " << report.masked_nonpositive
            << " non-positive entries\n";
    }
    if (c.yields_csv.empty()) return futures;
    const Panel yields = load_yields_csv(c.yields_csv, {}, &report);
    IngestReport joined;
    Panel panel = join_panels(futures, yields, &joined);
    if (joined.dates_dropped > 0) log << "join: dropped " << joined.dates_dropped << " unmatched dates\n";
    return panel;
}

// Parameters from either an estimation result or a bare parameter set.
FittedModel load_params(const fs::path& path) {
    const nlohmann::json j = read_json(path);
    if (j.contains("params")) return fitted_model_from_json(j);
    FittedModel out;
    out.params = param_set_from_json(j);
    out.futures_labels = out.params.noise().futures_labels;
    out.yield_labels = out.params.noise().yield_labels;
    out.mode = out.yield_labels.empty() ? FitMode::FuturesOnly : FitMode::Joint;
    return out;
}

void run_simulate(const RunConfig& c, std::ostream& log) {
    if (!c.seed) throw UsageError("simulate requires --seed");
    ParamSet params;
    NoiseSpec noise;
    if (!c.params_json.empty()) {
        params = load_params(c.params_json).params;
        noise = params.noise();
    } else {
        params = default_params(c.model, c.simulate_futures);
        BuildOptions build;
        build.check_psd = false;
        const bool rates = build_model(params, build).short_rate_index.has_value();
        // Zero noise is allowed here although a ParamSet requires positive
        // noise, so the noise travels separately.
        noise = NoiseSpec::uniform(c.simulate_futures, c.sigma_eps,
                                   rates ? c.yields : std::vector<std::string>{}, c.sigma_psi);
    }
    PanelSimConfig sim;
    sim.futures_labels = noise.futures_labels;
    sim.yield_labels = noise.yield_labels;
    sim.n_days = c.days;
    sim.seed = *c.seed;
    sim.start = parse_date(c.start_date);
    const SimulatedPanel out = simulate_panel(build_model(params), noise, sim);

    RunOutput files(c, log);
    {
        std::ostringstream os;
        write_panel_csv(os, out.panel);
        files.text("panel.csv", os.str());
    }
    {
        std::ostringstream os;
        write_futures_csv(os, out.panel);
        files.text("futures.csv", os.str());
    }
    if (out.panel.num_yields() > 0) {
        std::ostringstream os;
        write_yields_csv(os, out.panel);
        files.text("yields.csv", os.str());
    }
    {
        std::ostringstream os;
        write_states_csv(os, out.panel, out.states, state_names(params));
        files.text("states.csv", os.str());
    }
    if (noise.sigma_eps.size() > 0 && noise.sigma_eps.minCoeff() > 0.0 &&
        (noise.sigma_psi.size() == 0 || noise.sigma_psi.minCoeff() > 0.0)) {
        params.noise() = noise;
    }
    files.json("truth.json", to_json(params));
    files.finish();
}

FitConfig fit_config(const RunConfig& c) {
    FitConfig f;
    f.mode = c.mode;
    f.futures_labels = c.estimation_futures;
    f.yield_labels = c.mode == FitMode::Joint ? c.yields : std::vector<std::string>{};
    f.seed = *c.seed;
    f.n_starts = c.n_starts;
    f.evals_per_start = c.evals_per_start;
    f.max_restarts = c.max_restarts;
    f.evals_per_restart = c.evals_per_restart;
    f.polish = c.polish_iter > 0;
    f.polish_iter = c.polish_iter;
    f.compute_standard_errors = c.standard_errors;
    return f;
}

void run_estimate(const RunConfig& c, std::ostream& log) {
    if (!c.seed) throw UsageError("estimate requires --seed");
    const Panel panel = load_input(c, log);
    FitConfig fit = fit_config(c);
    fit.progress = [&log](const std::string& message) { log << "estimate: " << message << '\n'; };
    const EstimationResult result = fit_mle(c.model, panel, fit);

    RunOutput files(c, log);
    files.json("estimate.json", to_json(result));
    std::ostringstream os;
    write_states_csv(os, fit_panel(panel, fit), stack_states(result.filter.filtered), state_names(result.params));
    files.text("filtered_states.csv", os.str());
    files.finish();
}

void run_filter_command(const RunConfig& c, std::ostream& log) {
    if (c.params_json.empty()) throw UsageError("filter requires --params");
    const FittedModel fitted = load_params(c.params_json);
    const Panel panel = load_input(c, log).select(fitted.futures_labels, fitted.yield_labels);
    const FilterOutput out = filter_panel(fitted.params, panel);

    RunOutput files(c, log);
    {
        std::ostringstream os;
        write_states_csv(os, panel, stack_states(out.filtered), state_names(fitted.params));
        files.text("filtered_states.csv", os.str());
    }
    {
        std::vector<std::string> names = panel.futures_labels;
        names.insert(names.end(), panel.yield_labels.begin(), panel.yield_labels.end());
        std::ostringstream os;
        write_states_csv(os, panel, out.innovations, names);
        files.text("innovations.csv", os.str());
    }
    files.json("filter.json", {{"model", std::string(to_string(fitted.params.model()))},
                               {"loglik", out.loglik},
                               {"n_dates", panel.num_dates()},
                               {"n_observations", panel.observation_count()}});
    files.finish();
}

void run_evaluate(const RunConfig& c, std::ostream& log) {
    if (c.params_json.empty()) throw UsageError("evaluate requires --params (an estimate.json)");
    const FittedModel fitted = load_params(c.params_json);
    const Panel panel = load_input(c, log);
    EvalOptions options;
    options.burn_in = c.burn_in;
    options.abs_denominator = c.abs_mape;
    const EvalReport report = out_of_sample(fitted.params, fitted.mode, panel, fitted.futures_labels,
                                            fitted.yield_labels, c.holdout, options);

    RunOutput files(c, log);
    files.json("evaluation.json", to_json(report));
    std::ostringstream os;
    write_out_of_sample_csv(os, {report});
    files.text("evaluation.csv", os.str());
    files.finish();
}

void run_report(const RunConfig& c, std::ostream& log) {
    if (c.inputs.empty()) throw UsageError("report requires --inputs");
    std::vector<EstimationResult> fits;
    std::vector<EvalReport> evals;
    for (const auto& path : c.inputs) {
        const nlohmann::json j = read_json(path);
        if (j.contains("holdout")) evals.push_back(eval_report_from_json(j));
        else if (j.contains("params")) fits.push_back(estimation_result_from_json(j));
        else throw InvalidArgument(path.string() + " is neither an estimation nor an evaluation result");
    }
    RunOutput files(c, log);
    if (!fits.empty()) {
        std::ostringstream os;
        write_in_sample_csv(os, fits);
        files.text("in_sample.csv", os.str());
    }
    if (!evals.empty()) {
        std::ostringstream os;
        write_out_of_sample_csv(os, evals);
        files.text("out_of_sample.csv", os.str());
    }
    files.finish();
}

// Reads --config from argv ahead of parsing so its values become defaults.
std::optional<fs::path> find_config(int argc, const char* const* argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return fs::path(argv[i + 1]);
        if (arg.rfind("--config=", 0) == 0) return fs::path(arg.substr(9));
    }
    return std::nullopt;
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j = {{"command", c.command},
                        {"model", std::string(to_string(c.model))},
                        {"mode", std::string(to_string(c.mode))},
                        {"panel_csv", c.panel_csv.string()},
                        {"futures_csv", c.futures_csv.string()},
                        {"yields_csv", c.yields_csv.string()},
                        {"params_json", c.params_json.string()},
                        {"inputs", path_strings(c.inputs)},
                        {"days", c.days},
                        {"start_date", c.start_date},
                        {"sigma_eps", c.sigma_eps},
                        {"sigma_psi", c.sigma_psi},
                        {"simulate_futures", c.simulate_futures},
                        {"estimation_futures", c.estimation_futures},
                        {"yields", c.yields},
                        {"holdout", c.holdout},
                        {"n_starts", c.n_starts},
                        {"evals_per_start", c.evals_per_start},
                        {"max_restarts", c.max_restarts},
                        {"evals_per_restart", c.evals_per_restart},
                        {"polish_iter", c.polish_iter},
                        {"standard_errors", c.standard_errors},
                        {"burn_in", c.burn_in},
                        {"abs_mape", c.abs_mape},
                        {"include_front", c.include_front}};
    j["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("run config must be a JSON object");
    RunConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "command") c.command = value.get<std::string>();
            else if (key == "model") c.model = model_id_from_string(value.get<std::string>());
            else if (key == "mode") c.mode = fit_mode_from_string(value.get<std::string>());
            else if (key == "panel_csv") c.panel_csv = value.get<std::string>();
            else if (key == "futures_csv") c.futures_csv = value.get<std::string>();
            else if (key == "yields_csv") c.yields_csv = value.get<std::string>();
            else if (key == "params_json") c.params_json = value.get<std::string>();
            else if (key == "inputs") {
                c.inputs.clear();
                for (const auto& p : value.get<std::vector<std::string>>()) c.inputs.emplace_back(p);
            }
            else if (key == "output_dir") c.output_dir = value.get<std::string>();
            else if (key == "seed") {
                if (value.is_null()) c.seed.reset();
                else c.seed = value.get<std::uint64_t>();
            }
            else if (key == "days") c.days = value.get<int>();
            else if (key == "start_date") c.start_date = value.get<std::string>();
            else if (key == "sigma_eps") c.sigma_eps = value.get<double>();
            else if (key == "sigma_psi") c.sigma_psi = value.get<double>();
            else if (key == "simulate_futures") c.simulate_futures = value.get<std::vector<std::string>>();
            else if (key == "estimation_futures") c.estimation_futures = value.get<std::vector<std::string>>();
            else if (key == "yields") c.yields = value.get<std::vector<std::string>>();
            else if (key == "holdout") c.holdout = value.get<std::vector<std::string>>();
            else if (key == "n_starts") c.n_starts = value.get<int>();
            else if (key == "evals_per_start") c.evals_per_start = value.get<int>();
            else if (key == "max_restarts") c.max_restarts = value.get<int>();
            else if (key == "evals_per_restart") c.evals_per_restart = value.get<int>();
            else if (key == "polish_iter") c.polish_iter = value.get<int>();
            else if (key == "standard_errors") c.standard_errors = value.get<bool>();
            else if (key == "burn_in") c.burn_in = value.get<int>();
            else if (key == "abs_mape") c.abs_mape = value.get<bool>();
            else if (key == "include_front") c.include_front = value.get<bool>();
            else throw InvalidArgument("unknown run config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed run config: ") + e.what());
    }
    return c;
}

std::uint64_t config_hash(const nlohmann::json& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char ch : config.dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

fs::path default_output_dir() {
    if (const char* env = std::getenv("CTSM_OUTPUT_DIR"); env && *env) return fs::path(env);
    return fs::path("ctsm_out");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        if (const auto path = find_config(argc, argv)) config = run_config_from_json(read_json(*path));
    } catch (const std::exception& e) {
        err << "error: --config: " << e.what() << '\n';
        return kExitUsageError;
    }

    CLI::App app{"Commodity futures term-structure models: simulation, estimation and evaluation", "ctsm"};
    app.require_subcommand(1);
    app.set_version_flag("--version", CTSM_VERSION);

    std::string model_name(to_string(config.model));
    std::string mode_name(to_string(config.mode));
    std::string panel_csv = config.panel_csv.string();
    std::string futures_csv = config.futures_csv.string();
    std::string yields_csv = config.yields_csv.string();
    std::string params_json = config.params_json.string();
    std::string output_dir = config.output_dir.string();
    std::string config_path;
    std::vector<std::string> inputs = path_strings(config.inputs);
    std::uint64_t seed = config.seed.value_or(0);

    std::vector<std::string> model_names;
    for (ModelId id : kAllModels) model_names.emplace_back(to_string(id));

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration supplying defaults")
            ->check(CLI::ExistingFile);
        sub->add_option("-o,--output-dir", output_dir, "Output directory (default $CTSM_OUTPUT_DIR or ctsm_out)");
    };
    auto inputs_group = [&](CLI::App* sub) {
        sub->add_option("--panel", panel_csv, "Panel CSV (date, ln_F_n, R_m, tau_F_n)")->check(CLI::ExistingFile);
        sub->add_option("--futures-csv", futures_csv, "Raw futures prices (date, F1, F2, ...)")
            ->check(CLI::ExistingFile);
        sub->add_option("--yields-csv", yields_csv, "Raw yields in percent (date, R3, R6, ...)")
            ->check(CLI::ExistingFile);
        sub->add_flag("--include-front", config.include_front, "Keep the front contract F1");
    };
    auto model_option = [&](CLI::App* sub) {
        sub->add_option("-m,--model", model_name, "Model id")->check(CLI::IsMember(model_names));
    };

    CLI::App* simulate = app.add_subcommand("simulate", "Simulate a synthetic panel and its hidden states");
    common(simulate);
    model_option(simulate);
    simulate->add_option("--params", params_json, "Parameter JSON (default: the model's default parameters)")
        ->check(CLI::ExistingFile);
    simulate->add_option("--days", config.days, "Number of business days")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", seed, "Random seed");
    simulate->add_option("--start", config.start_date, "First date (YYYY-MM-DD)");
    simulate->add_option("--sigma-eps", config.sigma_eps, "Futures noise standard deviation")
        ->check(CLI::NonNegativeNumber);
    simulate->add_option("--sigma-psi", config.sigma_psi, "Yield noise standard deviation")
        ->check(CLI::NonNegativeNumber);
    simulate->add_option("--futures", config.simulate_futures, "Futures series")->delimiter(',');
    simulate->add_option("--yields", config.yields, "Yield series")->delimiter(',');

    CLI::App* estimate = app.add_subcommand("estimate", "Maximum likelihood fit of one model");
    common(estimate);
    inputs_group(estimate);
    model_option(estimate);
    estimate->add_option("--mode", mode_name, "futures or joint")->check(CLI::IsMember({"futures", "joint"}));
    estimate->add_option("--seed", seed, "Seed of the start perturbations");
    estimate->add_option("--futures", config.estimation_futures, "Estimation futures series")->delimiter(',');
    estimate->add_option("--yields", config.yields, "Yield series used in joint mode")->delimiter(',');
    estimate->add_option("--starts", config.n_starts, "Number of optimizer starts")->check(CLI::PositiveNumber);
    estimate->add_option("--evals-per-start", config.evals_per_start, "Objective evaluations per start");
    estimate->add_option("--restarts", config.max_restarts, "Simplex restarts from the incumbent");
    estimate->add_option("--evals-per-restart", config.evals_per_restart, "Objective evaluations per restart");
    estimate->add_option("--polish-iter", config.polish_iter, "Quasi-Newton polish iterations (0 disables)");
    estimate->add_flag("!--no-standard-errors", config.standard_errors, "Skip the Hessian");

    CLI::App* filter = app.add_subcommand("filter", "Filter a panel at fixed parameters");
    common(filter);
    inputs_group(filter);
    filter->add_option("--params", params_json, "Estimation or parameter JSON")->check(CLI::ExistingFile);

    CLI::App* evaluate = app.add_subcommand("evaluate", "Out-of-sample pricing of held-out maturities");
    common(evaluate);
    inputs_group(evaluate);
    evaluate->add_option("--params", params_json, "Estimation JSON")->check(CLI::ExistingFile);
    evaluate->add_option("--holdout", config.holdout, "Held-out futures series")->delimiter(',');
    evaluate->add_option("--burn-in", config.burn_in, "Dates excluded from the error metrics")
        ->check(CLI::NonNegativeNumber);
    evaluate->add_flag("--abs-mape", config.abs_mape, "Use |y| in the MAPE denominator");

    CLI::App* report = app.add_subcommand("report", "Aggregate estimation and evaluation results into tables");
    common(report);
    report->add_option("--inputs", inputs, "estimate.json and evaluation.json files")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err) == 0 ? kExitOk : kExitUsageError;
        const auto parsed = app.get_subcommands();
        const CLI::App* scope = parsed.empty() ? &app : parsed.back();
        err << "error: " << e.what() << "\n\n" << scope->help();
        return kExitUsageError;
    }

    std::string command;
    for (const CLI::App* sub : app.get_subcommands()) command = sub->get_name();
    try {
        config.command = command;
        config.model = model_id_from_string(model_name);
        config.mode = fit_mode_from_string(mode_name);
        config.panel_csv = panel_csv;
        config.futures_csv = futures_csv;
        config.yields_csv = yields_csv;
        config.params_json = params_json;
        config.output_dir = output_dir;
        config.inputs.assign(inputs.begin(), inputs.end());
        const CLI::App* sub = app.get_subcommand(command);
        if (sub->get_option_no_throw("--seed") && sub->count("--seed") > 0) config.seed = seed;

        if (command == "simulate") run_simulate(config, out);
        else if (command == "estimate") run_estimate(config, out);
        else if (command == "filter") run_filter_command(config, out);
        else if (command == "evaluate") run_evaluate(config, out);
        else run_report(config, out);
    } catch (const UsageError& e) {
        err << "error: " << command << ": " << e.what() << "\n\n" << app.get_subcommand(command)->help();
        return kExitUsageError;
    } catch (const Error& e) {
        err << "error: " << command << ": " << e.what() << '\n';
        return kExitDomainError;
    } catch (const std::exception& e) {
        err << "error: " << command << ": " << e.what() << '\n';
        return kExitDomainError;
    }
    return kExitOk;
}

}  // namespace ctsm::cli
