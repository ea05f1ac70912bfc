// Command-line front end: config ingestion, seed control, experiment dispatch,
// and bit-stable artifact emission.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bvm/config.hpp"
#include "bvm/report.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::string format = "both";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "Path to the JSON experiment config")->required();
    cmd->add_option("--seed", opt.seed, "Override the config seed");
    cmd->add_option("--out", opt.out_dir, "Output directory");
    cmd->add_option("--format", opt.format, "Output format: json|csv|both")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    cmd->add_option("--threads", opt.threads, "Worker-thread cap (0 = all cores, 1 = serial)");
}

int run_command(const std::string& command, const CliOptions& opt) {
    const auto start = std::chrono::steady_clock::now();
    bvm::ParsedConfig parsed = bvm::parse_config(opt.config_path);
    if (opt.seed) {
        parsed.seed = *opt.seed;
        parsed.experiment.seed = bvm::RngStream(*opt.seed, 0);
    }
    if (opt.threads) parsed.experiment.threads = *opt.threads;
    const auto format = bvm::output_format_from_string(opt.format);
    const std::filesystem::path out_dir = opt.out_dir;
    bvm::ExperimentConfig& exp = parsed.experiment;

    if (command == "posterior") {
        if (!parsed.has_functional) throw bvm::ConfigParse("functional", "required by 'posterior'");
        const auto report = bvm::run_posterior_bvm(exp);
        bvm::write_bvm_report(out_dir, report, format);
        std::printf("ks=%.6f mean=%.4f sd=%.4f ess=%.0f covered=%d\n", report.ks, report.empirical_mean,
                    report.empirical_sd, report.ess, report.covered ? 1 : 0);
    } else if (command == "coverage") {
        if (!parsed.has_functional && !parsed.has_da)
            throw bvm::ConfigParse("functional", "required by 'coverage'");
        const auto result = bvm::coverage_study(exp);
        bvm::write_coverage_report(out_dir, result, exp.alpha, format);
        std::printf("coverage=%.4f replications=%d\n", result.coverage, result.replications);
    } else if (command == "freq") {
        if (!parsed.has_functional && !parsed.has_da)
            throw bvm::ConfigParse("functional", "required by 'freq'");
        const auto result = bvm::frequentist_check(exp);
        bvm::write_freq_report(out_dir, result, exp.replications, format);
        std::printf("ks=%.6f replications=%d\n", result.ks, exp.replications);
    } else if (command == "da") {
        if (!parsed.has_da) throw bvm::ConfigParse("da", "required by 'da'");
        const auto report = bvm::run_posterior_bvm(exp);
        bvm::write_bvm_report(out_dir, report, format);
        std::printf("ks=%.6f mean=%.4f sd=%.4f ess=%.0f acceptance=%.3f\n", report.ks,
                    report.empirical_mean, report.empirical_sd, report.ess, report.acceptance_rate);
    } else if (command == "kato") {
        const auto& truth = exp.plain_truth();
        const auto result = bvm::second_order_bias_probe(truth.sigma_star, exp.n, parsed.kato_reps,
                                                         exp.seed, exp.threads);
        bvm::write_kato_report(out_dir, result, exp.n, truth.dim(), format);
        std::printf("mean_sqrt_n_second_order=%.6f lower_bound=%.6f\n", result.mean_sqrt_n_second_order,
                    result.lower_bound);
    } else if (command == "expand-check") {
        const auto result = bvm::expansion_sweep(parsed.expand_dims, parsed.expand_ns, parsed.expand_ts,
                                                 parsed.expand_cases, exp.seed);
        bvm::write_expand_report(out_dir, result, format);
        std::printf("cases=%d max_rel_error=%.3e max_quadrature_gap=%.3e\n", result.cases,
                    result.max_rel_error, result.max_quadrature_gap);
    } else if (command == "regimes") {
        if (!parsed.has_functional && !parsed.has_da)
            throw bvm::ConfigParse("functional", "required by 'regimes'");
        const int p = parsed.has_da ? exp.da_truth().dim() : exp.plain_truth().dim();
        const auto row = parsed.has_da ? bvm::regime_table(*exp.da_mode, exp.prior, p, exp.n)
                                       : bvm::regime_table(*exp.functional, exp.prior, p, exp.n);
        bvm::write_regime_report(out_dir, row, p, exp.n, format);
        std::printf("functional=%s required=\"%s\" satisfied=%d\n", row.functional.c_str(),
                    row.required.c_str(), row.satisfied ? 1 : 0);
    } else {
        throw bvm::InvalidArgument("unknown command: " + command);
    }

    const auto end = std::chrono::steady_clock::now();
    const double wall_ms = std::chrono::duration<double, std::milli>(end - start).count();
    bvm::write_manifest(out_dir, command, opt.config_path, parsed.seed, wall_ms);
    return 0;
}

// Machine-readable error record on stderr.
int emit_error(const std::string& command, const std::string& type, const std::string& message,
               const std::string& field = "") {
    nlohmann::json record{{"error", type}, {"message", message}, {"command", command}};
    if (!field.empty()) record["field"] = field;
    std::cerr << record.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Posterior and plug-in normality diagnostics for covariance-matrix functionals"};
    app.require_subcommand(1);

    const std::vector<std::string> commands = {"posterior", "coverage", "freq",   "da",
                                               "kato",      "expand-check", "regimes"};
    const std::vector<std::string> descriptions = {
        "Posterior normality check for one functional",
        "Credible-interval coverage over replications",
        "Frequentist plug-in normality check",
        "Discriminant-analysis posterior check",
        "Second-order eigenvalue bias probe",
        "Likelihood-expansion identity sweep",
        "Dimension-regime advisory for (p, n)"};

    std::vector<CliOptions> opts(commands.size());
    for (std::size_t i = 0; i < commands.size(); ++i)
        add_common(app.add_subcommand(commands[i], descriptions[i]), opts[i]);

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < commands.size(); ++i) {
        if (!app.get_subcommand(commands[i])->parsed()) continue;
        const auto& command = commands[i];
        try {
            return run_command(command, opts[i]);
        } catch (const bvm::ConfigParse& e) {
            return emit_error(command, "ConfigParse", e.what(), e.field);
        } catch (const bvm::Error& e) {
            return emit_error(command, "Error", e.what());
        } catch (const std::exception& e) {
            return emit_error(command, "Unexpected", e.what());
        }
    }
    return emit_error("", "Usage", "no subcommand given");
}
