#include "bvm/report.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace bvm {

OutputFormat output_format_from_string(const std::string& s) {
    if (s == "json") return OutputFormat::json;
    if (s == "csv") return OutputFormat::csv;
    if (s == "both") return OutputFormat::both;
    throw InvalidArgument("format must be json, csv, or both");
}

namespace {

bool wants_json(OutputFormat f) { return f != OutputFormat::csv; }
bool wants_csv(OutputFormat f) { return f != OutputFormat::json; }

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

void write_standardized_csv(const std::filesystem::path& path, std::span<const double> values) {
    std::ofstream out(path);
    out << "index,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << format_double(values[i]) << '\n';
}

void write_qq_csv(const std::filesystem::path& path, std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::ofstream out(path);
    out << "theoretical,empirical\n";
    const double n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double q = (static_cast<double>(i) + 0.5) / n;
        out << format_double(std_normal_quantile(q)) << ',' << format_double(sorted[i]) << '\n';
    }
}

void write_hist_csv(const std::filesystem::path& path, std::span<const double> values) {
    // 40 bins over [-4, 4]; outliers folded into the end bins
    constexpr int kBins = 40;
    constexpr double kLo = -4.0, kHi = 4.0;
    std::vector<long long> counts(kBins, 0);
    for (double v : values) {
        int b = static_cast<int>(std::floor((v - kLo) / (kHi - kLo) * kBins));
        b = std::clamp(b, 0, kBins - 1);
        ++counts[b];
    }
    std::ofstream out(path);
    out << "bin_low,bin_high,count\n";
    for (int b = 0; b < kBins; ++b) {
        const double lo = kLo + (kHi - kLo) * b / kBins;
        const double hi = kLo + (kHi - kLo) * (b + 1) / kBins;
        out << format_double(lo) << ',' << format_double(hi) << ',' << counts[b] << '\n';
    }
}

nlohmann::json bvm_report_json(const BvMReport& report) {
    nlohmann::json mgf = nlohmann::json::array();
    for (const auto& pt : report.mgf_grid)
        mgf.push_back({{"t", pt.t}, {"empirical", pt.empirical}, {"target", pt.target}});
    nlohmann::json j{{"ks", report.ks},
                     {"empirical_mean", report.empirical_mean},
                     {"empirical_sd", report.empirical_sd},
                     {"credible_interval", {report.ci_lo, report.ci_hi}},
                     {"covered", report.covered},
                     {"ess", report.ess},
                     {"n_samples", report.standardized.size()},
                     {"mgf_grid", std::move(mgf)}};
    if (report.acceptance_rate >= 0.0) j["acceptance_rate"] = report.acceptance_rate;
    return j;
}

}  // namespace

void write_bvm_report(const std::filesystem::path& dir, const BvMReport& report, OutputFormat format) {
    std::filesystem::create_directories(dir);
    if (wants_json(format)) write_json_file(dir / "report.json", bvm_report_json(report));
    if (wants_csv(format)) {
        write_standardized_csv(dir / "standardized.csv", report.standardized);
        write_qq_csv(dir / "qq.csv", report.standardized);
        write_hist_csv(dir / "hist.csv", report.standardized);
    }
}

void write_coverage_report(const std::filesystem::path& dir, const CoverageResult& result, double alpha,
                           OutputFormat format) {
    std::filesystem::create_directories(dir);
    if (wants_json(format)) {
        write_json_file(dir / "report.json", nlohmann::json{{"coverage", result.coverage},
                                                            {"replications", result.replications},
                                                            {"alpha", alpha}});
    }
    if (wants_csv(format)) {
        std::ofstream out(dir / "replications.csv");
        out << "replication,lo,hi,truth,covered\n";
        for (const auto& row : result.rows)
            out << row.replication << ',' << format_double(row.lo) << ',' << format_double(row.hi) << ','
                << format_double(row.truth_value) << ',' << (row.covered ? 1 : 0) << '\n';
    }
}

void write_freq_report(const std::filesystem::path& dir, const FreqResult& result, int replications,
                       OutputFormat format) {
    std::filesystem::create_directories(dir);
    if (wants_json(format))
        write_json_file(dir / "report.json",
                        nlohmann::json{{"ks", result.ks}, {"replications", replications}});
    if (wants_csv(format)) {
        write_standardized_csv(dir / "standardized.csv", result.standardized);
        write_qq_csv(dir / "qq.csv", result.standardized);
        write_hist_csv(dir / "hist.csv", result.standardized);
    }
}

void write_kato_report(const std::filesystem::path& dir, const BiasProbeResult& result, int n, int p,
                       OutputFormat format) {
    std::filesystem::create_directories(dir);
    if (wants_json(format)) {
        write_json_file(dir / "report.json",
                        nlohmann::json{{"mean_sqrt_n_second_order", result.mean_sqrt_n_second_order},
                                       {"lower_bound", result.lower_bound},
                                       {"replications", result.per_rep.size()},
                                       {"n", n},
                                       {"p", p}});
    }
    if (wants_csv(format)) {
        std::ofstream out(dir / "replications.csv");
        out << "replication,statistic\n";
        for (std::size_t i = 0; i < result.per_rep.size(); ++i)
            out << i << ',' << format_double(result.per_rep[i]) << '\n';
    }
}

void write_expand_report(const std::filesystem::path& dir, const ExpansionSweepResult& result,
                         OutputFormat format) {
    std::filesystem::create_directories(dir);
    if (wants_json(format) || wants_csv(format)) {
        write_json_file(dir / "report.json",
                        nlohmann::json{{"cases", result.cases},
                                       {"max_rel_error", result.max_rel_error},
                                       {"max_quadrature_gap", result.max_quadrature_gap},
                                       {"identity_holds", result.max_rel_error <= 1e-8},
                                       {"quadrature_agrees", result.max_quadrature_gap <= 1e-10}});
    }
}

void write_regime_report(const std::filesystem::path& dir, const RegimeRow& row, int p, int n,
                         OutputFormat format) {
    std::filesystem::create_directories(dir);
    if (wants_json(format) || wants_csv(format)) {
        write_json_file(dir / "report.json", nlohmann::json{{"functional", row.functional},
                                                            {"required", row.required},
                                                            {"satisfied", row.satisfied},
                                                            {"p", p},
                                                            {"n", n}});
    }
}

std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot hash missing file: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const std::filesystem::path& config_path, std::uint64_t seed, double wall_time_ms) {
    std::filesystem::create_directories(dir);
    write_json_file(dir / "manifest.json", nlohmann::json{{"command", command},
                                                          {"config_hash", file_hash_hex(config_path)},
                                                          {"seed", seed},
                                                          {"version", kVersion},
                                                          {"wall_time_ms", wall_time_ms}});
}

}  // namespace bvm
