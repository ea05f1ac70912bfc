#pragma once

#include <filesystem>
#include <string>

#include "bvm/harness.hpp"
#include "bvm/kato.hpp"
#include "bvm/model.hpp"

namespace bvm {

enum class OutputFormat { json, csv, both };

OutputFormat output_format_from_string(const std::string& s);

// CSV column orders are fixed:
//   standardized.csv: index,value
//   qq.csv:           theoretical,empirical
//   hist.csv:         bin_low,bin_high,count
//   replications.csv: replication,lo,hi,truth,covered   (coverage)
//                     replication,statistic             (freq, kato)
void write_bvm_report(const std::filesystem::path& dir, const BvMReport& report, OutputFormat format);
void write_coverage_report(const std::filesystem::path& dir, const CoverageResult& result, double alpha,
                           OutputFormat format);
void write_freq_report(const std::filesystem::path& dir, const FreqResult& result, int replications,
                       OutputFormat format);
void write_kato_report(const std::filesystem::path& dir, const BiasProbeResult& result, int n, int p,
                       OutputFormat format);
void write_expand_report(const std::filesystem::path& dir, const ExpansionSweepResult& result,
                         OutputFormat format);
void write_regime_report(const std::filesystem::path& dir, const RegimeRow& row, int p, int n,
                         OutputFormat format);

// manifest.json: {command, config_hash, seed, version, wall_time_ms}.
// Wall time lives only here so every other payload is byte-stable.
void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const std::filesystem::path& config_path, std::uint64_t seed, double wall_time_ms);

// FNV-1a over the raw config bytes, hex-encoded.
std::string file_hash_hex(const std::filesystem::path& path);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bvm
