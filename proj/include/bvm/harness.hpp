#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bvm/discriminant.hpp"
#include "bvm/functionals.hpp"
#include "bvm/model.hpp"
#include "bvm/rng.hpp"
#include "bvm/samplers.hpp"

namespace bvm {

// Phi(t) = erfc(-t/sqrt(2))/2; absolute error well below 1e-7.
double std_normal_cdf(double t);
// Inverse of the above (rational approximation plus one Halley refinement).
double std_normal_quantile(double q);

// sup over the sorted sample of max(|i/N - F(x_i)|, |(i-1)/N - F(x_i)|).
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);
double ks_vs_std_normal(std::span<const double> samples);

// Initial-positive-sequence autocorrelation estimator; clamped to [1, N].
double effective_sample_size(std::span<const double> values);

// Type-7 (linear interpolation) empirical quantile of the sorted copy.
double empirical_quantile(std::span<const double> values, double q);

struct MgfPoint {
    double t;
    double empirical;  // mean of exp(t s)
    double target;     // exp(t^2 / 2)
};
// Requires |t| <= 2 on the grid.
std::vector<MgfPoint> mgf_diagnostic(std::span<const double> standardized, std::span<const double> t_grid);

// One experiment description; `truth` and `functional`/`da_mode` select
// between the plain matrix-functional mode and discriminant analysis.
struct ExperimentConfig {
    std::variant<std::monostate, TruthSpec, DaTruth> truth;
    std::optional<FunctionalSpec> functional;  // plain mode
    std::optional<DaMode> da_mode;             // DA mode
    PriorSpec prior = WishartPrior{1};
    int n = 100;
    int n_draws = 10000;
    int replications = 1000;
    double alpha = 0.1;
    RngStream seed;
    McmcConfig mcmc;
    int threads = 0;                // 0 = all hardware threads; 1 = serial reference
    bool plug_in_variance = false;  // standardize with the variance at Sigma_hat instead of Sigma*
    std::optional<DaDataset> da_data;  // DA mode: use this training data instead of simulating

    const TruthSpec& plain_truth() const;
    const DaTruth& da_truth() const;
    bool is_da() const { return std::holds_alternative<DaTruth>(truth); }
    int dim() const;
};

struct BvMReport {
    double ks = 0.0;
    double empirical_mean = 0.0;
    double empirical_sd = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool covered = false;
    std::vector<MgfPoint> mgf_grid;
    double ess = 0.0;
    double acceptance_rate = -1.0;  // < 0 when not MCMC
    std::vector<double> standardized;
};

// Draws one dataset from the truth, samples the posterior, evaluates the
// functional on each draw, standardizes with the plug-in centering and the
// truth variance, and fills the report.  The credible interval is the
// empirical (alpha/2, 1-alpha/2) quantile pair of the unstandardized values.
BvMReport run_posterior_bvm(const ExperimentConfig& config);

struct CoverageRow {
    int replication;
    double lo, hi, truth_value;
    bool covered;
};
struct CoverageResult {
    double coverage;
    int replications;
    std::vector<CoverageRow> rows;
};
CoverageResult coverage_study(const ExperimentConfig& config);

struct FreqResult {
    double ks;
    std::vector<double> standardized;
};
// Sampling-law check: fresh data per replication, standardized plug-in
// statistic vs N(0,1).
FreqResult frequentist_check(const ExperimentConfig& config);

struct RegimeRow {
    std::string functional;
    std::string required;  // e.g. "p^2 << n"
    bool satisfied;        // "a << b" operationalized as 10 a <= b
};
RegimeRow regime_table(const FunctionalSpec& f, const PriorSpec& prior, int p, int n);
RegimeRow regime_table(DaMode mode, const PriorSpec& prior, int p, int n);

// True value of the configured functional (used for coverage checks).
double truth_value(const ExperimentConfig& config);

}  // namespace bvm
