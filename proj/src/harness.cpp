#include "bvm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bvm/replicate.hpp"

namespace bvm {

double std_normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

namespace {

// Acklam's rational approximation for the probit function.
double probit_initial(double q) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double q_low = 0.02425;
    if (q < q_low) {
        const double r = std::sqrt(-2.0 * std::log(q));
        return (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
               ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    }
    if (q > 1.0 - q_low) {
        const double r = std::sqrt(-2.0 * std::log(1.0 - q));
        return -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
               ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    }
    const double r = q - 0.5;
    const double s = r * r;
    return (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * r /
           (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
}

}  // namespace

double std_normal_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("std_normal_quantile: q must lie in (0,1)");
    double x = probit_initial(q);
    // one Halley step against the high-accuracy CDF
    const double e = std_normal_cdf(x) - q;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw EmptySamples("ks_statistic: empty sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        ks = std::max(ks, std::fabs((i + 1) / n - f));
        ks = std::max(ks, std::fabs(i / n - f));
    }
    return ks;
}

double ks_vs_std_normal(std::span<const double> samples) {
    return ks_statistic(samples, [](double t) { return std_normal_cdf(t); });
}

double effective_sample_size(std::span<const double> values) {
    const int n = static_cast<int>(values.size());
    if (n < 2) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    std::vector<double> centered(n);
    for (int i = 0; i < n; ++i) centered[i] = values[i] - mean;
    auto gamma = [&](int lag) {
        double s = 0.0;
        for (int i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
        return s / n;
    };
    const double g0 = gamma(0);
    if (!(g0 > 0.0)) return static_cast<double>(n);
    // Geyer initial positive sequence: sum Gamma_m = rho_{2m} + rho_{2m+1}
    // while positive.
    double tau = 0.0;
    for (int m = 0; 2 * m + 1 < n; ++m) {
        const double pair = (gamma(2 * m) + gamma(2 * m + 1)) / g0;
        if (pair <= 0.0) break;
        tau += pair;
    }
    const double iact = std::max(1.0, 2.0 * tau - 1.0);
    return std::clamp(static_cast<double>(n) / iact, 1.0, static_cast<double>(n));
}

double empirical_quantile(std::span<const double> values, double q) {
    if (values.empty()) throw EmptySamples("empirical_quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("empirical_quantile: q must lie in [0,1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = q * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double w = h - lo;
    return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

std::vector<MgfPoint> mgf_diagnostic(std::span<const double> standardized,
                                     std::span<const double> t_grid) {
    if (standardized.empty()) throw EmptySamples("mgf_diagnostic: empty sample");
    for (double t : t_grid)
        if (std::fabs(t) > 2.0) throw InvalidArgument("mgf_diagnostic: grid requires |t| <= 2");
    std::vector<MgfPoint> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        double acc = 0.0;
        for (double s : standardized) acc += std::exp(t * s);
        out.push_back({t, acc / standardized.size(), std::exp(0.5 * t * t)});
    }
    return out;
}

const TruthSpec& ExperimentConfig::plain_truth() const {
    if (!std::holds_alternative<TruthSpec>(truth))
        throw InvalidArgument("experiment: plain truth is not set");
    return std::get<TruthSpec>(truth);
}

const DaTruth& ExperimentConfig::da_truth() const {
    if (!std::holds_alternative<DaTruth>(truth))
        throw InvalidArgument("experiment: DA truth is not set");
    return std::get<DaTruth>(truth);
}

int ExperimentConfig::dim() const {
    return is_da() ? da_truth().dim() : plain_truth().dim();
}

double truth_value(const ExperimentConfig& config) {
    if (config.is_da()) {
        const DaTruth& t = config.da_truth();
        const SpdMatrix omega_x = spd_inverse(t.sigma_x);
        if (*config.da_mode == DaMode::lda) return lda_discriminant(t.mu_x, t.mu_y, omega_x, t.z);
        return qda_discriminant(t.mu_x, t.mu_y, omega_x, spd_inverse(t.sigma_y), t.z);
    }
    return evaluate(*config.functional, config.plain_truth().sigma_star);
}

namespace {

std::vector<double> default_mgf_grid() { return {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0}; }

struct FunctionalSamples {
    std::vector<double> values;  // functional evaluated on each posterior draw
    double center = 0.0;
    double variance = 0.0;
    double acceptance_rate = -1.0;
    bool mcmc = false;
};

FunctionalSamples sample_posterior_functional(const ExperimentConfig& config, RngStream& rng) {
    FunctionalSamples out;
    if (config.is_da()) {
        const DaTruth& t = config.da_truth();
        const DaMode mode = *config.da_mode;
        const DaDataset data = [&] {
            if (config.da_data.has_value()) return *config.da_data;
            Dataset x = draw_mvn(t.mu_x, SpdMatrix(t.sigma_x), config.n, rng);
            Dataset y = draw_mvn(t.mu_y, SpdMatrix(t.sigma_y), config.n, rng);
            return DaDataset(std::move(x), std::move(y));
        }();

        const auto* gauss = std::get_if<ConstrainedGaussianPrior>(&config.prior);
        if (gauss == nullptr)
            throw InvalidArgument("experiment: DA mode requires the constrained Gaussian prior");
        const DaDraws draws = da_posterior_draws(data, gauss->lambda_cap, mode, config.mcmc, rng);
        out.values.reserve(draws.draws.size());
        for (const auto& d : draws.draws) {
            const double v = mode == DaMode::lda
                                 ? lda_discriminant(d.mu_x, d.mu_y, d.omega_x, t.z)
                                 : qda_discriminant(d.mu_x, d.mu_y, d.omega_x, d.omega_y, t.z);
            out.values.push_back(v);
        }
        out.center = da_center(data, mode, t.z);
        if (config.plug_in_variance) {
            // variance at the plug-in estimates instead of the truth
            const auto xbar_cov = sample_covariance(data.x, true);
            const auto ybar_cov = sample_covariance(data.y, true);
            std::vector<double> xbar(t.dim(), 0.0), ybar(t.dim(), 0.0);
            for (int i = 0; i < data.x.n; ++i)
                for (int j = 0; j < data.x.p; ++j) {
                    xbar[j] += data.x(i, j) / data.x.n;
                    ybar[j] += data.y(i, j) / data.y.n;
                }
            if (mode == DaMode::lda) {
                const SpdMatrix pooled(xbar_cov.plus(ybar_cov).scaled(0.5));
                const DaTruth plug(xbar, ybar, pooled, pooled, t.z);
                out.variance = lda_variance(plug).v2;
            } else {
                const DaTruth plug(xbar, ybar, SpdMatrix(xbar_cov), SpdMatrix(ybar_cov), t.z);
                out.variance = qda_variance(plug).v2;
            }
        } else {
            out.variance = mode == DaMode::lda ? lda_variance(t).v2 : qda_variance(t).v2;
        }
        out.acceptance_rate = draws.meta.acceptance_rate.value_or(-1.0);
        out.mcmc = true;
        return out;
    }

    const TruthSpec& truth = config.plain_truth();
    const FunctionalSpec& f = *config.functional;
    const Dataset data = draw_mvn(truth.sigma_star, config.n, rng);

    PosteriorDraws draws;
    if (const auto* w = std::get_if<WishartPrior>(&config.prior)) {
        draws = conjugate_posterior_draws(data, w->b, config.n_draws, rng);
    } else {
        const auto& g = std::get<ConstrainedGaussianPrior>(config.prior);
        draws = gaussian_prior_posterior_draws(data, g.lambda_cap, config.mcmc, rng);
        out.mcmc = true;
        out.acceptance_rate = draws.meta.acceptance_rate.value_or(-1.0);
    }

    out.values.reserve(draws.draws.size());
    for (const auto& omega : draws.draws) out.values.push_back(evaluate(f, spd_inverse(omega)));
    out.center = plug_in_center(f, data);
    if (config.plug_in_variance) {
        const SymMatrix sigma_hat = sample_covariance(data, false);
        out.variance = asymptotic_variance(f, TruthSpec(SpdMatrix(sigma_hat)));
    } else {
        out.variance = asymptotic_variance(f, truth);
    }
    return out;
}

}  // namespace

BvMReport run_posterior_bvm(const ExperimentConfig& config) {
    RngStream rng = config.seed;
    const FunctionalSamples samples = sample_posterior_functional(config, rng);
    if (samples.values.empty()) throw EmptySamples("run_posterior_bvm: no posterior draws");

    BvMReport report;
    report.standardized = standardize(samples.values, samples.center, samples.variance, config.n);
    report.ks = ks_vs_std_normal(report.standardized);

    double mean = 0.0;
    for (double v : report.standardized) mean += v;
    mean /= report.standardized.size();
    double var = 0.0;
    for (double v : report.standardized) var += (v - mean) * (v - mean);
    var /= report.standardized.size();
    report.empirical_mean = mean;
    report.empirical_sd = std::sqrt(var);

    report.ci_lo = empirical_quantile(samples.values, config.alpha / 2.0);
    report.ci_hi = empirical_quantile(samples.values, 1.0 - config.alpha / 2.0);
    const double tv = truth_value(config);
    report.covered = tv >= report.ci_lo && tv <= report.ci_hi;

    const auto grid = default_mgf_grid();
    report.mgf_grid = mgf_diagnostic(report.standardized, grid);
    report.ess = std::min(effective_sample_size(report.standardized),
                          static_cast<double>(report.standardized.size()));
    report.acceptance_rate = samples.acceptance_rate;
    return report;
}

CoverageResult coverage_study(const ExperimentConfig& config) {
    const double tv = truth_value(config);
    const auto rows = run_replications<CoverageRow>(
        config.replications, config.seed, config.threads, [&](int r, RngStream stream) {
            const FunctionalSamples samples = sample_posterior_functional(config, stream);
            CoverageRow row;
            row.replication = r;
            row.lo = empirical_quantile(samples.values, config.alpha / 2.0);
            row.hi = empirical_quantile(samples.values, 1.0 - config.alpha / 2.0);
            row.truth_value = tv;
            row.covered = tv >= row.lo && tv <= row.hi;
            return row;
        });

    CoverageResult out;
    out.replications = config.replications;
    out.rows = rows;
    int covered = 0;
    for (const auto& r : rows) covered += r.covered ? 1 : 0;
    out.coverage = static_cast<double>(covered) / config.replications;
    return out;
}

FreqResult frequentist_check(const ExperimentConfig& config) {
    const double tv = truth_value(config);
    double variance = 0.0;
    if (config.is_da()) {
        variance = *config.da_mode == DaMode::lda ? lda_variance(config.da_truth()).v2
                                                  : qda_variance(config.da_truth()).v2;
    } else {
        variance = asymptotic_variance(*config.functional, config.plain_truth());
    }

    const auto stats = run_replications<double>(
        config.replications, config.seed, config.threads, [&](int, RngStream stream) {
            if (config.is_da()) {
                const DaTruth& t = config.da_truth();
                const Dataset x = draw_mvn(t.mu_x, SpdMatrix(t.sigma_x), config.n, stream);
                const Dataset y = draw_mvn(t.mu_y, SpdMatrix(t.sigma_y), config.n, stream);
                return da_center(DaDataset(x, y), *config.da_mode, t.z);
            }
            const Dataset data = draw_mvn(config.plain_truth().sigma_star, config.n, stream);
            return plug_in_center(*config.functional, data);
        });

    FreqResult out;
    out.standardized = standardize(stats, tv, variance, config.n);
    out.ks = ks_vs_std_normal(out.standardized);
    return out;
}

namespace {

RegimeRow make_regime_row(const std::string& name, int exponent, int p, int n) {
    RegimeRow row;
    row.functional = name;
    row.required = exponent == 1 ? "p << n" : "p^" + std::to_string(exponent) + " << n";
    double pk = 1.0;
    for (int i = 0; i < exponent; ++i) pk *= p;
    row.satisfied = 10.0 * pk <= static_cast<double>(n);
    return row;
}

}  // namespace

RegimeRow regime_table(const FunctionalSpec& f, const PriorSpec& prior, int p, int n) {
    const bool conjugate = std::holds_alternative<WishartPrior>(prior);
    const bool precision = target_of(f) == Target::precision;
    const std::string kind = functional_kind(f);
    int exponent = 0;
    if (kind == "entry" || kind == "quadratic" || kind == "bilinear") {
        if (precision)
            exponent = conjugate ? 2 : 3;
        else
            exponent = conjugate ? 1 : 2;
    } else if (kind == "logdet" || kind == "entropy") {
        exponent = 3;
    } else {  // eigenvalue
        exponent = conjugate ? 2 : 4;
    }
    return make_regime_row(kind + (precision ? " (precision)" : " (covariance)"), exponent, p, n);
}

RegimeRow regime_table(DaMode mode, const PriorSpec& prior, int p, int n) {
    const bool conjugate = std::holds_alternative<WishartPrior>(prior);
    if (mode == DaMode::lda) return make_regime_row("lda", conjugate ? 2 : 4, p, n);
    return make_regime_row("qda", conjugate ? 3 : 4, p, n);
}

}  // namespace bvm
