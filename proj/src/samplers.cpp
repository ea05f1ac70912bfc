#include "bvm/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace bvm {

Dataset draw_mvn(const SpdMatrix& cov, int n, RngStream& rng) {
    return draw_mvn(std::vector<double>(cov.dim(), 0.0), cov, n, rng);
}

Dataset draw_mvn(std::span<const double> mean, const SpdMatrix& cov, int n, RngStream& rng) {
    if (n < 1) throw InvalidArgument("draw_mvn: n must be >= 1");
    const int p = cov.dim();
    if (static_cast<int>(mean.size()) != p) throw DimensionMismatch("draw_mvn: mean length != dim");
    const auto l = cholesky(cov);
    std::vector<double> rows(static_cast<std::size_t>(n) * p);
    std::vector<double> z(p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) z[j] = rng.normal();
        for (int j = 0; j < p; ++j) {
            double s = mean[j];
            for (int k = 0; k <= j; ++k) s += l[static_cast<std::size_t>(j) * p + k] * z[k];
            rows[static_cast<std::size_t>(i) * p + j] = s;
        }
    }
    return Dataset(n, p, std::move(rows));
}

SpdMatrix draw_wishart(const SpdMatrix& scale, int df, RngStream& rng) {
    const int p = scale.dim();
    if (df < p) throw DegreesOfFreedomTooSmall("draw_wishart: df < dim");
    const auto l = cholesky(scale);
    std::vector<double> acc(static_cast<std::size_t>(p) * p, 0.0);
    std::vector<double> z(p), x(p);
    for (int rep = 0; rep < df; ++rep) {
        for (int j = 0; j < p; ++j) z[j] = rng.normal();
        for (int j = 0; j < p; ++j) {
            double s = 0.0;
            for (int k = 0; k <= j; ++k) s += l[static_cast<std::size_t>(j) * p + k] * z[k];
            x[j] = s;
        }
        for (int i = 0; i < p; ++i)
            for (int j = i; j < p; ++j) acc[static_cast<std::size_t>(i) * p + j] += x[i] * x[j];
    }
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) acc[static_cast<std::size_t>(j) * p + i] = acc[static_cast<std::size_t>(i) * p + j];
    return SpdMatrix(SymMatrix(p, std::move(acc)));
}

PosteriorDraws conjugate_posterior_draws(const SymMatrix& n_sigma_hat, int n, int b, int n_draws,
                                         RngStream& rng) {
    if (b < 1) throw InvalidArgument("conjugate_posterior_draws: b must be >= 1");
    if (n < 0) throw InvalidArgument("conjugate_posterior_draws: n must be >= 0");
    const int p = n_sigma_hat.dim();
    const SpdMatrix scale = spd_inverse(SpdMatrix(n_sigma_hat.plus(SymMatrix::identity(p))));
    const int df = n + p + b - 1;

    PosteriorDraws out;
    out.meta.method = "conjugate";
    out.meta.burn_in = 0;
    out.meta.thinning = 1;
    out.meta.seed = rng.seed();
    out.meta.stream_id = rng.stream_id();
    out.draws.reserve(n_draws);
    for (int d = 0; d < n_draws; ++d) out.draws.push_back(draw_wishart(scale, df, rng));
    return out;
}

PosteriorDraws conjugate_posterior_draws(const Dataset& data, int b, int n_draws, RngStream& rng) {
    const SymMatrix sigma_hat = sample_covariance(data, /*centered=*/false);
    return conjugate_posterior_draws(sigma_hat.scaled(static_cast<double>(data.n)), data.n, b, n_draws, rng);
}

namespace {

SymMatrix propose(const SymMatrix& state, double sd, RngStream& rng) {
    const int p = state.dim();
    std::vector<double> a = state.data();
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
            const double e = sd * rng.normal();
            a[static_cast<std::size_t>(i) * p + j] += e;
            if (i != j) a[static_cast<std::size_t>(j) * p + i] += e;
        }
    return SymMatrix(p, std::move(a));
}

struct StepOutcome {
    double alpha;  // acceptance probability of the proposed move
    bool accepted;
};

// One Metropolis step; consumes a fixed number of draws regardless of outcome.
StepOutcome metropolis_step(const std::function<double(const SymMatrix&)>& log_target, SymMatrix& state,
                            double& state_lt, double sd, RngStream& rng) {
    SymMatrix prop = propose(state, sd, rng);
    const double lt = log_target(prop);
    const double u = rng.uniform();
    if (!std::isfinite(lt)) return {0.0, false};
    const double alpha = std::min(1.0, std::exp(std::min(0.0, lt - state_lt)));
    if (std::log(std::max(u, 1e-300)) < lt - state_lt) {
        state = std::move(prop);
        state_lt = lt;
        return {alpha, true};
    }
    return {alpha, false};
}

}  // namespace

MetropolisResult metropolis_chain(const std::function<double(const SymMatrix&)>& log_target,
                                  const SpdMatrix& init, int steps, double step_scale, RngStream& rng) {
    if (steps < 1) throw InvalidArgument("metropolis_chain: steps must be >= 1");
    if (!(step_scale > 0.0)) throw InvalidArgument("metropolis_chain: step_scale must be > 0");
    SymMatrix state = init.sym();
    double state_lt = log_target(state);
    if (!std::isfinite(state_lt)) throw BadInit("metropolis_chain: log_target(init) is not finite");

    MetropolisResult out;
    out.chain.reserve(steps);
    int accepted = 0;
    for (int s = 0; s < steps; ++s) {
        if (metropolis_step(log_target, state, state_lt, step_scale, rng).accepted) ++accepted;
        out.chain.push_back(state);
    }
    out.acceptance_rate = static_cast<double>(accepted) / steps;
    return out;
}

std::function<double(const SymMatrix&)> constrained_gaussian_log_target(const SymMatrix& sigma_hat,
                                                                        int n, double lambda_cap) {
    if (!(lambda_cap > 0.0)) throw InvalidArgument("lambda_cap must be > 0");
    return [sigma_hat, n, lambda_cap](const SymMatrix& omega) -> double {
        const auto eig = eig_sym(omega);
        const double lam_max = eig.values.front();
        const double lam_min = eig.values.back();
        if (!(lam_min > 0.0)) return -std::numeric_limits<double>::infinity();
        // support: ||Omega|| < 2 Lambda (strict), ||Sigma|| = 1/lam_min <= 2 Lambda
        if (!(lam_max < 2.0 * lambda_cap)) return -std::numeric_limits<double>::infinity();
        if (1.0 / lam_min > 2.0 * lambda_cap) return -std::numeric_limits<double>::infinity();
        double logdet = 0.0;
        for (double v : eig.values) logdet += std::log(v);
        const double loglik = 0.5 * n * logdet - 0.5 * n * trace_product(omega, sigma_hat);
        const double f = omega.frobenius();
        return loglik - 0.5 * f * f;
    };
}

SpdMatrix project_into_support(const SpdMatrix& m, double lambda_cap) {
    if (!(lambda_cap > 0.0)) throw BadInit("project_into_support: lambda_cap must be > 0");
    const auto eig = eig_sym(m.sym());
    const double hi = 2.0 * lambda_cap / 1.05;
    const double lo = 1.05 / (2.0 * lambda_cap);
    if (lo >= hi) throw BadInit("project_into_support: support interval is empty");
    const int p = m.dim();
    std::vector<double> out(static_cast<std::size_t>(p) * p, 0.0);
    for (int k = 0; k < p; ++k) {
        const double lam = std::clamp(eig.values[k], lo, hi);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                out[static_cast<std::size_t>(i) * p + j] += lam * eig.vector_at(i, k) * eig.vector_at(j, k);
    }
    return SpdMatrix(SymMatrix(p, std::move(out)));
}

namespace {

struct AdaptiveChain {
    SymMatrix state;
    double state_lt;
    double log_c;
    double base_sd;  // 1/sqrt(n p)
};

// Burn-in with Robbins-Monro adaptation of log c toward 30% acceptance.
void run_burn_in(const std::function<double(const SymMatrix&)>& log_target, AdaptiveChain& ch,
                 int burn_in, bool adapt, RngStream& rng) {
    constexpr double kTargetAcceptance = 0.3;
    for (int s = 1; s <= burn_in; ++s) {
        const double sd = std::exp(ch.log_c) * ch.base_sd;
        const auto step = metropolis_step(log_target, ch.state, ch.state_lt, sd, rng);
        if (adapt) ch.log_c += std::pow(static_cast<double>(s), -0.6) * (step.alpha - kTargetAcceptance);
    }
}

}  // namespace

PosteriorDraws gaussian_prior_posterior_draws(const Dataset& data, double lambda_cap,
                                              const McmcConfig& config, RngStream& rng) {
    const int n = data.n;
    const int p = data.p;
    const SymMatrix sigma_hat = sample_covariance(data, /*centered=*/false);
    const auto log_target = constrained_gaussian_log_target(sigma_hat, n, lambda_cap);

    const SpdMatrix raw_init(sigma_hat.plus(SymMatrix::identity(p).scaled(1.0 / n)));
    const SpdMatrix init = project_into_support(spd_inverse(raw_init), lambda_cap);
    if (!std::isfinite(log_target(init.sym()))) throw BadInit("gaussian prior sampler: projection failed");

    AdaptiveChain ch{init.sym(), log_target(init.sym()), std::log(config.step_scale),
                     1.0 / std::sqrt(static_cast<double>(n) * p)};
    const int burn_in = config.effective_burn_in();
    run_burn_in(log_target, ch, burn_in, config.adapt, rng);

    const int recorded_steps = config.steps - burn_in;
    if (recorded_steps < 1) throw InvalidArgument("mcmc config: no steps remain after burn-in");
    const double sd = std::exp(ch.log_c) * ch.base_sd;

    PosteriorDraws out;
    out.meta.method = "mcmc";
    out.meta.burn_in = burn_in;
    out.meta.thinning = std::max(1, config.thinning);
    out.meta.seed = rng.seed();
    out.meta.stream_id = rng.stream_id();

    int accepted = 0;
    for (int s = 0; s < recorded_steps; ++s) {
        if (metropolis_step(log_target, ch.state, ch.state_lt, sd, rng).accepted) ++accepted;
        if (s % out.meta.thinning == 0) out.draws.emplace_back(ch.state);
    }
    out.meta.acceptance_rate = static_cast<double>(accepted) / recorded_steps;
    return out;
}

void save_posterior_draws(const PosteriorDraws& draws, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < draws.draws.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "draw_%06zu.csv", i);
        save_matrix_csv(draws.draws[i].sym(), dir / name);
    }
    nlohmann::json meta{{"method", draws.meta.method},
                        {"burn_in", draws.meta.burn_in},
                        {"thinning", draws.meta.thinning},
                        {"seed", draws.meta.seed},
                        {"stream_id", draws.meta.stream_id},
                        {"n_draws", draws.draws.size()}};
    if (draws.meta.acceptance_rate)
        meta["acceptance_rate"] = *draws.meta.acceptance_rate;
    else
        meta["acceptance_rate"] = nullptr;
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << '\n';
}

PosteriorDraws load_posterior_draws(const std::filesystem::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw Error("missing meta.json in " + dir.string());
    nlohmann::json meta = nlohmann::json::parse(in);
    PosteriorDraws out;
    out.meta.method = meta.at("method").get<std::string>();
    out.meta.burn_in = meta.at("burn_in").get<int>();
    out.meta.thinning = meta.at("thinning").get<int>();
    out.meta.seed = meta.at("seed").get<std::uint64_t>();
    out.meta.stream_id = meta.at("stream_id").get<std::uint64_t>();
    if (!meta.at("acceptance_rate").is_null())
        out.meta.acceptance_rate = meta.at("acceptance_rate").get<double>();
    const auto count = meta.at("n_draws").get<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "draw_%06zu.csv", i);
        out.draws.emplace_back(load_sym_csv(dir / name));
    }
    return out;
}

}  // namespace bvm
