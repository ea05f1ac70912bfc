#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bvm/matrix.hpp"
#include "bvm/rng.hpp"

namespace bvm {

// Ordered precision-matrix draws plus sampler metadata.
struct PosteriorDraws {
    struct Meta {
        std::string method;  // "conjugate" | "mcmc"
        std::optional<double> acceptance_rate;
        int burn_in = 0;
        int thinning = 1;
        std::uint64_t seed = 0;
        std::uint64_t stream_id = 0;
    };

    std::vector<SpdMatrix> draws;
    Meta meta;
};

// Rows are L z with L = cholesky(cov), z standard normal (zero mean).
Dataset draw_mvn(const SpdMatrix& cov, int n, RngStream& rng);
// Mean-shifted variant used by the discriminant-analysis data generator.
Dataset draw_mvn(std::span<const double> mean, const SpdMatrix& cov, int n, RngStream& rng);

// Sum-of-outer-products representation: sum_{l=1..df} Z_l Z_l^T, Z_l ~ N(0, scale).
SpdMatrix draw_wishart(const SpdMatrix& scale, int df, RngStream& rng);

// Exact conjugate posterior: each draw ~ W_p((n Sigma_hat + I)^{-1}, n+p+b-1),
// Sigma_hat uncentered.
PosteriorDraws conjugate_posterior_draws(const Dataset& data, int b, int n_draws, RngStream& rng);
// Sufficient-statistics form; n_sigma_hat = n * Sigma_hat.  Accepts n = 0
// (prior sampling, df = p+b-1, scale I).
PosteriorDraws conjugate_posterior_draws(const SymMatrix& n_sigma_hat, int n, int b, int n_draws,
                                         RngStream& rng);

struct MetropolisResult {
    std::vector<SymMatrix> chain;  // length = steps
    double acceptance_rate;
};

// Random-walk Metropolis over the p(p+1)/2 upper-triangular coordinates;
// proposals are symmetric Gaussian perturbations with sd = step_scale.
// States with log_target = -inf are always rejected.
MetropolisResult metropolis_chain(const std::function<double(const SymMatrix&)>& log_target,
                                  const SpdMatrix& init, int steps, double step_scale, RngStream& rng);

struct McmcConfig {
    int steps = 200000;
    int burn_in = -1;        // -1: default 20% of steps
    int thinning = 1;
    double step_scale = 2.38;  // the c in sd = c / sqrt(n p)
    bool adapt = true;

    int effective_burn_in() const { return burn_in >= 0 ? burn_in : steps / 5; }
};

// Posterior sampler for the constrained Gaussian prior: log target is
// l_n(Omega) - ||Omega||_F^2 / 2 on {Omega PD, ||Omega|| < 2 Lambda,
// ||Omega^{-1}|| <= 2 Lambda}, -inf outside.  Proposal scale c/sqrt(n p) with
// c adapted toward 30% acceptance during burn-in (Robbins-Monro on log c,
// frozen afterwards).
PosteriorDraws gaussian_prior_posterior_draws(const Dataset& data, double lambda_cap,
                                              const McmcConfig& config, RngStream& rng);

// The log target used above, exposed for tests and the DA sampler.
std::function<double(const SymMatrix&)> constrained_gaussian_log_target(const SymMatrix& sigma_hat,
                                                                        int n, double lambda_cap);

// Spectral clipping of a PD matrix into the open support of the constrained
// Gaussian prior; throws BadInit when lambda_cap <= 0.
SpdMatrix project_into_support(const SpdMatrix& m, double lambda_cap);

// Directory layout: draw_000000.csv ... plus meta.json
// {method, acceptance_rate, burn_in, thinning, seed, stream_id}.
void save_posterior_draws(const PosteriorDraws& draws, const std::filesystem::path& dir);
PosteriorDraws load_posterior_draws(const std::filesystem::path& dir);

}  // namespace bvm
