#pragma once

#include <span>
#include <variant>

#include "bvm/matrix.hpp"
#include "bvm/rng.hpp"

namespace bvm {

struct WishartPrior {
    int b = 1;  // df = p + b - 1
};

struct ConstrainedGaussianPrior {
    double lambda_cap = 1.0;  // Lambda; support {Omega PD, ||Omega|| < 2L, ||Sigma|| <= 2L}
};

using PriorSpec = std::variant<WishartPrior, ConstrainedGaussianPrior>;

enum class Target { covariance, precision };

// Direction of the likelihood perturbation.  `phi` is the linearization
// matrix (Phi for covariance targets, Psi for precision targets);
// `effective` is the matrix actually added to Omega, i.e. Phi itself or
// -Omega* Psi Omega* for precision targets.  `normalizer` is
// ||Sigma*^{1/2} Phi Sigma*^{1/2}||_F resp. ||Omega*^{1/2} Psi Omega*^{1/2}||_F.
struct PerturbationDirection {
    SymMatrix phi;
    Target target = Target::covariance;
    double normalizer = 0.0;
    int rank_bound = 0;
    SymMatrix effective;

    // Covariance-target direction from Phi and the true covariance.
    static PerturbationDirection covariance(SymMatrix phi, const SpdMatrix& sigma_star, int rank_bound);
    // Precision-target direction from Psi and the true precision.
    static PerturbationDirection precision(SymMatrix psi, const SpdMatrix& omega_star, int rank_bound);
};

// l_n(Omega) = (n/2) log det Omega - (n/2) tr(Omega Sigma_hat); no normalizing
// constant.
double log_likelihood(const SpdMatrix& omega, const SymMatrix& sigma_hat, int n);

// Unnormalized log prior density; -inf encodes exclusion from the support.
double log_prior(const PriorSpec& prior, const SymMatrix& omega);

// Omega_t = Omega + sqrt(2) t Phi / (sqrt(n) normalizer)           (covariance)
//         = Omega - sqrt(2) t Omega* Psi Omega* / (sqrt(n) normalizer) (precision)
// May be indefinite for extreme t; consumers validate.
SymMatrix perturbed_precision(const SpdMatrix& omega, const PerturbationDirection& dir, double t, int n);

struct ExpansionCheck {
    double lhs;        // l_n(Omega_t) - l_n(Omega), computed directly
    double rhs;        // linear term - quadratic term - remainder
    double remainder;  // (n/2) sum_j R(h_j)
};

// Exact likelihood-expansion identity with closed-form Taylor remainder
// R(h) = -log(1-h) - h - h^2/2 summed over the eigenvalues h_j of
// Sigma^{1/2} (Omega - Omega_t) Sigma^{1/2}, Sigma = Omega^{-1}.
// Throws PerturbationTooLarge when any h_j >= 1.
ExpansionCheck likelihood_expansion_check(const SpdMatrix& omega, const PerturbationDirection& dir,
                                          double t, const SymMatrix& sigma_hat, int n);

// Closed form of the scalar remainder integral; series-guarded near 0.
double taylor_remainder(double h);

// Adaptive-Simpson evaluation of the remainder integral, used only to
// cross-check the closed form.
double taylor_remainder_quadrature(double h);

struct ExpansionSweepResult {
    int cases = 0;
    double max_rel_error = 0.0;       // max |lhs - rhs| / (1 + |lhs|)
    double max_quadrature_gap = 0.0;  // max |closed remainder - quadrature| over all h_j
};

// Randomized identity sweep: for each (p, n, t) cell draws `cases_per_cell`
// random PD Omega and random symmetric Phi (covariance target, Sigma* = I)
// and accumulates the worst relative identity error and the worst
// closed-form-vs-quadrature gap.
ExpansionSweepResult expansion_sweep(std::span<const int> dims, std::span<const int> ns,
                                     std::span<const double> ts, int cases_per_cell, RngStream rng);

}  // namespace bvm
