#pragma once

#include <span>
#include <vector>

#include "bvm/matrix.hpp"
#include "bvm/samplers.hpp"

namespace bvm {

enum class DaMode { lda, qda };

// True class parameters plus the fixed new observation z.
struct DaTruth {
    std::vector<double> mu_x, mu_y;
    SpdMatrix sigma_x, sigma_y;  // equal for LDA
    std::vector<double> z;

    DaTruth(std::vector<double> mu_x, std::vector<double> mu_y, SpdMatrix sigma_x, SpdMatrix sigma_y,
            std::vector<double> z);
    int dim() const { return sigma_x.dim(); }
};

// Two equally sized training samples.
struct DaDataset {
    Dataset x, y;

    DaDataset(Dataset x, Dataset y);
};

struct DaDraw {
    std::vector<double> mu_x, mu_y;
    SpdMatrix omega_x, omega_y;  // LDA stores the shared precision in both
};

struct DaDraws {
    std::vector<DaDraw> draws;
    PosteriorDraws::Meta meta;
};

// -(z-mu_X)^T Omega_X (z-mu_X) + (z-mu_Y)^T Omega_Y (z-mu_Y) + log det(Omega_X)/det(Omega_Y)
double qda_discriminant(std::span<const double> mu_x, std::span<const double> mu_y,
                        const SpdMatrix& omega_x, const SpdMatrix& omega_y, std::span<const double> z);

// QDA without the log-det term (shared precision).
double lda_discriminant(std::span<const double> mu_x, std::span<const double> mu_y,
                        const SpdMatrix& omega, std::span<const double> z);

// Plug-in centering: LDA uses the pooled centered covariance
// (Sigma_hat_X + Sigma_hat_Y)/2; QDA uses the per-class centered covariances.
double da_center(const DaDataset& data, DaMode mode, std::span<const double> z);

struct LdaVarianceParts {
    double v2;
    SymMatrix phi;
    std::vector<double> xi_x, xi_y;
};
// V^2 = 4 ||Sigma*^{1/2} Phi Sigma*^{1/2}||_F^2 + xi_X^T Omega* xi_X + xi_Y^T Omega* xi_Y
// with Phi = Omega*((z-mu_X)(z-mu_X)^T - (z-mu_Y)(z-mu_Y)^T)Omega*/2,
// xi_X = 2(z-mu_X), xi_Y = 2(mu_Y-z).  Requires sigma_x == sigma_y.
LdaVarianceParts lda_variance(const DaTruth& truth);

struct QdaVarianceParts {
    double v2;
    SymMatrix phi_x, phi_y;
    std::vector<double> xi_x, xi_y;
};
// V^2 = 2||Sigma_X^{1/2} Phi_X Sigma_X^{1/2}||_F^2 + 2||Sigma_Y^{1/2} Phi_Y Sigma_Y^{1/2}||_F^2
//       + xi_X^T Omega_X* xi_X + xi_Y^T Omega_Y* xi_Y
// with Phi_X = -Omega_X*(Sigma_X* - (z-mu_X)(z-mu_X)^T)Omega_X* and Phi_Y its
// sign-flipped Y analogue.
QdaVarianceParts qda_variance(const DaTruth& truth);

struct SeparationBound {
    double v2;
    double bound;  // 2 lambda_min(Omega*) ||mu_X - mu_Y||^2
    bool holds;
};
SeparationBound separation_bound_check(const DaTruth& truth);

// (n/2) log det Omega - (n/2) tr(Omega Sigma_tilde), Sigma_tilde =
// (1/n) sum (x_i - mu)(x_i - mu)^T.
double da_log_likelihood(std::span<const double> mu, const SpdMatrix& omega, const Dataset& data);

// Metropolis-within-Gibbs for the product prior (N(0, I) on each mean,
// constrained Gaussian on each precision).  The mean block uses its exact
// Gaussian full conditional; the precision block uses the random-walk kernel.
// QDA samples the two classes independently; LDA shares one precision.
DaDraws da_posterior_draws(const DaDataset& data, double lambda_cap, DaMode mode,
                           const McmcConfig& config, RngStream& rng);

}  // namespace bvm
