#pragma once

#include <span>
#include <variant>
#include <vector>

#include "bvm/matrix.hpp"
#include "bvm/model.hpp"

namespace bvm {

// The functional catalogue.  Indices i, j, m are 1-based, matching the JSON
// schema {kind, i, j, m, u, v, target}.
struct EntryFunctional {
    int i = 1, j = 1;
    Target target = Target::covariance;
};
struct QuadraticFunctional {
    std::vector<double> v;
    Target target = Target::covariance;
};
struct BilinearFunctional {
    std::vector<double> u, v;
    Target target = Target::covariance;
};
struct LogDetFunctional {};
struct EntropyFunctional {};
struct EigenvalueFunctional {
    int m = 1;
    Target target = Target::covariance;
};

using FunctionalSpec = std::variant<EntryFunctional, QuadraticFunctional, BilinearFunctional,
                                    LogDetFunctional, EntropyFunctional, EigenvalueFunctional>;

Target target_of(const FunctionalSpec& f);
std::string functional_kind(const FunctionalSpec& f);

// True covariance with its cached inverse.
struct TruthSpec {
    SpdMatrix sigma_star;
    SpdMatrix omega_star;

    explicit TruthSpec(SpdMatrix sigma);
    TruthSpec(SpdMatrix sigma, SpdMatrix omega);  // validated sigma*omega = I
    int dim() const { return sigma_star.dim(); }
};

// Value of the functional at the covariance matrix `sigma`; precision-target
// variants evaluate on sigma^{-1}.
double evaluate(const FunctionalSpec& f, const SpdMatrix& sigma);

// evaluate(f, Sigma_hat) with Sigma_hat the uncentered sample covariance;
// throws SingularSample when a precision target needs an inverse that does
// not exist.
double plug_in_center(const FunctionalSpec& f, const Dataset& data);

// Phi (or Psi) of the functional at the truth, with normalizer and rank bound.
PerturbationDirection linearization(const FunctionalSpec& f, const TruthSpec& truth);

// Closed-form asymptotic variance; internally cross-checked against the
// generic 2 * normalizer^2 to 1e-10 relative.
double asymptotic_variance(const FunctionalSpec& f, const TruthSpec& truth);

// Three-case eigengap of the m-th (1-based) eigenvalue of Sigma* or Omega*;
// returns 0 on exact ties.
double eigengap(const TruthSpec& truth, int m, Target target);

// v -> sqrt(n) (v - center) / sqrt(variance)
std::vector<double> standardize(std::span<const double> values, double center, double variance, int n);

}  // namespace bvm
