#pragma once

#include <vector>

#include "bvm/matrix.hpp"
#include "bvm/rng.hpp"

namespace bvm {

inline constexpr int kKatoMaxOrder = 6;

// Base spectrum plus a perturbation expressed in the base eigenbasis.
// `m` is the 0-based index of the tracked eigenvalue; callers rotate their
// perturbation into the eigenbasis before building the context.
struct KatoContext {
    std::vector<double> values;  // a_j, nonincreasing
    SymMatrix delta;
    int m = 0;

    KatoContext(std::vector<double> values_, SymMatrix delta_, int m_);
    int dim() const { return static_cast<int>(values.size()); }
    // smallest |a_m - a_j| over the immediate neighbours (one-sided at the ends)
    double eigengap() const;
};

// First-order term: Delta_mm.
double kato_first_order(const KatoContext& ctx);

// Order-k term (2 <= k <= kKatoMaxOrder): exact enumeration of
// -(1/k) sum_{v_1+...+v_k = k-1} tr(Delta R^{v_1} ... Delta R^{v_k})
// where R^v is diagonal with entries (a_m - a_j)^{-v} for j != m and
// R^0 = -e_m e_m^T.  Terms are evaluated as products of Delta with diagonal
// scalings; the resolvent powers are never materialized as dense matrices.
double kato_term(const KatoContext& ctx, int k);

struct KatoPartialSum {
    double sum;           // first order + terms 2..K
    double exact_shift;   // eig_sym(A + Delta).values[m] - a_m
    double summability;   // 3e ||Delta|| ||R||; series certified when < 1
};

KatoPartialSum kato_partial_sum(const KatoContext& ctx, int order);

// Number of order-k compositions, i.e. #{v_1+...+v_k = k-1, v_i >= 0}.
long long kato_composition_count(int k);

struct BiasProbeResult {
    double mean_sqrt_n_second_order;  // MC mean of sqrt(n) * lambda_1^{(2)}
    double lower_bound;               // MC mean of sqrt(n)/(a_1-a_2) * sum_{j>=2} Delta_{1j}^2
    std::vector<double> per_rep;      // sqrt(n) * lambda_1^{(2)} per replication
};

// Second-order bias of the top sample eigenvalue: over `reps` datasets of n
// samples from N(0, sigma_star), computes sqrt(n) * lambda_1^{(2)}(A, Delta)
// with A the spectrum of sigma_star and Delta = U*^T (Sigma* - Sigma_hat) U*.
// sigma_star must be diagonal with a strict top eigengap.
BiasProbeResult second_order_bias_probe(const SpdMatrix& sigma_star, int n, int reps, RngStream rng,
                                        int threads = 0);

}  // namespace bvm
