#include "bvm/model.hpp"

#include <cmath>
#include <limits>

namespace bvm {

namespace {

// rank with eigenvalues below 1e-10 * ||phi|| counted as zero
int numerical_rank(const SymMatrix& phi) {
    const auto eig = eig_sym(phi);
    double top = 0.0;
    for (double v : eig.values) top = std::max(top, std::fabs(v));
    if (top == 0.0) return 0;
    int r = 0;
    for (double v : eig.values)
        if (std::fabs(v) > 1e-10 * top) ++r;
    return r;
}

}  // namespace

PerturbationDirection PerturbationDirection::covariance(SymMatrix phi, const SpdMatrix& sigma_star,
                                                        int rank_bound) {
    PerturbationDirection dir;
    dir.target = Target::covariance;
    dir.normalizer = std::sqrt(trace_product_squared(phi, sigma_star.sym()));
    if (!(dir.normalizer > 0.0)) throw InvalidArgument("perturbation direction: zero normalizer");
    dir.rank_bound = rank_bound >= 0 ? rank_bound : numerical_rank(phi);
    dir.effective = phi;
    dir.phi = std::move(phi);
    return dir;
}

PerturbationDirection PerturbationDirection::precision(SymMatrix psi, const SpdMatrix& omega_star,
                                                       int rank_bound) {
    PerturbationDirection dir;
    dir.target = Target::precision;
    dir.normalizer = std::sqrt(trace_product_squared(psi, omega_star.sym()));
    if (!(dir.normalizer > 0.0)) throw InvalidArgument("perturbation direction: zero normalizer");
    dir.rank_bound = rank_bound >= 0 ? rank_bound : numerical_rank(psi);
    // effective = -Omega* Psi Omega*
    const int p = psi.dim();
    const auto op = mat_mul(omega_star.sym().data(), psi.data(), p);
    const auto opo = mat_mul(op, omega_star.sym().data(), p);
    std::vector<double> neg(opo.size());
    for (std::size_t k = 0; k < opo.size(); ++k) neg[k] = -opo[k];
    dir.effective = SymMatrix(p, std::move(neg));
    dir.phi = std::move(psi);
    return dir;
}

double log_likelihood(const SpdMatrix& omega, const SymMatrix& sigma_hat, int n) {
    if (omega.dim() != sigma_hat.dim()) throw DimensionMismatch("log_likelihood dimension mismatch");
    if (n < 1) throw InvalidArgument("log_likelihood: n must be >= 1");
    return 0.5 * n * log_det(omega) - 0.5 * n * trace_product(omega.sym(), sigma_hat);
}

double log_prior(const PriorSpec& prior, const SymMatrix& omega) {
    constexpr double kMinusInf = -std::numeric_limits<double>::infinity();
    if (const auto* w = std::get_if<WishartPrior>(&prior)) {
        std::vector<double> l;
        if (!try_cholesky(omega, l)) return kMinusInf;
        const int p = omega.dim();
        double logdet = 0.0;
        for (int i = 0; i < p; ++i) logdet += std::log(l[static_cast<std::size_t>(i) * p + i]);
        logdet *= 2.0;
        return 0.5 * (w->b - 2) * logdet - 0.5 * omega.trace();
    }
    const auto& g = std::get<ConstrainedGaussianPrior>(prior);
    const auto eig = eig_sym(omega);
    const double lam_max = eig.values.front();
    const double lam_min = eig.values.back();
    if (!(lam_min > 0.0)) return kMinusInf;
    if (!(lam_max < 2.0 * g.lambda_cap)) return kMinusInf;
    if (1.0 / lam_min > 2.0 * g.lambda_cap) return kMinusInf;
    const double f = omega.frobenius();
    return -0.5 * f * f;
}

SymMatrix perturbed_precision(const SpdMatrix& omega, const PerturbationDirection& dir, double t, int n) {
    if (omega.dim() != dir.phi.dim()) throw DimensionMismatch("perturbed_precision dimension mismatch");
    if (t == 0.0) return omega.sym();
    const double coef = std::sqrt(2.0) * t / (std::sqrt(static_cast<double>(n)) * dir.normalizer);
    return omega.sym().plus(dir.effective.scaled(coef));
}

double taylor_remainder(double h) {
    if (!(h < 1.0)) throw PerturbationTooLarge("taylor_remainder: h >= 1");
    if (std::fabs(h) < 1e-3) {
        // R(h) = sum_{k>=3} h^k / k; the closed form cancels catastrophically here
        double term = h * h * h;
        double sum = 0.0;
        for (int k = 3; k < 40; ++k) {
            const double add = term / k;
            sum += add;
            term *= h;
            if (std::fabs(term) < 1e-25) break;
        }
        return sum;
    }
    return -std::log1p(-h) - h - 0.5 * h * h;
}

ExpansionCheck likelihood_expansion_check(const SpdMatrix& omega, const PerturbationDirection& dir,
                                          double t, const SymMatrix& sigma_hat, int n) {
    const int p = omega.dim();
    const SymMatrix omega_t_sym = perturbed_precision(omega, dir, t, n);
    if (t == 0.0) return {0.0, 0.0, 0.0};

    std::vector<double> lt;
    if (!try_cholesky(omega_t_sym, lt)) throw PerturbationTooLarge("perturbed precision is not PD");
    const SpdMatrix omega_t(omega_t_sym);

    const double lhs = log_likelihood(omega_t, sigma_hat, n) - log_likelihood(omega, sigma_hat, n);

    const SpdMatrix sigma = spd_inverse(omega);
    // h_j: eigenvalues of Sigma^{1/2} (Omega - Omega_t) Sigma^{1/2}
    const SymMatrix root = sym_sqrt(sigma.sym());
    const SymMatrix diff = omega.sym().minus(omega_t_sym);
    const auto rd = mat_mul(root.data(), diff.data(), p);
    const auto rdr = mat_mul(rd, root.data(), p);
    const auto h = eig_sym(SymMatrix(p, rdr)).values;
    for (double hj : h)
        if (hj >= 1.0) throw PerturbationTooLarge("expansion check: h_j >= 1");

    const double coef = std::sqrt(2.0) * t / (std::sqrt(static_cast<double>(n)) * dir.normalizer);
    // linear term: (n/2) tr((Sigma_hat - Sigma)(Omega - Omega_t)) with
    // Omega - Omega_t = -coef * effective
    const double linear =
        0.5 * n * coef * (trace_product(sigma.sym(), dir.effective) - trace_product(sigma_hat, dir.effective));
    const double quad = 0.5 * t * t * trace_product_squared(dir.effective, sigma.sym()) /
                        (dir.normalizer * dir.normalizer);
    double remainder = 0.0;
    for (double hj : h) remainder += taylor_remainder(hj);
    remainder *= 0.5 * n;

    return {lhs, linear - quad - remainder, remainder};
}

namespace {

double remainder_integrand(double s) { return 1.0 / ((1.0 - s) * (1.0 - s) * (1.0 - s)); }

double adaptive_simpson(double h, double a, double b, double whole, double tol, int depth) {
    auto g = [h](double s) { return (h - s) * (h - s) * remainder_integrand(s); };
    const double mid = 0.5 * (a + b);
    auto simp = [&](double lo, double hi) {
        return (hi - lo) / 6.0 * (g(lo) + 4.0 * g(0.5 * (lo + hi)) + g(hi));
    };
    const double left = simp(a, mid);
    const double right = simp(mid, b);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(h, a, mid, left, tol / 2.0, depth - 1) +
           adaptive_simpson(h, mid, b, right, tol / 2.0, depth - 1);
}

}  // namespace

double taylor_remainder_quadrature(double h) {
    if (!(h < 1.0)) throw PerturbationTooLarge("taylor_remainder_quadrature: h >= 1");
    if (h == 0.0) return 0.0;
    auto g = [h](double s) { return (h - s) * (h - s) * remainder_integrand(s); };
    const double whole = h / 6.0 * (g(0.0) + 4.0 * g(0.5 * h) + g(h));
    // integration from 0 to h; for h < 0 the signed integral flips
    if (h > 0.0) return adaptive_simpson(h, 0.0, h, whole, 1e-14, 40);
    return -adaptive_simpson(h, h, 0.0, -whole, 1e-14, 40);
}

ExpansionSweepResult expansion_sweep(std::span<const int> dims, std::span<const int> ns,
                                     std::span<const double> ts, int cases_per_cell, RngStream rng) {
    ExpansionSweepResult out;
    for (int p : dims) {
        const SpdMatrix sigma_star = SpdMatrix::identity(p);
        for (int n : ns) {
            for (int c = 0; c < cases_per_cell; ++c) {
                // Omega = A A^T / p + I keeps ||Omega^{-1}|| <= 1, so every
                // h_j stays safely below 1 across the t grid.
                std::vector<double> a(static_cast<std::size_t>(p) * p);
                for (auto& x : a) x = rng.normal();
                std::vector<double> aat(static_cast<std::size_t>(p) * p, 0.0);
                for (int i = 0; i < p; ++i)
                    for (int j = 0; j < p; ++j) {
                        double s = 0.0;
                        for (int k = 0; k < p; ++k)
                            s += a[static_cast<std::size_t>(i) * p + k] * a[static_cast<std::size_t>(j) * p + k];
                        aat[static_cast<std::size_t>(i) * p + j] = s / p + (i == j ? 1.0 : 0.0);
                    }
                const SpdMatrix omega{SymMatrix(p, std::move(aat))};

                std::vector<double> phi_raw(static_cast<std::size_t>(p) * p);
                for (auto& x : phi_raw) x = rng.normal();
                SymMatrix phi(p, std::move(phi_raw));

                auto dir = PerturbationDirection::covariance(phi, sigma_star, -1);

                std::vector<double> sh(static_cast<std::size_t>(p) * p);
                for (auto& x : sh) x = rng.normal();
                SymMatrix sigma_hat_noise(p, std::move(sh));
                const SymMatrix sigma_hat =
                    SymMatrix::identity(p).plus(sigma_hat_noise.scaled(1.0 / std::sqrt(static_cast<double>(n))));

                for (double t : ts) {
                    const auto check = likelihood_expansion_check(omega, dir, t, sigma_hat, n);
                    const double rel = std::fabs(check.lhs - check.rhs) / (1.0 + std::fabs(check.lhs));
                    out.max_rel_error = std::max(out.max_rel_error, rel);

                    // cross-check the closed-form remainder on this case's h_j
                    const SymMatrix omega_t = perturbed_precision(omega, dir, t, n);
                    const SpdMatrix sigma = spd_inverse(omega);
                    const SymMatrix root = sym_sqrt(sigma.sym());
                    const SymMatrix diff = omega.sym().minus(omega_t);
                    const auto rd = mat_mul(root.data(), diff.data(), p);
                    const auto rdr = mat_mul(rd, root.data(), p);
                    for (double hj : eig_sym(SymMatrix(p, rdr)).values) {
                        const double gap = std::fabs(taylor_remainder(hj) - taylor_remainder_quadrature(hj));
                        out.max_quadrature_gap = std::max(out.max_quadrature_gap, gap);
                    }
                    ++out.cases;
                }
            }
        }
    }
    return out;
}

}  // namespace bvm
