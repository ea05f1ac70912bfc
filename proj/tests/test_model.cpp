#include <doctest.h>

#include <cmath>
#include <limits>

#include "bvm/model.hpp"
#include "bvm/samplers.hpp"
#include "test_helpers.hpp"

using namespace bvm;
using test::random_spd;
using test::random_sym;

TEST_SUITE_BEGIN("model");

TEST_CASE("log_likelihood on known values") {
    const int p = 3;
    CHECK(log_likelihood(SpdMatrix::identity(p), SymMatrix::identity(p), 2) == doctest::Approx(-p));
    CHECK(log_likelihood(SpdMatrix::diagonal(std::vector<double>{2.0}), SymMatrix::identity(1), 2) ==
          doctest::Approx(std::log(2.0) - 2.0).epsilon(1e-14));

    // p = 1 grid search: maximizer at omega = 1/sigma_hat
    const double sigma_hat = 0.8;
    double best_w = 0.0, best = -1e300;
    for (int g = 1; g <= 4000; ++g) {
        const double w = g * 1e-3;
        const double ll =
            log_likelihood(SpdMatrix::diagonal(std::vector<double>{w}),
                           SymMatrix::diagonal(std::vector<double>{sigma_hat}), 10);
        if (ll > best) {
            best = ll;
            best_w = w;
        }
    }
    CHECK(best_w == doctest::Approx(1.0 / sigma_hat).epsilon(1e-3));
}

TEST_CASE("log_prior for both priors") {
    // Wishart b = 2: log det term vanishes
    const SymMatrix omega(2, {1.5, 0.2, 0.2, 1.1});
    CHECK(log_prior(WishartPrior{2}, omega) == doctest::Approx(-0.5 * omega.trace()).epsilon(1e-14));
    // Wishart b = 4 at identity(2): (4-2)/2 * 0 - 1
    CHECK(log_prior(WishartPrior{4}, SymMatrix::identity(2)) == doctest::Approx(-1.0));
    // non-PD input excluded
    CHECK(log_prior(WishartPrior{3}, SymMatrix(2, {1, 2, 2, 1})) ==
          -std::numeric_limits<double>::infinity());

    // constrained Gaussian: spectral cap violated
    CHECK(log_prior(ConstrainedGaussianPrior{1.0}, SymMatrix::identity(2).scaled(3.0)) ==
          -std::numeric_limits<double>::infinity());
    // inside the support: -||Omega||_F^2/2
    const SymMatrix inside = SymMatrix::identity(2);
    CHECK(log_prior(ConstrainedGaussianPrior{1.0}, inside) == doctest::Approx(-1.0));

    // boundary probes at ||Omega|| = 2 Lambda +- 1e-6
    const double lambda = 1.0;
    CHECK(std::isfinite(log_prior(ConstrainedGaussianPrior{lambda},
                                  SymMatrix::identity(2).scaled(2.0 - 1e-6))));
    CHECK(log_prior(ConstrainedGaussianPrior{lambda}, SymMatrix::identity(2).scaled(2.0 + 1e-6)) ==
          -std::numeric_limits<double>::infinity());
    // ||Sigma|| = 2 Lambda boundary: omega = I/(2 Lambda) sits exactly on the
    // non-strict boundary and stays inside
    CHECK(std::isfinite(
        log_prior(ConstrainedGaussianPrior{lambda}, SymMatrix::identity(2).scaled(1.0 / (2.0 * lambda)))));
    CHECK(log_prior(ConstrainedGaussianPrior{lambda},
                    SymMatrix::identity(2).scaled(1.0 / (2.0 * lambda) - 1e-6)) ==
          -std::numeric_limits<double>::infinity());
}

TEST_CASE("perturbed_precision directions") {
    const SpdMatrix omega = SpdMatrix::identity(3);
    const auto dir = PerturbationDirection::covariance(SymMatrix::identity(3),
                                                       SpdMatrix::identity(3), 3);
    CHECK(dir.normalizer == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

    // t = 0 returns omega unchanged
    CHECK(test::max_abs_diff(perturbed_precision(omega, dir, 0.0, 100), omega.sym()) == 0.0);

    // covariance target, Phi = I, Sigma* = I: Omega_t = Omega + sqrt(2) t /sqrt(n p) I
    const int n = 100;
    const double t = 0.7;
    const SymMatrix omega_t = perturbed_precision(omega, dir, t, n);
    const double expected = 1.0 + std::sqrt(2.0) * t / std::sqrt(n * 3.0);
    CHECK(omega_t(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(omega_t(0, 1) == doctest::Approx(0.0));

    // Weyl bound: eigenvalue shifts bounded by the spectral norm of the update
    RngStream rng(101, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const SpdMatrix base = random_spd(3, rng);
        const SymMatrix phi = random_sym(3, rng);
        const auto d = PerturbationDirection::covariance(phi, SpdMatrix::identity(3), -1);
        const SymMatrix shifted = perturbed_precision(base, d, 1.3, 50);
        const double bound =
            std::sqrt(2.0) * 1.3 * norms(phi).spectral / (std::sqrt(50.0) * d.normalizer);
        const auto ev0 = eig_sym(base.sym()).values;
        const auto ev1 = eig_sym(shifted).values;
        for (int k = 0; k < 3; ++k) CHECK(std::fabs(ev1[k] - ev0[k]) <= bound + 1e-12);
    }

    CHECK_THROWS_AS(perturbed_precision(SpdMatrix::identity(2), dir, 1.0, 10), DimensionMismatch);
}

TEST_CASE("likelihood expansion is an exact identity") {
    // t = 0 gives all zeros
    const auto dir0 =
        PerturbationDirection::covariance(SymMatrix::identity(2), SpdMatrix::identity(2), 2);
    const auto zero = likelihood_expansion_check(SpdMatrix::identity(2), dir0, 0.0,
                                                 SymMatrix::identity(2), 50);
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs == 0.0);
    CHECK(zero.remainder == 0.0);

    // randomized sweep at reduced size (the acceptance suite runs the full one)
    const std::vector<int> dims{2, 3};
    const std::vector<int> ns{50};
    const std::vector<double> ts{-2.0, 1.0, 3.0};
    const auto sweep = expansion_sweep(dims, ns, ts, 10, RngStream(111, 0));
    CHECK(sweep.cases == 2 * 1 * 10 * 3);
    CHECK(sweep.max_rel_error <= 1e-8);
    CHECK(sweep.max_quadrature_gap <= 1e-10);

    // precision-target direction: identity still holds
    RngStream rng(112, 0);
    const SpdMatrix omega_star = random_spd(3, rng);
    const SymMatrix psi = random_sym(3, rng);
    const auto dir = PerturbationDirection::precision(psi, omega_star, -1);
    const SpdMatrix omega = random_spd(3, rng, 1.5);
    const SymMatrix sigma_hat = SpdMatrix::identity(3).sym();
    const auto chk = likelihood_expansion_check(omega, dir, 0.8, sigma_hat, 200);
    CHECK(std::fabs(chk.lhs - chk.rhs) <= 1e-8 * (1.0 + std::fabs(chk.lhs)));
}

TEST_CASE("precision normalizer equals the conjugated covariance normalizer") {
    // ||Omega*^{1/2} Psi Omega*^{1/2}||_F = ||Sigma*^{1/2} (Omega* Psi Omega*) Sigma*^{1/2}||_F:
    // the two standardization constants of the covariance and precision forms
    // agree, which is what lets one perturbation formula serve both targets.
    RngStream rng(115, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const SpdMatrix omega_star = random_spd(3, rng);
        const SpdMatrix sigma_star = spd_inverse(omega_star);
        const SymMatrix psi = random_sym(3, rng);
        const auto dir = PerturbationDirection::precision(psi, omega_star, -1);

        const SymMatrix root = sym_sqrt(sigma_star.sym());
        const auto re = mat_mul(root.data(), dir.effective.data(), 3);
        const auto rer = mat_mul(re, root.data(), 3);
        double fro = 0.0;
        for (double x : rer) fro += x * x;
        CHECK(std::sqrt(fro) == doctest::Approx(dir.normalizer).epsilon(1e-9));
    }
}

TEST_CASE("remainder scales cubically in the perturbation") {
    RngStream rng(113, 0);
    const SpdMatrix omega = random_spd(3, rng);
    const SymMatrix phi = random_sym(3, rng);
    const auto dir = PerturbationDirection::covariance(phi, SpdMatrix::identity(3), -1);
    const SymMatrix sigma_hat = SymMatrix::identity(3);
    const int n = 50;
    const double t = 1.5;
    const auto full = likelihood_expansion_check(omega, dir, t, sigma_hat, n);
    const auto half = likelihood_expansion_check(omega, dir, t / 2.0, sigma_hat, n);
    REQUIRE(std::fabs(full.remainder) > 1e-6);  // remainder dominates round-off here
    CHECK(std::fabs(full.remainder) / std::fabs(half.remainder) >= 7.0);
}

TEST_CASE("perturbation too large raises") {
    // enormous t drives some h_j past 1 (Omega_t loses definiteness)
    const auto dir =
        PerturbationDirection::covariance(SymMatrix::identity(2), SpdMatrix::identity(2), 2);
    CHECK_THROWS_AS(likelihood_expansion_check(SpdMatrix::identity(2), dir, -50.0,
                                               SymMatrix::identity(2), 4),
                    PerturbationTooLarge);
}

TEST_CASE("taylor remainder closed form vs quadrature and series") {
    for (double h : {-0.9, -0.5, -0.1, -1e-4, 1e-5, 1e-3, 0.05, 0.3, 0.7, 0.95}) {
        const double closed = taylor_remainder(h);
        const double quad = taylor_remainder_quadrature(h);
        CHECK(std::fabs(closed - quad) <= 1e-10 * (1.0 + std::fabs(closed)));
    }
    CHECK(taylor_remainder(0.0) == 0.0);
    CHECK_THROWS_AS(taylor_remainder(1.0), PerturbationTooLarge);
}

TEST_CASE("posterior kernel equals the Wishart posterior density up to a constant") {
    RngStream rng(114, 0);
    const int p = 3, n = 40, b = 3;
    const Dataset data = draw_mvn(SpdMatrix::identity(p), n, rng);
    const SymMatrix sigma_hat = sample_covariance(data, false);
    const SymMatrix n_sig_plus_i = sigma_hat.scaled(n).plus(SymMatrix::identity(p));
    const double df = n + p + b - 1;

    auto kernel = [&](const SpdMatrix& omega) {
        return log_likelihood(omega, sigma_hat, n) + log_prior(WishartPrior{b}, omega.sym());
    };
    auto wishart_logpdf = [&](const SpdMatrix& omega) {
        return 0.5 * (df - p - 1) * log_det(omega) - 0.5 * trace_product(n_sig_plus_i, omega.sym());
    };

    for (int trial = 0; trial < 10; ++trial) {
        const SpdMatrix o1 = random_spd(p, rng);
        const SpdMatrix o2 = random_spd(p, rng);
        const double d1 = kernel(o1) - kernel(o2);
        const double d2 = wishart_logpdf(o1) - wishart_logpdf(o2);
        CHECK(std::fabs(d1 - d2) <= 1e-8 * (1.0 + std::fabs(d1)));
    }
}

TEST_SUITE_END();
