#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "bvm/harness.hpp"
#include "bvm/model.hpp"
#include "bvm/samplers.hpp"
#include "test_helpers.hpp"

using namespace bvm;
using test::mean_of;
using test::variance_of;

TEST_SUITE_BEGIN("samplers");

TEST_CASE("streams are deterministic and separated") {
    RngStream a(123, 5), b(123, 5), c(123, 6);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const auto ua = a.next_u64();
        all_equal = all_equal && (ua == b.next_u64());
        any_diff = any_diff || (ua != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);

    RngStream r1(9, 0), r2(9, 0);
    const Dataset d1 = draw_mvn(SpdMatrix::identity(3), 50, r1);
    const Dataset d2 = draw_mvn(SpdMatrix::identity(3), 50, r2);
    CHECK(d1.rows == d2.rows);

    CHECK(RngStream(4, 2).child(3).stream_id() == 5);
}

TEST_CASE("draw_mvn matches its target moments") {
    RngStream rng(21, 0);
    const int n = 100000;
    const Dataset d = draw_mvn(SpdMatrix::identity(2), n, rng);
    const SymMatrix s = sample_covariance(d, false);
    const double tol = 4.0 * std::sqrt(2.0 / n);
    CHECK(std::fabs(s(0, 0) - 1.0) <= tol);
    CHECK(std::fabs(s(1, 1) - 1.0) <= tol);
    CHECK(std::fabs(s(0, 1)) <= tol);

    const Dataset d2 = draw_mvn(SpdMatrix::diagonal(std::vector<double>{4.0, 1.0}), n, rng);
    const SymMatrix s2 = sample_covariance(d2, false);
    CHECK(std::fabs(s2(0, 0) - 4.0) <= 4.0 * std::sqrt(2.0 * 16.0 / n));
    CHECK(std::fabs(s2(1, 1) - 1.0) <= 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("draw_wishart mean, PD at df = p, and chi-square margin") {
    RngStream rng(31, 0);
    const int df = 10000;
    const int reps = 50;
    SymMatrix acc(3);
    for (int r = 0; r < reps; ++r)
        acc = acc.plus(draw_wishart(SpdMatrix::identity(3), df, rng).sym().scaled(1.0 / df));
    acc = acc.scaled(1.0 / reps);
    const double tol = 4.0 * std::sqrt(2.0 / (static_cast<double>(df) * reps));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::fabs(acc(i, j) - (i == j ? 1.0 : 0.0)) <= tol);

    // df = p draws stay PD (construction would throw otherwise)
    const SpdMatrix scale = SpdMatrix::diagonal(std::vector<double>{2.0, 1.0});
    for (int r = 0; r < 1000; ++r) (void)draw_wishart(scale, 2, rng);

    CHECK_THROWS_AS(draw_wishart(scale, 1, rng), DegreesOfFreedomTooSmall);

    // p = 1, df = 5: chi-square_5 moments over 1e5 draws
    const int big = 100000;
    std::vector<double> draws(big);
    for (int r = 0; r < big; ++r) draws[r] = draw_wishart(SpdMatrix::identity(1), 5, rng)(0, 0);
    const double mean = mean_of(draws);
    const double var = variance_of(draws);
    CHECK(std::fabs(mean - 5.0) <= 4.0 * std::sqrt(10.0 / big));
    // Var(S^2) ~ (mu4 - var^2)/N with mu4 = 48k + 12k^2 = 540 for k = 5
    CHECK(std::fabs(var - 10.0) <= 4.0 * std::sqrt((540.0 - 100.0) / big));
}

TEST_CASE("wishart additivity in first and second moments") {
    RngStream r1(41, 0), r2(41, 1);
    const SpdMatrix scale = SpdMatrix::identity(2);
    const int reps = 10000;
    const int d1 = 2, d2 = 3, d = d1 + d2;
    std::vector<double> diag0(reps), off(reps);
    for (int r = 0; r < reps; ++r) {
        const SymMatrix w =
            draw_wishart(scale, d1, r1).sym().plus(draw_wishart(scale, d2, r2).sym());
        diag0[r] = w(0, 0);
        off[r] = w(0, 1);
    }
    // W(I, d): diag entry ~ chi^2_d (mean d, var 2d, mu4 = 48d + 12d^2);
    // off entry: mean 0, var d, kurtosis 3 + 6/d.
    const double se_mean_diag = std::sqrt(2.0 * d / static_cast<double>(reps));
    CHECK(std::fabs(mean_of(diag0) - d) <= 4.0 * se_mean_diag);
    const double var_diag = variance_of(diag0);
    const double se_var_diag = 2.0 * d * std::sqrt((2.0 + 12.0 / d) / reps);
    CHECK(std::fabs(var_diag - 2.0 * d) <= 4.0 * se_var_diag);

    CHECK(std::fabs(mean_of(off)) <= 4.0 * std::sqrt(static_cast<double>(d) / reps));
    const double se_var_off = d * std::sqrt((2.0 + 6.0 / d) / reps);
    CHECK(std::fabs(variance_of(off) - d) <= 4.0 * se_var_off);
}

TEST_CASE("conjugate posterior matches the Wishart mean identity") {
    RngStream rng(51, 0);
    const int p = 2, n = 50, b = 2, n_draws = 10000;
    const Dataset data = draw_mvn(SpdMatrix::identity(p), n, rng);
    const PosteriorDraws draws = conjugate_posterior_draws(data, b, n_draws, rng);
    CHECK(draws.meta.method == "conjugate");
    REQUIRE(static_cast<int>(draws.draws.size()) == n_draws);

    const SymMatrix sigma_hat = sample_covariance(data, false);
    const SpdMatrix expected_scale = spd_inverse(SpdMatrix(sigma_hat.scaled(n).plus(SymMatrix::identity(p))));
    const double df = n + p + b - 1;

    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
            std::vector<double> entry(n_draws);
            for (int r = 0; r < n_draws; ++r) entry[r] = draws.draws[r](i, j);
            const double expected = df * expected_scale(i, j);
            const double se = std::sqrt(variance_of(entry) / n_draws);
            CHECK(std::fabs(mean_of(entry) - expected) <= 4.0 * se);
        }
}

TEST_CASE("conjugate prior draws (n = 0) have mean b in one dimension") {
    RngStream rng(61, 0);
    const int b = 3, n_draws = 20000;
    const PosteriorDraws draws = conjugate_posterior_draws(SymMatrix(1), 0, b, n_draws, rng);
    std::vector<double> omega(n_draws);
    for (int r = 0; r < n_draws; ++r) omega[r] = draws.draws[r](0, 0);
    CHECK(std::fabs(mean_of(omega) - b) <= 4.0 * std::sqrt(2.0 * b / static_cast<double>(n_draws)));
}

TEST_CASE("conjugate draws are reproducible under the same stream") {
    RngStream r1(71, 0), r2(71, 0);
    const Dataset data = draw_mvn(SpdMatrix::identity(2), 30, r1);
    RngStream r1b(99, 4), r2b(99, 4);
    const auto a = conjugate_posterior_draws(data, 2, 50, r1b);
    const auto b = conjugate_posterior_draws(data, 2, 50, r2b);
    for (int k = 0; k < 50; ++k) CHECK(a.draws[k].sym().data() == b.draws[k].sym().data());
    (void)r2;
}

TEST_CASE("metropolis_chain basics") {
    // constant target accepts everything
    auto flat = [](const SymMatrix&) { return 0.0; };
    RngStream rng(81, 0);
    const auto res = metropolis_chain(flat, SpdMatrix::identity(2), 500, 0.5, rng);
    CHECK(res.acceptance_rate == doctest::Approx(1.0));
    CHECK(static_cast<int>(res.chain.size()) == 500);

    // half-normal target on omega > 0: mean sqrt(2/pi)
    auto half_normal = [](const SymMatrix& m) {
        const double w = m(0, 0);
        if (w <= 0.0) return -std::numeric_limits<double>::infinity();
        return -0.5 * w * w;
    };
    RngStream rng2(82, 0);
    const auto hn = metropolis_chain(half_normal, SpdMatrix::identity(1), 200000, 1.0, rng2);
    std::vector<double> values;
    values.reserve(hn.chain.size() - 20000);
    for (std::size_t i = 20000; i < hn.chain.size(); ++i) values.push_back(hn.chain[i](0, 0));
    const double ess = effective_sample_size(values);
    const double target_mean = std::sqrt(2.0 / std::numbers::pi);
    const double sd = std::sqrt(1.0 - 2.0 / std::numbers::pi);
    CHECK(std::fabs(mean_of(values) - target_mean) <= 4.0 * sd / std::sqrt(ess));

    // vanishing proposal on a smooth target accepts almost always
    auto smooth = [](const SymMatrix& m) {
        std::vector<double> l;
        if (!try_cholesky(m, l)) return -std::numeric_limits<double>::infinity();
        return -0.5 * m.trace();
    };
    RngStream rng3(83, 0);
    const auto tiny = metropolis_chain(smooth, SpdMatrix::identity(2), 2000, 1e-8, rng3);
    CHECK(tiny.acceptance_rate >= 0.99);

    // a target that is -inf at the init is rejected up front
    auto never = [](const SymMatrix&) { return -std::numeric_limits<double>::infinity(); };
    RngStream rng4(84, 0);
    CHECK_THROWS_AS(metropolis_chain(never, SpdMatrix::identity(1), 10, 1.0, rng4), BadInit);
}

TEST_CASE("gaussian prior sampler: acceptance window and support membership") {
    RngStream rng(91, 0);
    const Dataset data = draw_mvn(SpdMatrix(2, {1.0, 0.3, 0.3, 1.0}), 1000, rng);
    McmcConfig cfg;
    cfg.steps = 30000;
    cfg.thinning = 5;
    const double lambda = 10.0;
    const PosteriorDraws draws = gaussian_prior_posterior_draws(data, lambda, cfg, rng);
    REQUIRE(draws.meta.acceptance_rate.has_value());
    CHECK(*draws.meta.acceptance_rate >= 0.15);
    CHECK(*draws.meta.acceptance_rate <= 0.5);
    CHECK(draws.meta.method == "mcmc");

    for (const auto& omega : draws.draws) {
        const auto eig = eig_sym(omega.sym());
        CHECK(eig.values.front() < 2.0 * lambda);
        CHECK(1.0 / eig.values.back() <= 2.0 * lambda);
    }
}

TEST_CASE("gaussian prior sampler: one-dimensional grid oracle") {
    RngStream rng(92, 0);
    const int n = 2000;
    const Dataset data = draw_mvn(SpdMatrix::identity(1), n, rng);
    const double sigma_hat = sample_covariance(data, false)(0, 0);

    McmcConfig cfg;
    cfg.steps = 60000;
    cfg.thinning = 5;
    const PosteriorDraws draws = gaussian_prior_posterior_draws(data, 50.0, cfg, rng);
    std::vector<double> omega(draws.draws.size());
    for (std::size_t i = 0; i < omega.size(); ++i) omega[i] = draws.draws[i](0, 0);

    // grid quadrature of the unnormalized density exp(l_n(w) - w^2/2)
    const int grid_n = 20000;
    const double lo = 0.5, hi = 1.6;
    double norm = 0.0, mean_acc = 0.0, best_w = lo, best_lp = -1e300;
    auto log_post = [&](double w) { return 0.5 * n * std::log(w) - 0.5 * n * w * sigma_hat - 0.5 * w * w; };
    const double lp0 = log_post(1.0 / sigma_hat);
    for (int g = 0; g < grid_n; ++g) {
        const double w = lo + (hi - lo) * (g + 0.5) / grid_n;
        const double lp = log_post(w);
        const double dens = std::exp(lp - lp0);
        norm += dens;
        mean_acc += w * dens;
        if (lp > best_lp) {
            best_lp = lp;
            best_w = w;
        }
    }
    const double grid_mean = mean_acc / norm;

    const double ess = effective_sample_size(omega);
    const double sd = std::sqrt(variance_of(omega));
    CHECK(std::fabs(mean_of(omega) - grid_mean) <= 5.0 * sd / std::sqrt(ess));

    // the grid argmax matches the stationarity condition n/(2w) = n sigma_hat/2 + w
    const double w_star = (-n * sigma_hat + std::sqrt(n * (n * sigma_hat * sigma_hat + 8.0))) / 4.0;
    CHECK(best_w == doctest::Approx(w_star).epsilon(1e-3));
}

TEST_CASE("mcmc stationarity smoke test against the conjugate posterior") {
    RngStream rng(93, 0);
    const int p = 2, n = 500, b = 2;
    const Dataset data = draw_mvn(SpdMatrix::identity(p), n, rng);
    const SymMatrix sigma_hat = sample_covariance(data, false);

    // conjugate reference
    const PosteriorDraws conj = conjugate_posterior_draws(data, b, 4000, rng);
    std::vector<double> ref(conj.draws.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = conj.draws[i](0, 0);
    const double ref_mean = mean_of(ref);
    const double ref_sd = std::sqrt(variance_of(ref));

    // random-walk chain whose target is likelihood + Wishart prior log-density
    const PriorSpec prior = WishartPrior{b};
    auto log_target = [&](const SymMatrix& omega) {
        const double lp = log_prior(prior, omega);
        if (!std::isfinite(lp)) return lp;
        return log_likelihood(SpdMatrix(omega), sigma_hat, n) + lp;
    };
    const SpdMatrix init = conj.draws.front();
    RngStream chain_rng(94, 0);
    const auto res = metropolis_chain(log_target, init, 100000, 0.5 / std::sqrt(double(n) * p), chain_rng);
    std::vector<double> w11(res.chain.size());
    for (std::size_t i = 0; i < w11.size(); ++i) w11[i] = res.chain[i](0, 0);
    const double ess = effective_sample_size(w11);
    CHECK(std::fabs(mean_of(w11) - ref_mean) <= 5.0 * ref_sd / std::sqrt(std::min(ess, 4000.0)));
}

TEST_CASE("posterior draws serialize to a directory and back") {
    RngStream rng(95, 0);
    const Dataset data = draw_mvn(SpdMatrix::identity(2), 40, rng);
    const PosteriorDraws draws = conjugate_posterior_draws(data, 2, 5, rng);
    const auto dir = std::filesystem::temp_directory_path() / "bvm_draws_io";
    std::filesystem::remove_all(dir);
    save_posterior_draws(draws, dir);
    const PosteriorDraws loaded = load_posterior_draws(dir);
    CHECK(loaded.meta.method == "conjugate");
    CHECK(loaded.meta.seed == draws.meta.seed);
    REQUIRE(loaded.draws.size() == draws.draws.size());
    for (std::size_t i = 0; i < loaded.draws.size(); ++i)
        CHECK(test::max_abs_diff(loaded.draws[i].sym(), draws.draws[i].sym()) == 0.0);
}

TEST_SUITE_END();
