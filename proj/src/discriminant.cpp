#include "bvm/discriminant.hpp"

#include <cmath>
#include <limits>

#include "bvm/model.hpp"

namespace bvm {

namespace {

std::vector<double> vec_minus(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("vector length mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

double norm_sq(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

// Omega A Omega for symmetric A.
SymMatrix sandwich(const SpdMatrix& omega, const SymMatrix& a) {
    const int p = omega.dim();
    const auto oa = mat_mul(omega.sym().data(), a.data(), p);
    const auto oao = mat_mul(oa, omega.sym().data(), p);
    return SymMatrix(p, oao);
}

// (1/n) sum (x_i - mu)(x_i - mu)^T
SymMatrix shifted_covariance(const Dataset& data, std::span<const double> mu) {
    const int n = data.n, p = data.p;
    if (static_cast<int>(mu.size()) != p) throw DimensionMismatch("shifted_covariance: mu length != p");
    std::vector<double> s(static_cast<std::size_t>(p) * p, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) {
            const double dj = data(i, j) - mu[j];
            for (int k = j; k < p; ++k) s[static_cast<std::size_t>(j) * p + k] += dj * (data(i, k) - mu[k]);
        }
    for (int j = 0; j < p; ++j)
        for (int k = j; k < p; ++k) {
            s[static_cast<std::size_t>(j) * p + k] /= n;
            s[static_cast<std::size_t>(k) * p + j] = s[static_cast<std::size_t>(j) * p + k];
        }
    return SymMatrix(p, std::move(s));
}

std::vector<double> column_mean(const Dataset& data) {
    std::vector<double> mean(data.p, 0.0);
    for (int i = 0; i < data.n; ++i)
        for (int j = 0; j < data.p; ++j) mean[j] += data(i, j);
    for (double& m : mean) m /= data.n;
    return mean;
}

}  // namespace

DaTruth::DaTruth(std::vector<double> mu_x_, std::vector<double> mu_y_, SpdMatrix sigma_x_,
                 SpdMatrix sigma_y_, std::vector<double> z_)
    : mu_x(std::move(mu_x_)), mu_y(std::move(mu_y_)), sigma_x(std::move(sigma_x_)),
      sigma_y(std::move(sigma_y_)), z(std::move(z_)) {
    const int p = sigma_x.dim();
    if (sigma_y.dim() != p || static_cast<int>(mu_x.size()) != p || static_cast<int>(mu_y.size()) != p ||
        static_cast<int>(z.size()) != p)
        throw DimensionMismatch("DaTruth: field dimensions disagree");
}

DaDataset::DaDataset(Dataset x_, Dataset y_) : x(std::move(x_)), y(std::move(y_)) {
    if (x.p != y.p) throw DimensionMismatch("DaDataset: class dimensions differ");
    if (x.n != y.n) throw DimensionMismatch("DaDataset: unequal class sample sizes");
}

double qda_discriminant(std::span<const double> mu_x, std::span<const double> mu_y,
                        const SpdMatrix& omega_x, const SpdMatrix& omega_y, std::span<const double> z) {
    const auto dx = vec_minus(z, mu_x);
    const auto dy = vec_minus(z, mu_y);
    return -quad_form(omega_x.sym(), dx, dx) + quad_form(omega_y.sym(), dy, dy) + log_det(omega_x) -
           log_det(omega_y);
}

double lda_discriminant(std::span<const double> mu_x, std::span<const double> mu_y,
                        const SpdMatrix& omega, std::span<const double> z) {
    const auto dx = vec_minus(z, mu_x);
    const auto dy = vec_minus(z, mu_y);
    return -quad_form(omega.sym(), dx, dx) + quad_form(omega.sym(), dy, dy);
}

double da_center(const DaDataset& data, DaMode mode, std::span<const double> z) {
    const auto xbar = column_mean(data.x);
    const auto ybar = column_mean(data.y);
    const SymMatrix cov_x = sample_covariance(data.x, /*centered=*/true);
    const SymMatrix cov_y = sample_covariance(data.y, /*centered=*/true);
    try {
        if (mode == DaMode::lda) {
            const SpdMatrix pooled(cov_x.plus(cov_y).scaled(0.5));
            return lda_discriminant(xbar, ybar, spd_inverse(pooled), z);
        }
        return qda_discriminant(xbar, ybar, spd_inverse(SpdMatrix(cov_x)), spd_inverse(SpdMatrix(cov_y)),
                                z);
    } catch (const NotPositiveDefinite&) {
        throw SingularSample("da_center: singular class covariance (n too small for p)");
    }
}

LdaVarianceParts lda_variance(const DaTruth& truth) {
    const double scale = 1.0 + truth.sigma_x.sym().frobenius();
    if (truth.sigma_x.sym().minus(truth.sigma_y.sym()).frobenius() > 1e-9 * scale)
        throw CovarianceMismatch("lda_variance: sigma_x != sigma_y");
    const SpdMatrix& sigma = truth.sigma_x;
    const SpdMatrix omega = spd_inverse(sigma);

    const auto dx = vec_minus(truth.z, truth.mu_x);
    const auto dy = vec_minus(truth.z, truth.mu_y);
    const SymMatrix inner = outer(dx).minus(outer(dy));
    LdaVarianceParts out;
    out.phi = sandwich(omega, inner).scaled(0.5);
    out.xi_x.assign(dx.begin(), dx.end());
    for (double& v : out.xi_x) v *= 2.0;
    out.xi_y = vec_minus(truth.mu_y, truth.z);
    for (double& v : out.xi_y) v *= 2.0;
    out.v2 = 4.0 * trace_product_squared(out.phi, sigma.sym()) +
             quad_form(omega.sym(), out.xi_x, out.xi_x) + quad_form(omega.sym(), out.xi_y, out.xi_y);
    return out;
}

QdaVarianceParts qda_variance(const DaTruth& truth) {
    const SpdMatrix omega_x = spd_inverse(truth.sigma_x);
    const SpdMatrix omega_y = spd_inverse(truth.sigma_y);
    const auto dx = vec_minus(truth.z, truth.mu_x);
    const auto dy = vec_minus(truth.z, truth.mu_y);

    QdaVarianceParts out;
    out.phi_x = sandwich(omega_x, truth.sigma_x.sym().minus(outer(dx))).scaled(-1.0);
    out.phi_y = sandwich(omega_y, truth.sigma_y.sym().minus(outer(dy)));
    out.xi_x.assign(dx.begin(), dx.end());
    for (double& v : out.xi_x) v *= 2.0;
    out.xi_y = vec_minus(truth.mu_y, truth.z);
    for (double& v : out.xi_y) v *= 2.0;
    // the xi terms use the matching class precision (Omega_X* for xi_X, Omega_Y* for xi_Y)
    out.v2 = 2.0 * trace_product_squared(out.phi_x, truth.sigma_x.sym()) +
             2.0 * trace_product_squared(out.phi_y, truth.sigma_y.sym()) +
             quad_form(omega_x.sym(), out.xi_x, out.xi_x) + quad_form(omega_y.sym(), out.xi_y, out.xi_y);
    return out;
}

SeparationBound separation_bound_check(const DaTruth& truth) {
    const auto parts = lda_variance(truth);
    const SpdMatrix omega = spd_inverse(truth.sigma_x);
    const auto eig = eig_sym(omega.sym());
    const double lam_min = eig.values.back();
    const double sep = norm_sq(vec_minus(truth.mu_x, truth.mu_y));
    SeparationBound out;
    out.v2 = parts.v2;
    out.bound = 2.0 * lam_min * sep;
    out.holds = out.v2 >= out.bound - 1e-10;
    return out;
}

double da_log_likelihood(std::span<const double> mu, const SpdMatrix& omega, const Dataset& data) {
    return log_likelihood(omega, shifted_covariance(data, mu), data.n);
}

namespace {

struct ClassSummary {
    int n = 0;
    int p = 0;
    std::vector<double> xbar;
    SymMatrix centered_cov;  // Sigma_tilde(mu) = centered_cov + (xbar-mu)(xbar-mu)^T
};

ClassSummary summarize(const Dataset& data) {
    ClassSummary s;
    s.n = data.n;
    s.p = data.p;
    s.xbar = column_mean(data);
    s.centered_cov = sample_covariance(data, /*centered=*/true);
    return s;
}

SymMatrix sigma_tilde(const ClassSummary& cd, std::span<const double> mu) {
    return cd.centered_cov.plus(outer(vec_minus(cd.xbar, mu)));
}

// Exact full conditional of the mean under the N(0, I) prior:
// mu | Omega, data ~ N((n Omega + I)^{-1} n Omega xbar, (n Omega + I)^{-1}).
std::vector<double> draw_mean_conditional(const ClassSummary& cd, const SpdMatrix& omega,
                                          RngStream& rng) {
    const int p = cd.p;
    const SpdMatrix a(omega.sym().scaled(static_cast<double>(cd.n)).plus(SymMatrix::identity(p)));
    const SpdMatrix cov = spd_inverse(a);
    std::vector<double> rhs(p, 0.0);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) rhs[i] += cd.n * omega(i, j) * cd.xbar[j];
    std::vector<double> mean(p, 0.0);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) mean[i] += cov(i, j) * rhs[j];
    const auto l = cholesky(cov);
    std::vector<double> zdraw(p);
    for (int j = 0; j < p; ++j) zdraw[j] = rng.normal();
    for (int j = p - 1; j >= 0; --j) {
        double s = mean[j];
        for (int k = 0; k <= j; ++k) s += l[static_cast<std::size_t>(j) * p + k] * zdraw[k];
        mean[j] = s;
    }
    return mean;
}

// Precision-block log target: (df/2) log det Omega - (n/2) tr(Omega S)
// - ||Omega||_F^2 / 2 on the constrained-Gaussian support.
double omega_block_log_target(const SymMatrix& omega, const SymMatrix& s, double df, double n,
                              double lambda_cap) {
    const auto eig = eig_sym(omega);
    const double lam_max = eig.values.front();
    const double lam_min = eig.values.back();
    if (!(lam_min > 0.0)) return -std::numeric_limits<double>::infinity();
    if (!(lam_max < 2.0 * lambda_cap)) return -std::numeric_limits<double>::infinity();
    if (1.0 / lam_min > 2.0 * lambda_cap) return -std::numeric_limits<double>::infinity();
    double logdet = 0.0;
    for (double v : eig.values) logdet += std::log(v);
    const double f = omega.frobenius();
    return 0.5 * df * logdet - 0.5 * n * trace_product(omega, s) - 0.5 * f * f;
}

struct OmegaBlock {
    SymMatrix state;
    double log_c;
    double base_sd;
    int accepted = 0;
    int proposals = 0;
};

void omega_block_step(OmegaBlock& blk, const SymMatrix& s, double df, double n, double lambda_cap,
                      bool adapting, int adapt_step, RngStream& rng) {
    const int p = blk.state.dim();
    const double sd = std::exp(blk.log_c) * blk.base_sd;
    std::vector<double> a = blk.state.data();
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
            const double e = sd * rng.normal();
            a[static_cast<std::size_t>(i) * p + j] += e;
            if (i != j) a[static_cast<std::size_t>(j) * p + i] += e;
        }
    SymMatrix prop(p, std::move(a));
    const double lt_state = omega_block_log_target(blk.state, s, df, n, lambda_cap);
    const double lt_prop = omega_block_log_target(prop, s, df, n, lambda_cap);
    const double u = rng.uniform();
    double alpha = 0.0;
    if (std::isfinite(lt_prop)) {
        alpha = std::min(1.0, std::exp(std::min(0.0, lt_prop - lt_state)));
        if (std::log(std::max(u, 1e-300)) < lt_prop - lt_state) {
            blk.state = std::move(prop);
            ++blk.accepted;
        }
    }
    ++blk.proposals;
    if (adapting) blk.log_c += std::pow(static_cast<double>(adapt_step), -0.6) * (alpha - 0.3);
}

}  // namespace

DaDraws da_posterior_draws(const DaDataset& data, double lambda_cap, DaMode mode,
                           const McmcConfig& config, RngStream& rng) {
    const int n = data.x.n;
    const int p = data.x.p;
    const ClassSummary cx = summarize(data.x);
    const ClassSummary cy = summarize(data.y);

    SpdMatrix init_x = [&] {
        try {
            const SymMatrix pooled = mode == DaMode::lda
                                         ? cx.centered_cov.plus(cy.centered_cov).scaled(0.5)
                                         : cx.centered_cov;
            return project_into_support(
                spd_inverse(SpdMatrix(pooled.plus(SymMatrix::identity(p).scaled(1.0 / n)))), lambda_cap);
        } catch (const NotPositiveDefinite&) {
            throw SingularSample("da_posterior_draws: singular initialization covariance");
        }
    }();
    SpdMatrix init_y = [&] {
        if (mode == DaMode::lda) return init_x;
        try {
            return project_into_support(
                spd_inverse(SpdMatrix(cy.centered_cov.plus(SymMatrix::identity(p).scaled(1.0 / n)))),
                lambda_cap);
        } catch (const NotPositiveDefinite&) {
            throw SingularSample("da_posterior_draws: singular initialization covariance");
        }
    }();

    std::vector<double> mu_x = cx.xbar;
    std::vector<double> mu_y = cy.xbar;
    const double base_sd = 1.0 / std::sqrt(static_cast<double>(n) * p);
    OmegaBlock bx{init_x.sym(), std::log(config.step_scale), base_sd};
    OmegaBlock by{init_y.sym(), std::log(config.step_scale), base_sd};

    const int burn_in = config.effective_burn_in();
    const int thinning = std::max(1, config.thinning);
    const int total = config.steps;
    if (total - burn_in < 1) throw InvalidArgument("mcmc config: no steps remain after burn-in");

    DaDraws out;
    out.meta.method = "mcmc";
    out.meta.burn_in = burn_in;
    out.meta.thinning = thinning;
    out.meta.seed = rng.seed();
    out.meta.stream_id = rng.stream_id();

    for (int s = 0; s < total; ++s) {
        const bool adapting = config.adapt && s < burn_in;
        const int adapt_step = s + 1;
        if (s == burn_in) {
            // report acceptance over the recorded phase only
            bx.accepted = bx.proposals = 0;
            by.accepted = by.proposals = 0;
        }
        if (mode == DaMode::qda) {
            mu_x = draw_mean_conditional(cx, SpdMatrix(bx.state), rng);
            mu_y = draw_mean_conditional(cy, SpdMatrix(by.state), rng);
            omega_block_step(bx, sigma_tilde(cx, mu_x), n, n, lambda_cap, adapting, adapt_step, rng);
            omega_block_step(by, sigma_tilde(cy, mu_y), n, n, lambda_cap, adapting, adapt_step, rng);
        } else {
            const SpdMatrix shared(bx.state);
            mu_x = draw_mean_conditional(cx, shared, rng);
            mu_y = draw_mean_conditional(cy, shared, rng);
            const SymMatrix s_total = sigma_tilde(cx, mu_x).plus(sigma_tilde(cy, mu_y)).scaled(0.5);
            // joint likelihood in Omega: n log det Omega - (n/2) tr(Omega (S_X + S_Y))
            omega_block_step(bx, s_total, 2.0 * n, 2.0 * n, lambda_cap, adapting, adapt_step, rng);
        }
        if (s >= burn_in && (s - burn_in) % thinning == 0) {
            DaDraw d;
            d.mu_x = mu_x;
            d.mu_y = mu_y;
            d.omega_x = SpdMatrix(bx.state);
            d.omega_y = mode == DaMode::lda ? d.omega_x : SpdMatrix(by.state);
            out.draws.push_back(std::move(d));
        }
    }

    double rate = 0.0;
    if (mode == DaMode::qda) {
        rate = 0.5 * (static_cast<double>(bx.accepted) / bx.proposals +
                      static_cast<double>(by.accepted) / by.proposals);
    } else {
        rate = static_cast<double>(bx.accepted) / bx.proposals;
    }
    out.meta.acceptance_rate = rate;
    return out;
}

}  // namespace bvm
