#include "bvm/kato.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "bvm/replicate.hpp"
#include "bvm/samplers.hpp"

namespace bvm {

KatoContext::KatoContext(std::vector<double> values_, SymMatrix delta_, int m_)
    : values(std::move(values_)), delta(std::move(delta_)), m(m_) {
    const int p = dim();
    if (p < 1) throw InvalidArgument("KatoContext: empty spectrum");
    if (delta.dim() != p) throw DimensionMismatch("KatoContext: delta dim != spectrum length");
    if (m < 0 || m >= p) throw InvalidArgument("KatoContext: m out of range");
    for (int j = 0; j + 1 < p; ++j)
        if (values[j] < values[j + 1]) throw InvalidArgument("KatoContext: values must be nonincreasing");
}

double KatoContext::eigengap() const {
    const int p = dim();
    if (p == 1) return std::numeric_limits<double>::infinity();
    if (m == 0) return std::fabs(values[0] - values[1]);
    if (m == p - 1) return std::fabs(values[p - 2] - values[p - 1]);
    return std::min(std::fabs(values[m] - values[m - 1]), std::fabs(values[m] - values[m + 1]));
}

double kato_first_order(const KatoContext& ctx) { return ctx.delta(ctx.m, ctx.m); }

namespace {

// Diagonal of R^v as a vector: (a_m - a_j)^{-v} off m for v >= 1; -1 at m for v = 0.
std::vector<double> resolvent_diag(const KatoContext& ctx, int v) {
    const int p = ctx.dim();
    std::vector<double> d(p, 0.0);
    if (v == 0) {
        d[ctx.m] = -1.0;
        return d;
    }
    for (int j = 0; j < p; ++j) {
        if (j == ctx.m) continue;
        d[j] = std::pow(ctx.values[ctx.m] - ctx.values[j], -v);
    }
    return d;
}

// tr(Delta diag(d_1) Delta diag(d_2) ... Delta diag(d_k))
double alternating_trace(const SymMatrix& delta, const std::vector<std::vector<double>>& diags) {
    const int p = delta.dim();
    // running = Delta diag(d_1) ... accumulated left to right
    std::vector<double> running(static_cast<std::size_t>(p) * p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            running[static_cast<std::size_t>(i) * p + j] = delta(i, j) * diags[0][j];
    std::vector<double> next(static_cast<std::size_t>(p) * p);
    for (std::size_t f = 1; f < diags.size(); ++f) {
        const auto& d = diags[f];
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) {
                double s = 0.0;
                for (int k = 0; k < p; ++k)
                    s += running[static_cast<std::size_t>(i) * p + k] * delta(k, j);
                next[static_cast<std::size_t>(i) * p + j] = s * d[j];
            }
        std::swap(running, next);
    }
    double tr = 0.0;
    for (int i = 0; i < p; ++i) tr += running[static_cast<std::size_t>(i) * p + i];
    return tr;
}

void enumerate_compositions(int slots, int total, std::vector<int>& current,
                            const std::function<void(const std::vector<int>&)>& emit) {
    if (slots == 1) {
        current.push_back(total);
        emit(current);
        current.pop_back();
        return;
    }
    for (int v = 0; v <= total; ++v) {
        current.push_back(v);
        enumerate_compositions(slots - 1, total - v, current, emit);
        current.pop_back();
    }
}

}  // namespace

long long kato_composition_count(int k) {
    // C(2(k-1), k-1)
    long long c = 1;
    for (int i = 1; i <= k - 1; ++i) c = c * (k - 1 + i) / i;
    return c;
}

double kato_term(const KatoContext& ctx, int k) {
    if (k < 2) throw InvalidArgument("kato_term: k must be >= 2");
    if (k > kKatoMaxOrder) throw OrderTooHigh("kato_term: order above cap");
    if (!(ctx.eigengap() > 0.0)) throw ZeroEigengap("kato_term: tied eigenvalue at m");

    // Cache the k+1 possible resolvent diagonals (exponents 0..k-1).
    std::vector<std::vector<double>> cache(k);
    for (int v = 0; v < k; ++v) cache[v] = resolvent_diag(ctx, v);

    double sum = 0.0;
    std::vector<int> current;
    std::vector<std::vector<double>> diags(k);
    enumerate_compositions(k, k - 1, current, [&](const std::vector<int>& comp) {
        for (int f = 0; f < k; ++f) diags[f] = cache[comp[f]];
        sum += alternating_trace(ctx.delta, diags);
    });
    return -sum / k;
}

KatoPartialSum kato_partial_sum(const KatoContext& ctx, int order) {
    if (order < 1) throw InvalidArgument("kato_partial_sum: order must be >= 1");
    if (order > kKatoMaxOrder) throw OrderTooHigh("kato_partial_sum: order above cap");
    if (!(ctx.eigengap() > 0.0)) throw ZeroEigengap("kato_partial_sum: tied eigenvalue at m");

    KatoPartialSum out{};
    out.sum = kato_first_order(ctx);
    for (int k = 2; k <= order; ++k) out.sum += kato_term(ctx, k);

    const int p = ctx.dim();
    const SymMatrix perturbed = SymMatrix::diagonal(ctx.values).plus(ctx.delta);
    out.exact_shift = eig_sym(perturbed).values[ctx.m] - ctx.values[ctx.m];

    const double delta_norm = norms(ctx.delta).spectral;
    double resolvent_norm = 0.0;
    for (int j = 0; j < p; ++j) {
        if (j == ctx.m) continue;
        resolvent_norm = std::max(resolvent_norm, 1.0 / std::fabs(ctx.values[ctx.m] - ctx.values[j]));
    }
    out.summability = 3.0 * std::numbers::e * delta_norm * resolvent_norm;
    return out;
}

BiasProbeResult second_order_bias_probe(const SpdMatrix& sigma_star, int n, int reps, RngStream rng,
                                        int threads) {
    const int p = sigma_star.dim();
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (sigma_star(i, j) != 0.0)
                throw InvalidArgument("second_order_bias_probe: sigma_star must be diagonal");

    const auto truth_eig = eig_sym(sigma_star.sym());
    if (!(truth_eig.values[0] - truth_eig.values[1] > 0.0))
        throw ZeroEigengap("second_order_bias_probe: top eigengap must be positive");
    const double gap12 = truth_eig.values[0] - truth_eig.values[1];
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    struct RepResult {
        double stat;
        double bound;
    };
    const auto results = run_replications<RepResult>(reps, rng, threads, [&](int, RngStream stream) {
        const Dataset data = draw_mvn(sigma_star, n, stream);
        const SymMatrix sigma_hat = sample_covariance(data, /*centered=*/false);
        const SymMatrix diff = sigma_star.sym().minus(sigma_hat);
        const SymMatrix delta = conjugate_by(diff, truth_eig.vectors, p);
        KatoContext ctx(truth_eig.values, delta, 0);
        const double stat = sqrt_n * kato_term(ctx, 2);
        double offsum = 0.0;
        for (int j = 1; j < p; ++j) offsum += delta(0, j) * delta(0, j);
        return RepResult{stat, sqrt_n / gap12 * offsum};
    });

    BiasProbeResult out{};
    out.per_rep.reserve(reps);
    for (const auto& r : results) {
        out.mean_sqrt_n_second_order += r.stat;
        out.lower_bound += r.bound;
        out.per_rep.push_back(r.stat);
    }
    out.mean_sqrt_n_second_order /= reps;
    out.lower_bound /= reps;
    return out;
}

}  // namespace bvm
