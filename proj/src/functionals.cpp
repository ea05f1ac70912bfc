#include "bvm/functionals.hpp"

#include <cmath>
#include <numbers>

namespace bvm {

namespace {

void check_index(int idx, int p, const char* name) {
    if (idx < 1 || idx > p) throw InvalidArgument(std::string(name) + " index out of [1, p]");
}

void check_vector(std::span<const double> v, int p, const char* name) {
    if (static_cast<int>(v.size()) != p) throw DimensionMismatch(std::string(name) + " length != p");
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (!(norm > 0.0)) throw InvalidArgument(std::string(name) + " must be nonzero");
}

constexpr double kEigengapFloor = 1e-8;  // relative to ||Sigma*||

}  // namespace

Target target_of(const FunctionalSpec& f) {
    return std::visit(
        [](const auto& v) -> Target {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, LogDetFunctional> || std::is_same_v<T, EntropyFunctional>)
                return Target::covariance;
            else
                return v.target;
        },
        f);
}

std::string functional_kind(const FunctionalSpec& f) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, EntryFunctional>) return "entry";
            if constexpr (std::is_same_v<T, QuadraticFunctional>) return "quadratic";
            if constexpr (std::is_same_v<T, BilinearFunctional>) return "bilinear";
            if constexpr (std::is_same_v<T, LogDetFunctional>) return "logdet";
            if constexpr (std::is_same_v<T, EntropyFunctional>) return "entropy";
            return "eigenvalue";
        },
        f);
}

TruthSpec::TruthSpec(SpdMatrix sigma) : sigma_star(std::move(sigma)), omega_star(spd_inverse(sigma_star)) {}

TruthSpec::TruthSpec(SpdMatrix sigma, SpdMatrix omega)
    : sigma_star(std::move(sigma)), omega_star(std::move(omega)) {
    const int p = sigma_star.dim();
    if (omega_star.dim() != p) throw DimensionMismatch("TruthSpec: sigma/omega dims differ");
    const auto prod = mat_mul(sigma_star.sym().data(), omega_star.sym().data(), p);
    double err = 0.0;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            const double target = i == j ? 1.0 : 0.0;
            const double d = prod[static_cast<std::size_t>(i) * p + j] - target;
            err += d * d;
        }
    if (std::sqrt(err) > 1e-9 * p) throw InvalidArgument("TruthSpec: omega is not the inverse of sigma");
}

double evaluate(const FunctionalSpec& f, const SpdMatrix& sigma) {
    const int p = sigma.dim();
    const bool precision = target_of(f) == Target::precision;
    const SpdMatrix& m = precision ? spd_inverse(sigma) : sigma;
    // note: `m` binding to a temporary is lifetime-extended

    return std::visit(
        [&](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, EntryFunctional>) {
                check_index(v.i, p, "entry i");
                check_index(v.j, p, "entry j");
                return m(v.i - 1, v.j - 1);
            } else if constexpr (std::is_same_v<T, QuadraticFunctional>) {
                check_vector(v.v, p, "quadratic v");
                return quad_form(m.sym(), v.v, v.v);
            } else if constexpr (std::is_same_v<T, BilinearFunctional>) {
                check_vector(v.u, p, "bilinear u");
                check_vector(v.v, p, "bilinear v");
                return quad_form(m.sym(), v.u, v.v);
            } else if constexpr (std::is_same_v<T, LogDetFunctional>) {
                return log_det(m);
            } else if constexpr (std::is_same_v<T, EntropyFunctional>) {
                return 0.5 * p + 0.5 * p * std::log(2.0 * std::numbers::pi) + 0.5 * log_det(m);
            } else {
                check_index(v.m, p, "eigenvalue m");
                return eig_sym(m.sym()).values[v.m - 1];
            }
        },
        f);
}

double plug_in_center(const FunctionalSpec& f, const Dataset& data) {
    const SymMatrix sigma_hat = sample_covariance(data, /*centered=*/false);
    try {
        return evaluate(f, SpdMatrix(sigma_hat));
    } catch (const NotPositiveDefinite&) {
        if (target_of(f) == Target::precision)
            throw SingularSample("plug_in_center: sample covariance is singular (n too small for p)");
        throw;
    }
}

PerturbationDirection linearization(const FunctionalSpec& f, const TruthSpec& truth) {
    const int p = truth.dim();
    const bool precision = target_of(f) == Target::precision;

    SymMatrix phi(p);
    int rank_bound = 0;
    if (const auto* e = std::get_if<EntryFunctional>(&f)) {
        check_index(e->i, p, "entry i");
        check_index(e->j, p, "entry j");
        std::vector<double> a(static_cast<std::size_t>(p) * p, 0.0);
        a[static_cast<std::size_t>(e->i - 1) * p + (e->j - 1)] += 0.5;
        a[static_cast<std::size_t>(e->j - 1) * p + (e->i - 1)] += 0.5;
        phi = SymMatrix(p, std::move(a));
        rank_bound = 2;
    } else if (const auto* q = std::get_if<QuadraticFunctional>(&f)) {
        check_vector(q->v, p, "quadratic v");
        phi = outer(q->v);
        rank_bound = 1;
    } else if (const auto* bl = std::get_if<BilinearFunctional>(&f)) {
        check_vector(bl->u, p, "bilinear u");
        check_vector(bl->v, p, "bilinear v");
        phi = sym_outer(bl->u, bl->v);
        rank_bound = 2;
    } else if (std::holds_alternative<LogDetFunctional>(f)) {
        phi = truth.omega_star.sym();
        rank_bound = p;
    } else if (std::holds_alternative<EntropyFunctional>(f)) {
        phi = truth.omega_star.sym().scaled(0.5);
        rank_bound = p;
    } else {
        const auto& ev = std::get<EigenvalueFunctional>(f);
        check_index(ev.m, p, "eigenvalue m");
        const SpdMatrix& base = precision ? truth.omega_star : truth.sigma_star;
        const double gap = eigengap(truth, ev.m, ev.target);
        const double scale = norms(base.sym()).spectral;
        if (!(gap > kEigengapFloor * scale))
            throw ZeroEigengap("eigenvalue functional: eigengap too small at the truth");
        const auto eig = eig_sym(base.sym());
        phi = outer(eig.column(ev.m - 1));
        rank_bound = 1;
    }

    return precision ? PerturbationDirection::precision(std::move(phi), truth.omega_star, rank_bound)
                     : PerturbationDirection::covariance(std::move(phi), truth.sigma_star, rank_bound);
}

double asymptotic_variance(const FunctionalSpec& f, const TruthSpec& truth) {
    const int p = truth.dim();
    const SymMatrix& s = truth.sigma_star.sym();
    const SymMatrix& o = truth.omega_star.sym();

    double closed = 0.0;
    if (const auto* e = std::get_if<EntryFunctional>(&f)) {
        const SymMatrix& m = e->target == Target::precision ? o : s;
        const int i = e->i - 1, j = e->j - 1;
        closed = m(i, i) * m(j, j) + m(i, j) * m(i, j);
    } else if (const auto* q = std::get_if<QuadraticFunctional>(&f)) {
        const SymMatrix& m = q->target == Target::precision ? o : s;
        const double vmv = quad_form(m, q->v, q->v);
        closed = 2.0 * vmv * vmv;
    } else if (const auto* bl = std::get_if<BilinearFunctional>(&f)) {
        const SymMatrix& m = bl->target == Target::precision ? o : s;
        const double umv = quad_form(m, bl->u, bl->v);
        closed = umv * umv + quad_form(m, bl->u, bl->u) * quad_form(m, bl->v, bl->v);
    } else if (std::holds_alternative<LogDetFunctional>(f)) {
        closed = 2.0 * p;
    } else if (std::holds_alternative<EntropyFunctional>(f)) {
        closed = 0.5 * p;
    } else {
        const auto& ev = std::get<EigenvalueFunctional>(f);
        const SymMatrix& m = ev.target == Target::precision ? o : s;
        const double lam = eig_sym(m).values[ev.m - 1];
        closed = 2.0 * lam * lam;
    }

    const auto dir = linearization(f, truth);
    const double generic = 2.0 * dir.normalizer * dir.normalizer;
    if (std::fabs(closed - generic) > 1e-10 * std::max(1.0, std::fabs(closed)))
        throw NumericalError("asymptotic_variance: closed form and generic form disagree");
    return closed;
}

double eigengap(const TruthSpec& truth, int m, Target target) {
    const int p = truth.dim();
    if (p < 2) throw InvalidArgument("eigengap requires p >= 2");
    check_index(m, p, "eigengap m");
    const SpdMatrix& base = target == Target::precision ? truth.omega_star : truth.sigma_star;
    const auto values = eig_sym(base.sym()).values;
    const int idx = m - 1;
    if (idx == 0) return std::fabs(values[0] - values[1]);
    if (idx == p - 1) return std::fabs(values[p - 2] - values[p - 1]);
    return std::min(std::fabs(values[idx] - values[idx - 1]), std::fabs(values[idx] - values[idx + 1]));
}

std::vector<double> standardize(std::span<const double> values, double center, double variance, int n) {
    if (!(variance > 0.0)) throw NonPositiveVariance("standardize: variance must be > 0");
    const double scale = std::sqrt(static_cast<double>(n)) / std::sqrt(variance);
    std::vector<double> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) out[k] = scale * (values[k] - center);
    return out;
}

}  // namespace bvm
