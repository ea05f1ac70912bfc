#include "bvm/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bvm {

SymMatrix::SymMatrix(int dim) : dim_(dim), a_(static_cast<std::size_t>(dim) * dim, 0.0) {
    if (dim < 1) throw InvalidArgument("matrix dimension must be >= 1");
}

SymMatrix::SymMatrix(int dim, std::vector<double> entries) : dim_(dim), a_(std::move(entries)) {
    if (dim < 1) throw InvalidArgument("matrix dimension must be >= 1");
    if (a_.size() != static_cast<std::size_t>(dim) * dim)
        throw DimensionMismatch("entry count does not match dim*dim");
    for (double x : a_)
        if (!std::isfinite(x)) throw InvalidArgument("matrix entries must be finite");
    for (int i = 0; i < dim_; ++i)
        for (int j = i + 1; j < dim_; ++j) {
            const double s = 0.5 * (a_[static_cast<std::size_t>(i) * dim_ + j] +
                                    a_[static_cast<std::size_t>(j) * dim_ + i]);
            a_[static_cast<std::size_t>(i) * dim_ + j] = s;
            a_[static_cast<std::size_t>(j) * dim_ + i] = s;
        }
}

SymMatrix SymMatrix::identity(int dim) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.a_[static_cast<std::size_t>(i) * dim + i] = 1.0;
    return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
    SymMatrix m(static_cast<int>(d.size()));
    for (int i = 0; i < m.dim_; ++i) m.a_[static_cast<std::size_t>(i) * m.dim_ + i] = d[i];
    return m;
}

SymMatrix SymMatrix::plus(const SymMatrix& other) const {
    if (other.dim_ != dim_) throw DimensionMismatch("SymMatrix::plus dimension mismatch");
    SymMatrix out(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = a_[k] + other.a_[k];
    return out;
}

SymMatrix SymMatrix::minus(const SymMatrix& other) const {
    if (other.dim_ != dim_) throw DimensionMismatch("SymMatrix::minus dimension mismatch");
    SymMatrix out(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = a_[k] - other.a_[k];
    return out;
}

SymMatrix SymMatrix::scaled(double c) const {
    SymMatrix out(dim_);
    for (std::size_t k = 0; k < a_.size(); ++k) out.a_[k] = c * a_[k];
    return out;
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
}

double SymMatrix::frobenius() const {
    double s = 0.0;
    for (double x : a_) s += x * x;
    return std::sqrt(s);
}

double SymMatrix::max_abs() const {
    double m = 0.0;
    for (double x : a_) m = std::max(m, std::fabs(x));
    return m;
}

SpdMatrix::SpdMatrix(SymMatrix m) : m_(std::move(m)) {
    std::vector<double> l;
    if (!try_cholesky(m_, l)) throw NotPositiveDefinite("matrix is not positive definite");
}

SpdMatrix SpdMatrix::identity(int dim) { return SpdMatrix(SymMatrix::identity(dim)); }

SpdMatrix SpdMatrix::diagonal(std::span<const double> d) { return SpdMatrix(SymMatrix::diagonal(d)); }

std::vector<double> EigenDecomposition::column(int m) const {
    std::vector<double> c(dim);
    for (int i = 0; i < dim; ++i) c[i] = vector_at(i, m);
    return c;
}

Dataset::Dataset(int n_, int p_, std::vector<double> rows_) : n(n_), p(p_), rows(std::move(rows_)) {
    if (n < 1 || p < 1) throw EmptyData("dataset requires n >= 1 and p >= 1");
    if (rows.size() != static_cast<std::size_t>(n) * p)
        throw DimensionMismatch("dataset rows do not match n*p");
    for (double x : rows)
        if (!std::isfinite(x)) throw NonFiniteLikelihood("dataset contains non-finite values");
}

bool try_cholesky(const SymMatrix& m, std::vector<double>& lower) {
    const int p = m.dim();
    lower.assign(static_cast<std::size_t>(p) * p, 0.0);
    for (int j = 0; j < p; ++j) {
        double d = m(j, j);
        for (int k = 0; k < j; ++k) d -= lower[static_cast<std::size_t>(j) * p + k] * lower[static_cast<std::size_t>(j) * p + k];
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        lower[static_cast<std::size_t>(j) * p + j] = ljj;
        for (int i = j + 1; i < p; ++i) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k)
                s -= lower[static_cast<std::size_t>(i) * p + k] * lower[static_cast<std::size_t>(j) * p + k];
            lower[static_cast<std::size_t>(i) * p + j] = s / ljj;
        }
    }
    return true;
}

std::vector<double> cholesky(const SpdMatrix& m) {
    std::vector<double> l;
    if (!try_cholesky(m.sym(), l)) throw NotPositiveDefinite("cholesky: pivot <= 0");
    return l;
}

EigenDecomposition eig_sym(const SymMatrix& m) {
    const int p = m.dim();
    std::vector<double> a = m.data();
    std::vector<double> v(static_cast<std::size_t>(p) * p, 0.0);
    for (int i = 0; i < p; ++i) v[static_cast<std::size_t>(i) * p + i] = 1.0;

    const double norm_a = m.frobenius();
    const double threshold = 1e-13 * norm_a;
    auto off_mass = [&]() {
        double s = 0.0;
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j) s += 2.0 * a[static_cast<std::size_t>(i) * p + j] * a[static_cast<std::size_t>(i) * p + j];
        return std::sqrt(s);
    };

    const int max_sweeps = 100;
    int sweep = 0;
    if (p > 1) {
        while (off_mass() >= threshold) {
            if (++sweep > max_sweeps) throw NoConvergence("jacobi: sweep cap exhausted");
            for (int q = 0; q < p; ++q) {
                for (int r = q + 1; r < p; ++r) {
                    const double apq = a[static_cast<std::size_t>(q) * p + r];
                    if (apq == 0.0) continue;
                    const double app = a[static_cast<std::size_t>(q) * p + q];
                    const double aqq = a[static_cast<std::size_t>(r) * p + r];
                    const double theta = (aqq - app) / (2.0 * apq);
                    const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    const double tau = s / (1.0 + c);
                    a[static_cast<std::size_t>(q) * p + r] = 0.0;
                    a[static_cast<std::size_t>(r) * p + q] = 0.0;
                    a[static_cast<std::size_t>(q) * p + q] = app - t * apq;
                    a[static_cast<std::size_t>(r) * p + r] = aqq + t * apq;
                    for (int k = 0; k < p; ++k) {
                        const double vkq = v[static_cast<std::size_t>(k) * p + q];
                        const double vkr = v[static_cast<std::size_t>(k) * p + r];
                        v[static_cast<std::size_t>(k) * p + q] = vkq - s * (vkr + tau * vkq);
                        v[static_cast<std::size_t>(k) * p + r] = vkr + s * (vkq - tau * vkr);
                        if (k == q || k == r) continue;
                        const double akq = a[static_cast<std::size_t>(k) * p + q];
                        const double akr = a[static_cast<std::size_t>(k) * p + r];
                        a[static_cast<std::size_t>(k) * p + q] = akq - s * (akr + tau * akq);
                        a[static_cast<std::size_t>(q) * p + k] = a[static_cast<std::size_t>(k) * p + q];
                        a[static_cast<std::size_t>(k) * p + r] = akr + s * (akq - tau * akr);
                        a[static_cast<std::size_t>(r) * p + k] = a[static_cast<std::size_t>(k) * p + r];
                    }
                }
            }
        }
    }

    // Sort nonincreasing; exact ties keep index order.
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        return a[static_cast<std::size_t>(i) * p + i] > a[static_cast<std::size_t>(j) * p + j];
    });

    EigenDecomposition out;
    out.dim = p;
    out.values.resize(p);
    out.vectors.assign(static_cast<std::size_t>(p) * p, 0.0);
    for (int m2 = 0; m2 < p; ++m2) {
        const int src = order[m2];
        out.values[m2] = a[static_cast<std::size_t>(src) * p + src];
        // sign convention: largest-magnitude coordinate positive
        int arg = 0;
        double best = 0.0;
        for (int i = 0; i < p; ++i) {
            const double x = std::fabs(v[static_cast<std::size_t>(i) * p + src]);
            if (x > best) {
                best = x;
                arg = i;
            }
        }
        const double flip = v[static_cast<std::size_t>(arg) * p + src] < 0.0 ? -1.0 : 1.0;
        for (int i = 0; i < p; ++i)
            out.vectors[static_cast<std::size_t>(i) * p + m2] = flip * v[static_cast<std::size_t>(i) * p + src];
    }
    return out;
}

double log_det(const SpdMatrix& m) {
    const auto l = cholesky(m);
    const int p = m.dim();
    double s = 0.0;
    for (int i = 0; i < p; ++i) s += std::log(l[static_cast<std::size_t>(i) * p + i]);
    return 2.0 * s;
}

SpdMatrix spd_inverse(const SpdMatrix& m) {
    const int p = m.dim();
    const auto l = cholesky(m);
    // Solve L L^T X = I column by column.
    std::vector<double> x(static_cast<std::size_t>(p) * p, 0.0);
    std::vector<double> y(p);
    for (int c = 0; c < p; ++c) {
        for (int i = 0; i < p; ++i) {
            double s = (i == c) ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) s -= l[static_cast<std::size_t>(i) * p + k] * y[k];
            y[i] = s / l[static_cast<std::size_t>(i) * p + i];
        }
        for (int i = p - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = i + 1; k < p; ++k) s -= l[static_cast<std::size_t>(k) * p + i] * x[static_cast<std::size_t>(k) * p + c];
            x[static_cast<std::size_t>(i) * p + c] = s / l[static_cast<std::size_t>(i) * p + i];
        }
    }
    // SymMatrix construction symmetrizes the solve's round-off.
    return SpdMatrix(SymMatrix(p, std::move(x)));
}

MatrixNorms norms(const SymMatrix& m) {
    const auto eig = eig_sym(m);
    double spectral = 0.0;
    for (double v : eig.values) spectral = std::max(spectral, std::fabs(v));
    return {spectral, m.frobenius()};
}

SymMatrix sample_covariance(const Dataset& data, bool centered) {
    if (data.n < 1) throw EmptyData("sample_covariance: empty dataset");
    const int n = data.n, p = data.p;
    std::vector<double> mean(p, 0.0);
    if (centered) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) mean[j] += data(i, j);
        for (int j = 0; j < p; ++j) mean[j] /= n;
    }
    std::vector<double> s(static_cast<std::size_t>(p) * p, 0.0);
#pragma omp parallel for schedule(static) if (p >= 64)
    for (int j = 0; j < p; ++j) {
        for (int k = j; k < p; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += (data(i, j) - mean[j]) * (data(i, k) - mean[k]);
            s[static_cast<std::size_t>(j) * p + k] = acc / n;
            s[static_cast<std::size_t>(k) * p + j] = s[static_cast<std::size_t>(j) * p + k];
        }
    }
    return SymMatrix(p, std::move(s));
}

std::vector<double> mat_mul(std::span<const double> a, std::span<const double> b, int dim) {
    std::vector<double> c(static_cast<std::size_t>(dim) * dim, 0.0);
#pragma omp parallel for schedule(static) if (dim >= 64)
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
            const double aik = a[static_cast<std::size_t>(i) * dim + k];
            if (aik == 0.0) continue;
            for (int j = 0; j < dim; ++j)
                c[static_cast<std::size_t>(i) * dim + j] += aik * b[static_cast<std::size_t>(k) * dim + j];
        }
    return c;
}

double trace_product(const SymMatrix& a, const SymMatrix& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("trace_product dimension mismatch");
    double s = 0.0;
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
    return s;
}

double trace_product_squared(const SymMatrix& a, const SymMatrix& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("trace_product_squared dimension mismatch");
    const int p = a.dim();
    const auto ab = mat_mul(a.data(), b.data(), p);
    double s = 0.0;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) s += ab[static_cast<std::size_t>(i) * p + j] * ab[static_cast<std::size_t>(j) * p + i];
    return s;
}

double quad_form(const SymMatrix& a, std::span<const double> x, std::span<const double> y) {
    const int p = a.dim();
    if (static_cast<int>(x.size()) != p || static_cast<int>(y.size()) != p)
        throw DimensionMismatch("quad_form vector length mismatch");
    double s = 0.0;
    for (int i = 0; i < p; ++i) {
        double row = 0.0;
        for (int j = 0; j < p; ++j) row += a(i, j) * y[j];
        s += x[i] * row;
    }
    return s;
}

SymMatrix sym_sqrt(const SymMatrix& a) {
    const auto eig = eig_sym(a);
    const int p = a.dim();
    std::vector<double> out(static_cast<std::size_t>(p) * p, 0.0);
    for (int m = 0; m < p; ++m) {
        const double lam = std::max(eig.values[m], 0.0);
        const double r = std::sqrt(lam);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                out[static_cast<std::size_t>(i) * p + j] += r * eig.vector_at(i, m) * eig.vector_at(j, m);
    }
    return SymMatrix(p, std::move(out));
}

SymMatrix outer(std::span<const double> v) {
    const int p = static_cast<int>(v.size());
    std::vector<double> out(static_cast<std::size_t>(p) * p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) out[static_cast<std::size_t>(i) * p + j] = v[i] * v[j];
    return SymMatrix(p, std::move(out));
}

SymMatrix sym_outer(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DimensionMismatch("sym_outer length mismatch");
    const int p = static_cast<int>(v.size());
    std::vector<double> out(static_cast<std::size_t>(p) * p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            out[static_cast<std::size_t>(i) * p + j] = 0.5 * (u[i] * v[j] + v[i] * u[j]);
    return SymMatrix(p, std::move(out));
}

SymMatrix conjugate_by(const SymMatrix& a, std::span<const double> q, int dim) {
    if (a.dim() != dim) throw DimensionMismatch("conjugate_by dimension mismatch");
    const auto aq = mat_mul(a.data(), q, dim);
    std::vector<double> out(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k)
                s += q[static_cast<std::size_t>(k) * dim + i] * aq[static_cast<std::size_t>(k) * dim + j];
            out[static_cast<std::size_t>(i) * dim + j] = s;
        }
    return SymMatrix(dim, std::move(out));
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void save_matrix_csv(const SymMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    const int p = m.dim();
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

static std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open for reading: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw Error("non-numeric CSV cell in " + path.string());
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

SymMatrix load_sym_csv(const std::filesystem::path& path) {
    const auto rows = read_csv_rows(path);
    const int p = static_cast<int>(rows.size());
    if (p == 0) throw EmptyData("empty matrix CSV: " + path.string());
    std::vector<double> a;
    a.reserve(static_cast<std::size_t>(p) * p);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != p) throw DimensionMismatch("ragged matrix CSV: " + path.string());
        a.insert(a.end(), r.begin(), r.end());
    }
    return SymMatrix(p, std::move(a));
}

nlohmann::json matrix_to_json(const SymMatrix& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (int i = 0; i < m.dim(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
        entries.push_back(std::move(row));
    }
    return nlohmann::json{{"dim", m.dim()}, {"entries", std::move(entries)}};
}

SymMatrix matrix_from_json(const nlohmann::json& j) {
    if (!j.contains("dim") || !j.contains("entries")) throw Error("matrix JSON requires {dim, entries}");
    const int p = j.at("dim").get<int>();
    const auto& entries = j.at("entries");
    if (static_cast<int>(entries.size()) != p) throw DimensionMismatch("matrix JSON entries rows != dim");
    std::vector<double> a;
    a.reserve(static_cast<std::size_t>(p) * p);
    for (const auto& row : entries) {
        if (static_cast<int>(row.size()) != p) throw DimensionMismatch("matrix JSON entries cols != dim");
        for (const auto& x : row) a.push_back(x.get<double>());
    }
    return SymMatrix(p, std::move(a));
}

void save_dataset_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    for (int i = 0; i < d.n; ++i) {
        for (int j = 0; j < d.p; ++j) {
            if (j) out << ',';
            out << format_double(d(i, j));
        }
        out << '\n';
    }
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
    const auto rows = read_csv_rows(path);
    if (rows.empty()) throw EmptyData("empty dataset CSV: " + path.string());
    const int p = static_cast<int>(rows.front().size());
    std::vector<double> flat;
    flat.reserve(rows.size() * p);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != p) throw DimensionMismatch("ragged dataset CSV: " + path.string());
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Dataset(static_cast<int>(rows.size()), p, std::move(flat));
}

}  // namespace bvm
