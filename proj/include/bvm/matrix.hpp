#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bvm/errors.hpp"

#include <nlohmann/json_fwd.hpp>

namespace bvm {

// Dense symmetric p x p matrix, row-major.  Inputs are symmetrized
// ((A + A^T)/2) on construction so round-off accumulated upstream (MCMC
// proposals in particular) cannot poison downstream factorizations.
// Immutable after construction.
class SymMatrix {
  public:
    SymMatrix() = default;
    explicit SymMatrix(int dim);  // zero matrix
    SymMatrix(int dim, std::vector<double> entries);

    static SymMatrix identity(int dim);
    static SymMatrix diagonal(std::span<const double> d);

    int dim() const { return dim_; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * dim_ + j]; }
    const std::vector<double>& data() const { return a_; }

    SymMatrix plus(const SymMatrix& other) const;
    SymMatrix minus(const SymMatrix& other) const;
    SymMatrix scaled(double c) const;
    double trace() const;
    double frobenius() const;
    double max_abs() const;

  private:
    int dim_ = 0;
    std::vector<double> a_;
};

// Symmetric positive definite matrix; construction verifies that a Cholesky
// factorization succeeds (all pivots > 0) and throws NotPositiveDefinite
// otherwise.
class SpdMatrix {
  public:
    SpdMatrix() = default;
    explicit SpdMatrix(SymMatrix m);
    SpdMatrix(int dim, std::vector<double> entries) : SpdMatrix(SymMatrix(dim, std::move(entries))) {}

    static SpdMatrix identity(int dim);
    static SpdMatrix diagonal(std::span<const double> d);

    const SymMatrix& sym() const { return m_; }
    int dim() const { return m_.dim(); }
    double operator()(int i, int j) const { return m_(i, j); }

  private:
    SymMatrix m_;
};

// Columns of `vectors` are eigenvectors, ordered to match `values`
// (nonincreasing).  Exactly-tied eigenvalues keep their index order.  Each
// column is flipped so its largest-magnitude coordinate is positive.
struct EigenDecomposition {
    int dim = 0;
    std::vector<double> values;
    std::vector<double> vectors;  // row-major p x p

    double vector_at(int i, int m) const { return vectors[static_cast<std::size_t>(i) * dim + m]; }
    std::vector<double> column(int m) const;
};

// n samples of dimension p, row-major.
struct Dataset {
    Dataset() = default;
    Dataset(int n, int p, std::vector<double> rows);

    int n = 0;
    int p = 0;
    std::vector<double> rows;

    double operator()(int i, int j) const { return rows[static_cast<std::size_t>(i) * p + j]; }
};

// Lower-triangular factor L with L L^T = m, stored row-major (upper part zero).
std::vector<double> cholesky(const SpdMatrix& m);

// Non-throwing factorization attempt; returns false when any pivot <= 0.
bool try_cholesky(const SymMatrix& m, std::vector<double>& lower);

// Cyclic Jacobi rotations; sweeps until the off-diagonal Frobenius mass drops
// below 1e-13 * ||A||_F, capped at 100 sweeps (NoConvergence beyond that).
EigenDecomposition eig_sym(const SymMatrix& m);

// 2 * sum_i log L_ii from the Cholesky factor.
double log_det(const SpdMatrix& m);

SpdMatrix spd_inverse(const SpdMatrix& m);

struct MatrixNorms {
    double spectral;
    double frobenius;
};
MatrixNorms norms(const SymMatrix& m);

// Uncentered: (1/n) sum x_i x_i^T.  Centered: (1/n) sum (x_i - xbar)(x_i - xbar)^T.
// The result can be singular (n < p), hence SymMatrix.
SymMatrix sample_covariance(const Dataset& data, bool centered);

// --- dense helpers shared across modules (A, B row-major dim x dim) ---

// C = A * B for square row-major buffers.
std::vector<double> mat_mul(std::span<const double> a, std::span<const double> b, int dim);
// tr(A * B) for symmetric A, B.
double trace_product(const SymMatrix& a, const SymMatrix& b);
// tr((A*B)^2) for symmetric A, B; equals ||B^{1/2} A B^{1/2}||_F^2 when B is PD.
double trace_product_squared(const SymMatrix& a, const SymMatrix& b);
// x^T A y.
double quad_form(const SymMatrix& a, std::span<const double> x, std::span<const double> y);
// A^{1/2} via eigendecomposition (A must be PSD up to round-off; negative
// eigenvalues are clamped to zero).
SymMatrix sym_sqrt(const SymMatrix& a);
// v v^T scaled outer products, symmetrized cross terms etc.
SymMatrix outer(std::span<const double> v);
SymMatrix sym_outer(std::span<const double> u, std::span<const double> v);  // (u v^T + v u^T)/2
// B = Q^T A Q with Q given row-major (columns are the new basis).
SymMatrix conjugate_by(const SymMatrix& a, std::span<const double> q, int dim);

// --- serialization (row-major CSV; JSON object {dim, entries}) ---

void save_matrix_csv(const SymMatrix& m, const std::filesystem::path& path);
SymMatrix load_sym_csv(const std::filesystem::path& path);
nlohmann::json matrix_to_json(const SymMatrix& m);
SymMatrix matrix_from_json(const nlohmann::json& j);

void save_dataset_csv(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

// Shortest-round-trip-ish fixed formatting used by every CSV writer ("%.17g").
std::string format_double(double x);

}  // namespace bvm
