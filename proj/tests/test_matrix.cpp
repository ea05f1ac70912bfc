#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "bvm/matrix.hpp"
#include "bvm/rng.hpp"
#include "bvm/samplers.hpp"
#include "test_helpers.hpp"

using namespace bvm;
using test::random_spd;
using test::random_sym;

TEST_SUITE_BEGIN("matrix");

TEST_CASE("construction symmetrizes and validates") {
    SymMatrix m(2, {1.0, 2.0, 4.0, 3.0});
    CHECK(m(0, 1) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(m(1, 0) == m(0, 1));
    CHECK_THROWS_AS(SymMatrix(2, {1.0, 2.0}), DimensionMismatch);
    CHECK_THROWS_AS(SymMatrix(2, {1.0, 2.0, 2.0, std::nan("")}), InvalidArgument);
}

TEST_CASE("cholesky on the known cases") {
    const auto l_id = cholesky(SpdMatrix::identity(3));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(l_id[i * 3 + j] == doctest::Approx(i == j ? 1.0 : 0.0));

    const auto l_diag = cholesky(SpdMatrix::diagonal(std::vector<double>{4.0, 9.0}));
    CHECK(l_diag[0] == doctest::Approx(2.0));
    CHECK(l_diag[3] == doctest::Approx(3.0));

    const SpdMatrix m(2, {2, 1, 1, 2});
    const auto l = cholesky(m);
    CHECK(l[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(l[2] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(l[3] == doctest::Approx(std::sqrt(1.5)).epsilon(1e-14));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int k = 0; k < 2; ++k) s += l[i * 2 + k] * l[j * 2 + k];
            CHECK(s == doctest::Approx(m(i, j)).epsilon(1e-12));
        }

    CHECK_THROWS_AS(SpdMatrix(2, {1, 2, 2, 1}), NotPositiveDefinite);
}

TEST_CASE("eig_sym sorts, reconstructs, and stays orthonormal") {
    const auto e1 = eig_sym(SymMatrix::diagonal(std::vector<double>{1.0, 3.0, 2.0}));
    CHECK(e1.values[0] == doctest::Approx(3.0));
    CHECK(e1.values[1] == doctest::Approx(2.0));
    CHECK(e1.values[2] == doctest::Approx(1.0));

    const auto e2 = eig_sym(SymMatrix(2, {2, 1, 1, 2}));
    CHECK(e2.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e2.values[1] == doctest::Approx(1.0).epsilon(1e-12));

    // similarity invariance with a random orthogonal basis
    RngStream rng(42, 0);
    const auto q = eig_sym(random_sym(3, rng)).vectors;
    const SymMatrix a = conjugate_by(SymMatrix::diagonal(std::vector<double>{5.0, 2.0, 1.0}), q, 3);
    const auto e3 = eig_sym(a);
    CHECK(e3.values[0] == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(e3.values[1] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(e3.values[2] == doctest::Approx(1.0).epsilon(1e-9));

    for (int trial = 0; trial < 20; ++trial) {
        const SymMatrix m = random_sym(5, rng);
        const auto eig = eig_sym(m);
        const int p = 5;
        double recon_err = 0.0, ortho_err = 0.0;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) {
                double r = 0.0, o = 0.0;
                for (int k = 0; k < p; ++k) {
                    r += eig.vector_at(i, k) * eig.values[k] * eig.vector_at(j, k);
                    o += eig.vector_at(k, i) * eig.vector_at(k, j);
                }
                recon_err += (r - m(i, j)) * (r - m(i, j));
                ortho_err += (o - (i == j ? 1.0 : 0.0)) * (o - (i == j ? 1.0 : 0.0));
            }
        CHECK(std::sqrt(recon_err) <= 1e-10 * (1.0 + m.frobenius()));
        CHECK(std::sqrt(ortho_err) <= 1e-10);
    }

    // sign convention: the largest-magnitude coordinate of each column is positive
    const auto e4 = eig_sym(SymMatrix(2, {2, 1, 1, 2}));
    CHECK(e4.vector_at(0, 0) > 0.0);
    CHECK(e4.vector_at(0, 1) > 0.0);
}

TEST_CASE("log_det on the known cases") {
    CHECK(log_det(SpdMatrix::identity(5)) == doctest::Approx(0.0));
    const double e = std::exp(1.0);
    CHECK(log_det(SpdMatrix::diagonal(std::vector<double>{e, e * e})) ==
          doctest::Approx(3.0).epsilon(1e-12));
    CHECK(log_det(SpdMatrix(2, {2, 1, 1, 2})) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("spd_inverse on the known cases") {
    const SpdMatrix inv_id = spd_inverse(SpdMatrix::identity(4));
    CHECK(test::max_abs_diff(inv_id.sym(), SymMatrix::identity(4)) <= 1e-14);

    const SpdMatrix inv_diag = spd_inverse(SpdMatrix::diagonal(std::vector<double>{2.0, 5.0}));
    CHECK(inv_diag(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(inv_diag(1, 1) == doctest::Approx(0.2).epsilon(1e-14));

    const SpdMatrix inv = spd_inverse(SpdMatrix(2, {2, 1, 1, 2}));
    CHECK(inv(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    CHECK(inv(0, 1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-13));
    CHECK(inv(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));

    RngStream rng(7, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 2 + trial % 6;
        const SpdMatrix m = random_spd(p, rng);
        const SpdMatrix minv = spd_inverse(m);
        const auto prod = mat_mul(m.sym().data(), minv.sym().data(), p);
        double err = 0.0;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) {
                const double d = prod[static_cast<std::size_t>(i) * p + j] - (i == j ? 1.0 : 0.0);
                err += d * d;
            }
        CHECK(std::sqrt(err) <= 1e-9 * p);
    }
}

TEST_CASE("norms on the known cases") {
    const auto n1 = norms(SymMatrix::identity(3));
    CHECK(n1.spectral == doctest::Approx(1.0));
    CHECK(n1.frobenius == doctest::Approx(std::sqrt(3.0)));

    const auto n2 = norms(SymMatrix::diagonal(std::vector<double>{-4.0, 2.0}));
    CHECK(n2.spectral == doctest::Approx(4.0));
    CHECK(n2.frobenius == doctest::Approx(std::sqrt(20.0)));

    const std::vector<double> v{2.0 / std::sqrt(2.0), 2.0 / std::sqrt(2.0)};
    const auto n3 = norms(outer(v));
    CHECK(n3.spectral == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(n3.frobenius == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("sample_covariance on the known cases") {
    const Dataset one_row(1, 2, {1.0, 0.0});
    const SymMatrix s1 = sample_covariance(one_row, false);
    CHECK(s1(0, 0) == doctest::Approx(1.0));
    CHECK(s1(0, 1) == doctest::Approx(0.0));
    CHECK(s1(1, 1) == doctest::Approx(0.0));

    const Dataset pm(2, 1, {1.0, -1.0});
    const SymMatrix s2 = sample_covariance(pm, true);
    CHECK(s2(0, 0) == doctest::Approx(1.0));

    const Dataset basis(2, 2, {1.0, 0.0, 0.0, 1.0});
    const SymMatrix s3 = sample_covariance(basis, false);
    CHECK(test::max_abs_diff(s3, SymMatrix::identity(2).scaled(0.5)) <= 1e-15);

    CHECK_THROWS_AS(Dataset(0, 2, {}), EmptyData);
}

TEST_CASE("module invariants over random inputs") {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 2 + trial % 5;
        const SpdMatrix m = random_spd(p, rng);
        CHECK(log_det(spd_inverse(m)) == doctest::Approx(-log_det(m)).epsilon(1e-8));

        const auto eig = eig_sym(m.sym());
        const auto eig_inv = eig_sym(spd_inverse(m).sym());
        for (int k = 0; k < p; ++k)
            CHECK(eig_inv.values[k] == doctest::Approx(1.0 / eig.values[p - 1 - k]).epsilon(1e-8));

        double sumsq = 0.0;
        for (double v : eig.values) sumsq += v * v;
        const auto nm = norms(m.sym());
        CHECK(nm.frobenius * nm.frobenius == doctest::Approx(sumsq).epsilon(1e-8));
        CHECK(nm.spectral <= nm.frobenius + 1e-12);
        CHECK(nm.frobenius <= std::sqrt(static_cast<double>(p)) * nm.spectral + 1e-12);
    }
}

TEST_CASE("eig_sym at desk scale") {
    // p = 120: spectrum recovery through a similarity transform
    RngStream rng(19, 0);
    const int p = 120;
    std::vector<double> spectrum(p);
    for (int i = 0; i < p; ++i) spectrum[i] = 1.0 + 0.05 * (p - i);
    const auto q = eig_sym(random_sym(p, rng)).vectors;
    const SymMatrix a = conjugate_by(SymMatrix::diagonal(spectrum), q, p);
    const auto eig = eig_sym(a);
    for (int i = 0; i < p; ++i) CHECK(eig.values[i] == doctest::Approx(spectrum[i]).epsilon(1e-9));
    for (int i = 0; i + 1 < p; ++i) CHECK(eig.values[i] >= eig.values[i + 1]);
}

TEST_CASE("one-dimensional edge cases") {
    const SymMatrix one(1, {4.0});
    CHECK(eig_sym(one).values[0] == doctest::Approx(4.0));
    CHECK(eig_sym(one).vector_at(0, 0) == doctest::Approx(1.0));
    CHECK(log_det(SpdMatrix(one)) == doctest::Approx(std::log(4.0)));
    CHECK(spd_inverse(SpdMatrix(one))(0, 0) == doctest::Approx(0.25));
    const auto nm = norms(one);
    CHECK(nm.spectral == doctest::Approx(4.0));
    CHECK(nm.frobenius == doctest::Approx(4.0));
}

TEST_CASE("sample covariance converges at Monte Carlo scale") {
    RngStream rng(13, 0);
    const int n = 100000;
    const SpdMatrix cov(3, {1.0, 0.2, 0.0, 0.2, 1.0, 0.3, 0.0, 0.3, 1.0});
    const Dataset data = draw_mvn(cov, n, rng);
    const SymMatrix s = sample_covariance(data, false);
    const double tol = 4.0 * std::sqrt(2.0 / n);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::fabs(s(i, j) - cov(i, j)) <= tol);
}

TEST_CASE("serialization round trips") {
    RngStream rng(17, 0);
    const SymMatrix m = random_sym(4, rng);
    const auto dir = std::filesystem::temp_directory_path() / "bvm_matrix_io";
    std::filesystem::create_directories(dir);

    save_matrix_csv(m, dir / "m.csv");
    const SymMatrix m2 = load_sym_csv(dir / "m.csv");
    CHECK(test::max_abs_diff(m, m2) == 0.0);

    const auto j = matrix_to_json(m);
    CHECK(j.at("dim") == 4);
    CHECK(test::max_abs_diff(m, matrix_from_json(j)) == 0.0);

    const Dataset d(3, 2, {1.5, -2.25, 0.125, 3.0, -0.5, 1.0});
    save_dataset_csv(d, dir / "d.csv");
    const Dataset d2 = load_dataset_csv(dir / "d.csv");
    CHECK(d2.n == 3);
    CHECK(d2.p == 2);
    for (std::size_t k = 0; k < d.rows.size(); ++k) CHECK(d.rows[k] == d2.rows[k]);
}

TEST_SUITE_END();
