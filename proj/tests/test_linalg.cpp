#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "cdf/errors.hpp"
#include "cdf/linalg.hpp"
#include "cdf/rng.hpp"

using cdf::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, cdf::Rng& rng) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-2.0, 2.0);
    return m;
}

} // namespace

TEST_CASE("matmul kernels agree with the serial reference") {
    cdf::Rng rng(1);
    const std::vector<std::array<std::size_t, 3>> shapes = {
        {3, 4, 5}, {17, 33, 9}, {64, 64, 64}, {1, 7, 1}, {120, 40, 80}};
    for (const auto [m, k, n] : shapes) {
        const Matrix a = random_matrix(m, k, rng);
        const Matrix b = random_matrix(k, n, rng);
        CHECK(cdf::matmul(a, b) == cdf::ref::matmul(a, b));

        const Matrix at = random_matrix(k, m, rng);
        CHECK(cdf::matmul_tn(at, b) == cdf::ref::matmul_tn(at, b));

        const Matrix bt = random_matrix(n, k, rng);
        CHECK(cdf::matmul_nt(a, bt) == cdf::ref::matmul_nt(a, bt));
    }
}

TEST_CASE("matmul identity and shape checks") {
    cdf::Rng rng(2);
    const Matrix a = random_matrix(6, 6, rng);
    CHECK(cdf::matmul(a, Matrix::identity(6)) == a);
    CHECK_THROWS_AS(cdf::matmul(Matrix(2, 3), Matrix(4, 2)),
                    cdf::DimensionMismatchError);
}

TEST_CASE("solve_spd recovers a known solution") {
    // A = L L^T with L = [[2,0],[1,3]] -> A = [[4,2],[2,10]]
    Matrix a(2, 2);
    a(0, 0) = 4;
    a(0, 1) = 2;
    a(1, 0) = 2;
    a(1, 1) = 10;
    // b = A * [1, 2] = [8, 22]
    const std::vector<double> x = cdf::solve_spd(a, {8.0, 22.0});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-12));

    Matrix singular(2, 2);
    singular(0, 0) = 1;
    singular(0, 1) = 1;
    singular(1, 0) = 1;
    singular(1, 1) = 1;
    CHECK_THROWS_AS(cdf::solve_spd(singular, {1.0, 1.0}), cdf::SingularDesignError);
}

TEST_CASE("eigh diagonalizes symmetric matrices") {
    // eigenvalues of [[2,1],[1,2]] are 3 and 1
    Matrix s(2, 2);
    s(0, 0) = 2;
    s(0, 1) = 1;
    s(1, 0) = 1;
    s(1, 1) = 2;
    const cdf::EigenSym e = cdf::eigh(s);
    CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-12));
    // eigenvectors orthonormal, first nonzero component positive
    for (std::size_t k = 0; k < 2; ++k) {
        double norm = 0.0;
        for (std::size_t i = 0; i < 2; ++i) norm += e.vectors(i, k) * e.vectors(i, k);
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(e.vectors(0, k) > 0.0);
    }

    cdf::Rng rng(3);
    const Matrix base = random_matrix(8, 8, rng);
    Matrix sym(8, 8);
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 8; ++j) {
            sym(i, j) = 0.5 * (base(i, j) + base(j, i));
        }
    }
    const cdf::EigenSym es = cdf::eigh(sym);
    // A v = lambda v for every pair
    for (std::size_t k = 0; k < 8; ++k) {
        for (std::size_t i = 0; i < 8; ++i) {
            double av = 0.0;
            for (std::size_t j = 0; j < 8; ++j) av += sym(i, j) * es.vectors(j, k);
            CHECK(av == doctest::Approx(es.values[k] * es.vectors(i, k))
                            .epsilon(1e-9));
        }
    }
    for (std::size_t k = 1; k < 8; ++k) CHECK(es.values[k - 1] >= es.values[k]);
}

TEST_CASE("rng is deterministic and uniform moments are sane") {
    cdf::Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    cdf::Rng rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        sum += u;
        sq += u * u;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.05));

    // uniform_sigma delivers the requested standard deviation
    cdf::Rng rng2(8);
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng2.uniform_sigma(2.5);
        s2 += x * x;
    }
    CHECK(std::sqrt(s2 / n) == doctest::Approx(2.5).epsilon(0.02));
}

TEST_CASE("derive_seed gives distinct streams") {
    const auto s1 = cdf::derive_seed(42, 0);
    const auto s2 = cdf::derive_seed(42, 1);
    const auto s3 = cdf::derive_seed(43, 0);
    CHECK(s1 != s2);
    CHECK(s1 != s3);
    CHECK(cdf::derive_seed(42, 0) == s1);
}
