#ifndef CDF_LINALG_HPP
#define CDF_LINALG_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace cdf {

/// Dense row-major matrix of doubles. Value type; cheap to move.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    bool all_finite() const;
    Matrix transposed() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// Parallel kernels. Each output element is accumulated by exactly one
// thread in a fixed index order, so results are bitwise identical for any
// thread count. Serial twins live in cdf::ref below.
Matrix matmul(const Matrix& a, const Matrix& b);    // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b); // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b); // a * b^T

/// Serial reference implementations, kept for tests and the kernel benchmark.
namespace ref {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
} // namespace ref

/// Solves A x = b for symmetric positive definite A via Cholesky.
/// Throws SingularDesignError when a pivot collapses.
std::vector<double> solve_spd(Matrix a, std::vector<double> b);

/// Symmetric eigendecomposition (cyclic Jacobi).
/// values sorted descending; vectors stored as columns, matching order.
/// Sign convention: first component with |x| > 1e-12 is positive.
struct EigenSym {
    std::vector<double> values;
    Matrix vectors;
};
EigenSym eigh(const Matrix& sym);

} // namespace cdf

#endif // CDF_LINALG_HPP
