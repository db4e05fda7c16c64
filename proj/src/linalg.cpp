#include "cdf/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "cdf/errors.hpp"

namespace cdf {

namespace {

void check_dims(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionMismatchError(std::string(what) + ": " + std::to_string(a) +
                                     " vs " + std::to_string(b));
    }
}

// Work threshold below which the omp pragma stays serial; keeps tiny layer
// matmuls free of scheduling overhead. The value only gates *whether*
// threads are used, never the per-element accumulation order.
constexpr std::size_t kParallelFlop = 1u << 16;

} // namespace

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    }
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_dims(a.cols(), b.rows(), "matmul inner");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Matrix out(m, n);
    const bool big = m * k * n > kParallelFlop;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        double* orow = out.data() + i * n;
        const double* arow = a.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = arow[p];
            const double* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_dims(a.rows(), b.rows(), "matmul_tn inner");
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    Matrix out(m, n);
    const bool big = m * k * n > kParallelFlop;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        double* orow = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a(p, static_cast<std::size_t>(i));
            const double* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_dims(a.cols(), b.cols(), "matmul_nt inner");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Matrix out(m, n);
    const bool big = m * k * n > kParallelFlop;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        double* orow = out.data() + i * n;
        const double* arow = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.data() + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] = acc;
        }
    }
    return out;
}

namespace ref {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_dims(a.cols(), b.rows(), "matmul inner");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_dims(a.rows(), b.rows(), "matmul_tn inner");
    Matrix out(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < a.rows(); ++p) acc += a(p, i) * b(p, j);
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_dims(a.cols(), b.cols(), "matmul_nt inner");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(j, p);
            out(i, j) = acc;
        }
    }
    return out;
}

} // namespace ref

std::vector<double> solve_spd(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    check_dims(a.rows(), a.cols(), "solve_spd square");
    check_dims(b.size(), n, "solve_spd rhs");
    // in-place Cholesky a = L L^T (lower triangle)
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t p = 0; p < j; ++p) d -= a(j, p) * a(j, p);
        if (!(d > 0.0)) {
            throw SingularDesignError("solve_spd: non-positive pivot at " +
                                      std::to_string(j));
        }
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= a(i, p) * a(j, p);
            a(i, j) = s / ljj;
        }
    }
    // forward solve L y = b
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t p = 0; p < i; ++p) s -= a(i, p) * b[p];
        b[i] = s / a(i, i);
    }
    // back solve L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t p = ii + 1; p < n; ++p) s -= a(p, ii) * b[p];
        b[ii] = s / a(ii, ii);
    }
    return b;
}

EigenSym eigh(const Matrix& sym) {
    const std::size_t n = sym.rows();
    check_dims(sym.rows(), sym.cols(), "eigh square");
    Matrix a = sym;
    Matrix v = Matrix::identity(n);

    auto off_diag_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
        }
        return s;
    };

    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps && off_diag_norm() > 1e-24; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    // sort descending by eigenvalue; stable over equal values
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = i;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (a(order[j], order[j]) > a(order[best], order[best])) best = j;
        }
        std::swap(order[i], order[best]);
    }

    EigenSym out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        out.values[k] = a(src, src);
        double sign = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(v(i, src)) > 1e-12) {
                sign = v(i, src) > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = sign * v(i, src);
    }
    return out;
}

} // namespace cdf
