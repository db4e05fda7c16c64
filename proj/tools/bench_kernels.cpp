// Compares the OpenMP matmul kernels against their serial reference
// implementations: wall time, speedup, and max |difference|.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cdf/linalg.hpp"
#include "cdf/rng.hpp"

using cdf::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, cdf::Rng& rng) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
    return m;
}

template <typename F>
double time_ms(F&& fn, int reps) {
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        m = std::max(m, d < 0 ? -d : d);
    }
    return m;
}

void bench_one(const char* name, std::size_t n, int reps) {
    cdf::Rng rng(42);
    const Matrix a = random_matrix(n, n, rng);
    const Matrix b = random_matrix(n, n, rng);

    Matrix serial, parallel;
    const double t_serial = time_ms([&] { serial = cdf::ref::matmul(a, b); }, reps);
    const double t_par = time_ms([&] { parallel = cdf::matmul(a, b); }, reps);
    std::printf("%-12s n=%4zu  serial %8.2f ms  omp %8.2f ms  speedup %5.2fx  "
                "max|diff| %.3g\n",
                name, n, t_serial, t_par, t_serial / t_par,
                max_abs_diff(serial, parallel));
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled\n");
#endif
    bench_one("matmul", 64, 50);
    bench_one("matmul", 256, 10);
    bench_one("matmul", 512, 3);

    cdf::Rng rng(7);
    const Matrix a = random_matrix(300, 400, rng);
    const Matrix b = random_matrix(300, 200, rng);
    Matrix serial, parallel;
    const double t_serial = time_ms([&] { serial = cdf::ref::matmul_tn(a, b); }, 10);
    const double t_par = time_ms([&] { parallel = cdf::matmul_tn(a, b); }, 10);
    std::printf("%-12s 400x300x200  serial %8.2f ms  omp %8.2f ms  speedup %5.2fx "
                " max|diff| %.3g\n",
                "matmul_tn", t_serial, t_par, t_serial / t_par,
                max_abs_diff(serial, parallel));
    return 0;
}
