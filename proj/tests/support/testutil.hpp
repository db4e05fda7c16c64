#ifndef CDF_TESTS_TESTUTIL_HPP
#define CDF_TESTS_TESTUTIL_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "cdf/panel.hpp"
#include "cdf/rng.hpp"

namespace cdf::test {

inline AttributeSchema simple_schema(std::size_t a, std::size_t known = 0) {
    AttributeSchema s;
    for (std::size_t j = 0; j < a; ++j) {
        s.names.push_back("a" + std::to_string(j + 1));
        s.roles.push_back(Role::other);
        s.known_future.push_back(j < known);
    }
    return s;
}

inline Panel random_panel(std::string id, std::size_t t, std::size_t a,
                          std::uint64_t seed, std::size_t known = 0) {
    Rng rng(seed);
    Matrix values(t, a);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values.data()[i] = rng.uniform(-10.0, 10.0);
    }
    return Panel(std::move(id), simple_schema(a, known), std::move(values));
}

inline Panel panel_from_columns(std::string id,
                                const std::vector<std::vector<double>>& cols,
                                std::size_t known = 0) {
    const std::size_t a = cols.size(), t = cols.front().size();
    Matrix values(t, a);
    for (std::size_t j = 0; j < a; ++j) {
        for (std::size_t r = 0; r < t; ++r) values(r, j) = cols[j][r];
    }
    return Panel(std::move(id), simple_schema(a, known), std::move(values));
}

/// Unique scratch directory under the system temp dir; removed on
/// destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        dir_ = std::filesystem::temp_directory_path() /
               ("cdf_test_" + tag + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    const std::filesystem::path& path() const { return dir_; }

private:
    static std::size_t& counter() {
        static std::size_t c = 0;
        return c;
    }
    std::filesystem::path dir_;
};

} // namespace cdf::test

#endif // CDF_TESTS_TESTUTIL_HPP
