#ifndef CDF_KVFILE_HPP
#define CDF_KVFILE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdf/linalg.hpp"

namespace cdf {

/// Sectioned key-value text format used for every structured artifact
/// (schemas, pipeline state, causal graphs, model bundles, run configs,
/// manifests). Layout:
///
///     # comment
///     [section]
///     key = value
///
/// Doubles are rendered with 17 significant digits so values round-trip
/// bit-exactly. Sections and keys keep insertion order on write.
class KvFile {
public:
    void set(const std::string& section, const std::string& key, std::string value);
    void set_double(const std::string& section, const std::string& key, double v);
    void set_uint(const std::string& section, const std::string& key, std::uint64_t v);
    void set_vector(const std::string& section, const std::string& key,
                    std::span<const double> v);
    void set_strings(const std::string& section, const std::string& key,
                     const std::vector<std::string>& v);
    /// Stores rows/cols/data keys inside `section`.
    void set_matrix(const std::string& section, const Matrix& m);

    bool has(const std::string& section, const std::string& key) const;
    const std::string& get(const std::string& section, const std::string& key) const;
    std::optional<std::string> get_opt(const std::string& section,
                                       const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    std::uint64_t get_uint(const std::string& section, const std::string& key) const;
    std::vector<double> get_vector(const std::string& section,
                                   const std::string& key) const;
    std::vector<std::string> get_strings(const std::string& section,
                                         const std::string& key) const;
    Matrix get_matrix(const std::string& section) const;

    std::vector<std::string> section_names() const;
    bool has_section(const std::string& section) const;

    void write(const std::filesystem::path& path) const;
    static KvFile read(const std::filesystem::path& path);
    static KvFile parse(const std::string& text);
    std::string to_string() const;

    /// Full-precision decimal rendering (17 significant digits).
    static std::string format_double(double v);
    static double parse_double(const std::string& s);

private:
    struct Section {
        std::string name;
        std::vector<std::pair<std::string, std::string>> entries;
    };
    Section& section(const std::string& name);
    const Section* find_section(const std::string& name) const;
    std::vector<Section> sections_;
};

} // namespace cdf

#endif // CDF_KVFILE_HPP
