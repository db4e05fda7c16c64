#include "cdf/kvfile.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cdf/errors.hpp"

namespace cdf {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(s.substr(start)));
            break;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

} // namespace

std::string KvFile::format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double KvFile::parse_double(const std::string& s) {
    const std::string t = trim(s);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() || *end != '\0') {
        throw IoError("not a number: '" + t + "'");
    }
    return v;
}

KvFile::Section& KvFile::section(const std::string& name) {
    for (auto& s : sections_) {
        if (s.name == name) return s;
    }
    sections_.push_back({name, {}});
    return sections_.back();
}

const KvFile::Section* KvFile::find_section(const std::string& name) const {
    for (const auto& s : sections_) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

void KvFile::set(const std::string& sec, const std::string& key, std::string value) {
    auto& s = section(sec);
    for (auto& e : s.entries) {
        if (e.first == key) {
            e.second = std::move(value);
            return;
        }
    }
    s.entries.emplace_back(key, std::move(value));
}

void KvFile::set_double(const std::string& sec, const std::string& key, double v) {
    set(sec, key, format_double(v));
}

void KvFile::set_uint(const std::string& sec, const std::string& key, std::uint64_t v) {
    set(sec, key, std::to_string(v));
}

void KvFile::set_vector(const std::string& sec, const std::string& key,
                        std::span<const double> v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    set(sec, key, std::move(out));
}

void KvFile::set_strings(const std::string& sec, const std::string& key,
                         const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += v[i];
    }
    set(sec, key, std::move(out));
}

void KvFile::set_matrix(const std::string& sec, const Matrix& m) {
    set_uint(sec, "rows", m.rows());
    set_uint(sec, "cols", m.cols());
    set_vector(sec, "data", std::span<const double>(m.data(), m.size()));
}

bool KvFile::has(const std::string& sec, const std::string& key) const {
    return get_opt(sec, key).has_value();
}

std::optional<std::string> KvFile::get_opt(const std::string& sec,
                                           const std::string& key) const {
    const Section* s = find_section(sec);
    if (!s) return std::nullopt;
    for (const auto& e : s->entries) {
        if (e.first == key) return e.second;
    }
    return std::nullopt;
}

const std::string& KvFile::get(const std::string& sec, const std::string& key) const {
    const Section* s = find_section(sec);
    if (s) {
        for (const auto& e : s->entries) {
            if (e.first == key) return e.second;
        }
    }
    throw IoError("missing key [" + sec + "] " + key);
}

double KvFile::get_double(const std::string& sec, const std::string& key) const {
    return parse_double(get(sec, key));
}

std::uint64_t KvFile::get_uint(const std::string& sec, const std::string& key) const {
    const std::string& v = get(sec, key);
    char* end = nullptr;
    const std::uint64_t out = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw IoError("not an integer: [" + sec + "] " + key + " = '" + v + "'");
    }
    return out;
}

std::vector<double> KvFile::get_vector(const std::string& sec,
                                       const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : split_commas(get(sec, key))) out.push_back(parse_double(tok));
    return out;
}

std::vector<std::string> KvFile::get_strings(const std::string& sec,
                                             const std::string& key) const {
    return split_commas(get(sec, key));
}

Matrix KvFile::get_matrix(const std::string& sec) const {
    const std::size_t rows = get_uint(sec, "rows");
    const std::size_t cols = get_uint(sec, "cols");
    const std::vector<double> data = get_vector(sec, "data");
    if (data.size() != rows * cols) {
        throw IoError("matrix size mismatch in [" + sec + "]");
    }
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) m.data()[i] = data[i];
    return m;
}

std::vector<std::string> KvFile::section_names() const {
    std::vector<std::string> out;
    out.reserve(sections_.size());
    for (const auto& s : sections_) out.push_back(s.name);
    return out;
}

bool KvFile::has_section(const std::string& sec) const {
    return find_section(sec) != nullptr;
}

std::string KvFile::to_string() const {
    std::string out;
    for (const auto& s : sections_) {
        out += '[' + s.name + "]\n";
        for (const auto& e : s.entries) out += e.first + " = " + e.second + '\n';
        out += '\n';
    }
    return out;
}

void KvFile::write(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << to_string();
    if (!f) throw IoError("write failed for " + path.string());
}

KvFile KvFile::parse(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    std::string current;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            current = trim(t.substr(1, t.size() - 2));
            kv.section(current);
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw IoError("malformed line: '" + t + "'");
        }
        kv.set(current, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return kv;
}

KvFile KvFile::read(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

} // namespace cdf
