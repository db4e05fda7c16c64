#include "cdf/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cdf/errors.hpp"
#include "cdf/kvfile.hpp"

namespace cdf {

namespace {

thread_local ReadGuard* g_active_guard = nullptr;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

} // namespace

std::string role_name(Role r) {
    switch (r) {
        case Role::service_traffic: return "service-traffic";
        case Role::machine_usage: return "machine-usage";
        case Role::total_traffic: return "total-traffic";
        case Role::other: return "other";
    }
    return "other";
}

Role parse_role(const std::string& name) {
    if (name == "service-traffic") return Role::service_traffic;
    if (name == "machine-usage") return Role::machine_usage;
    if (name == "total-traffic") return Role::total_traffic;
    if (name == "other") return Role::other;
    throw IoError("unknown attribute role '" + name + "'");
}

std::vector<std::size_t> AttributeSchema::known_future_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < known_future.size(); ++j) {
        if (known_future[j]) out.push_back(j);
    }
    return out;
}

std::vector<std::size_t> AttributeSchema::forecast_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < known_future.size(); ++j) {
        if (!known_future[j]) out.push_back(j);
    }
    return out;
}

std::optional<std::size_t> AttributeSchema::find(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (names[j] == name) return j;
    }
    return std::nullopt;
}

std::optional<std::size_t> AttributeSchema::total_traffic_index() const {
    for (std::size_t j = 0; j < roles.size(); ++j) {
        if (roles[j] == Role::total_traffic) return j;
    }
    return std::nullopt;
}

void AttributeSchema::validate() const {
    if (names.empty()) throw SchemaMismatchError("schema has no attributes");
    if (roles.size() != names.size() || known_future.size() != names.size()) {
        throw SchemaMismatchError("schema field lengths differ");
    }
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw SchemaMismatchError("empty attribute name");
        if (n.find(',') != std::string::npos) {
            throw SchemaMismatchError("attribute name contains comma: '" + n + "'");
        }
        if (!seen.insert(n).second) {
            throw SchemaMismatchError("duplicate attribute name '" + n + "'");
        }
    }
}

AttributeSchema load_schema(const std::filesystem::path& path) {
    const KvFile kv = KvFile::read(path);
    AttributeSchema s;
    s.names = kv.get_strings("schema", "attributes");
    for (const auto& r : kv.get_strings("schema", "roles")) s.roles.push_back(parse_role(r));
    for (const auto& f : kv.get_strings("schema", "known_future")) {
        s.known_future.push_back(f == "1" || f == "true");
    }
    s.validate();
    return s;
}

void save_schema(const AttributeSchema& schema, const std::filesystem::path& path) {
    schema.validate();
    KvFile kv;
    kv.set_strings("schema", "attributes", schema.names);
    std::vector<std::string> roles, kf;
    for (Role r : schema.roles) roles.push_back(role_name(r));
    for (bool b : schema.known_future) kf.push_back(b ? "1" : "0");
    kv.set_strings("schema", "roles", roles);
    kv.set_strings("schema", "known_future", kf);
    kv.write(path);
}

ReadGuard::ReadGuard(Policy policy) : policy_(std::move(policy)) {
    previous_ = g_active_guard;
    g_active_guard = this;
}

ReadGuard::~ReadGuard() { g_active_guard = previous_; }

void ReadGuard::on_read(const std::string& panel_id, std::size_t t, std::size_t j,
                        bool observed) {
    if (!policy_.panel_id.empty() && policy_.panel_id != panel_id) return;
    ++total_reads_;
    if (!observed) ++masked_reads_;
    if (t > policy_.origin) {
        const bool allowed = j < policy_.known_future.size() &&
                             policy_.known_future[j] != 0 &&
                             t <= policy_.origin + policy_.horizon;
        if (!allowed) ++future_reads_;
    }
}

Panel::Panel(std::string id, AttributeSchema schema, Matrix values,
             std::vector<std::uint8_t> observed)
    : id_(std::move(id)),
      schema_(std::move(schema)),
      values_(std::move(values)),
      observed_(std::move(observed)) {
    schema_.validate();
    if (values_.rows() < 1 || values_.cols() < 1) {
        throw DimensionMismatchError("panel must be at least 1x1");
    }
    if (values_.cols() != schema_.size()) {
        throw SchemaMismatchError("panel width differs from schema size");
    }
    if (observed_.size() != values_.size()) {
        throw DimensionMismatchError("mask size differs from value size");
    }
    for (std::size_t i = 0; i < observed_.size(); ++i) {
        if (observed_[i] && !std::isfinite(values_.data()[i])) {
            throw DimensionMismatchError("observed cell is not finite in panel '" +
                                         id_ + "'");
        }
    }
}

namespace {
std::vector<std::uint8_t> all_ones_mask(const Matrix& values) {
    return std::vector<std::uint8_t>(values.size(), 1);
}
} // namespace

Panel::Panel(std::string id, AttributeSchema schema, Matrix values)
    : Panel(std::move(id), std::move(schema), Matrix(values),
            all_ones_mask(values)) {}

double Panel::value(std::size_t t, std::size_t j) const {
    if (g_active_guard) g_active_guard->on_read(id_, t, j, observed(t, j));
    return values_(t, j);
}

bool Panel::fully_observed() const {
    return std::all_of(observed_.begin(), observed_.end(),
                       [](std::uint8_t v) { return v != 0; });
}

std::size_t Panel::observed_count(std::size_t j) const {
    std::size_t n = 0;
    for (std::size_t t = 0; t < steps(); ++t) n += observed(t, j) ? 1 : 0;
    return n;
}

std::optional<std::size_t> Panel::last_observed_at_or_before(std::size_t t,
                                                             std::size_t j) const {
    for (std::size_t u = std::min(t, steps() - 1) + 1; u-- > 0;) {
        if (observed(u, j)) return u;
    }
    return std::nullopt;
}

bool Panel::same_content(const Panel& other) const {
    return id_ == other.id_ && schema_ == other.schema_ &&
           values_ == other.values_ && observed_ == other.observed_;
}

Panel load_panel(const std::filesystem::path& path, const AttributeSchema& schema) {
    schema.validate();
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());

    std::string header;
    if (!std::getline(f, header) || trim(header).empty()) {
        throw EmptyFileError("no header row in " + path.string());
    }
    const std::vector<std::string> cols = split_csv_line(header);
    for (const auto& name : schema.names) {
        if (std::find(cols.begin(), cols.end(), name) == cols.end()) {
            throw MissingColumnError("column '" + name + "' missing in " +
                                     path.string());
        }
    }
    if (cols != schema.names) {
        throw MissingColumnError("header of " + path.string() +
                                 " does not match the schema attribute order");
    }

    std::vector<double> values;
    std::vector<std::uint8_t> observed;
    std::string line;
    std::size_t row = 0;
    while (std::getline(f, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != cols.size()) {
            throw NonNumericCellError("row " + std::to_string(row) + " of " +
                                      path.string() + " has " +
                                      std::to_string(cells.size()) + " cells");
        }
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (cells[j] == "NA") {
                values.push_back(0.0);
                observed.push_back(0);
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(cells[j].c_str(), &end);
            if (end == cells[j].c_str() || *end != '\0' || !std::isfinite(v)) {
                throw NonNumericCellError("non-numeric cell at row " +
                                          std::to_string(row) + ", col " +
                                          std::to_string(j) + " in " + path.string());
            }
            values.push_back(v);
            observed.push_back(1);
        }
        ++row;
    }
    if (row == 0) throw EmptyFileError("no data rows in " + path.string());

    Matrix m(row, cols.size());
    std::copy(values.begin(), values.end(), m.data());
    return Panel(path.stem().string(), schema, std::move(m), std::move(observed));
}

void save_panel(const Panel& panel, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    const auto& names = panel.schema().names;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (j) f << ',';
        f << names[j];
    }
    f << '\n';
    for (std::size_t t = 0; t < panel.steps(); ++t) {
        for (std::size_t j = 0; j < panel.attrs(); ++j) {
            if (j) f << ',';
            if (panel.observed(t, j)) {
                f << KvFile::format_double(panel.value(t, j));
            } else {
                f << "NA";
            }
        }
        f << '\n';
    }
    if (!f) throw IoError("write failed for " + path.string());
}

Panel mask_history(const Panel& panel, const std::vector<std::string>& attrs,
                   std::size_t cut) {
    if (cut >= panel.steps()) {
        throw CutOutOfRangeError("cut " + std::to_string(cut) + " >= T = " +
                                 std::to_string(panel.steps()));
    }
    std::vector<std::size_t> idx;
    for (const auto& name : attrs) {
        const auto j = panel.schema().find(name);
        if (!j) throw UnknownAttributeError("unknown attribute '" + name + "'");
        idx.push_back(*j);
    }
    Matrix values(panel.steps(), panel.attrs());
    std::vector<std::uint8_t> observed(values.size());
    for (std::size_t t = 0; t < panel.steps(); ++t) {
        for (std::size_t j = 0; j < panel.attrs(); ++j) {
            values(t, j) = panel.value(t, j);
            observed[t * panel.attrs() + j] = panel.observed(t, j) ? 1 : 0;
        }
    }
    for (std::size_t j : idx) {
        for (std::size_t t = 0; t < cut; ++t) {
            observed[t * panel.attrs() + j] = 0;
            values(t, j) = 0.0;
        }
    }
    return Panel(panel.id(), panel.schema(), std::move(values), std::move(observed));
}

Panel slice(const Panel& panel, std::size_t t0, std::size_t t1) {
    if (!(t0 < t1 && t1 <= panel.steps())) {
        throw InvalidRangeError("slice [" + std::to_string(t0) + ", " +
                                std::to_string(t1) + ") of T = " +
                                std::to_string(panel.steps()));
    }
    Matrix values(t1 - t0, panel.attrs());
    std::vector<std::uint8_t> observed(values.size());
    for (std::size_t t = t0; t < t1; ++t) {
        for (std::size_t j = 0; j < panel.attrs(); ++j) {
            values(t - t0, j) = panel.value(t, j);
            observed[(t - t0) * panel.attrs() + j] = panel.observed(t, j) ? 1 : 0;
        }
    }
    return Panel(panel.id(), panel.schema(), std::move(values), std::move(observed));
}

void Fleet::validate() const {
    if (panels.empty()) throw SchemaMismatchError("fleet has no panels");
    for (const auto& p : panels) {
        if (!(p.schema() == panels.front().schema())) {
            throw SchemaMismatchError("panel '" + p.id() +
                                      "' does not share the fleet schema");
        }
    }
}

const Panel& Fleet::by_id(const std::string& id) const {
    return panels[index_of(id)];
}

std::size_t Fleet::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < panels.size(); ++i) {
        if (panels[i].id() == id) return i;
    }
    throw UnknownAttributeError("no panel with id '" + id + "'");
}

Fleet load_fleet(const std::filesystem::path& dir) {
    const AttributeSchema schema = load_schema(dir / "schema.txt");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    Fleet fleet;
    for (const auto& f : files) fleet.panels.push_back(load_panel(f, schema));
    fleet.validate();
    return fleet;
}

void save_fleet(const Fleet& fleet, const std::filesystem::path& dir) {
    fleet.validate();
    std::filesystem::create_directories(dir);
    save_schema(fleet.panels.front().schema(), dir / "schema.txt");
    for (const auto& p : fleet.panels) save_panel(p, dir / (p.id() + ".csv"));
}

} // namespace cdf
