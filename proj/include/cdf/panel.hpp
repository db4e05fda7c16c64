#ifndef CDF_PANEL_HPP
#define CDF_PANEL_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdf/linalg.hpp"

namespace cdf {

enum class Role { service_traffic, machine_usage, total_traffic, other };

std::string role_name(Role r);
Role parse_role(const std::string& name);

/// Per-fleet attribute description: names, roles, and which attributes have
/// known future values at forecast time (usage) versus being forecast
/// targets (traffic). The two index sets partition [0, A).
struct AttributeSchema {
    std::vector<std::string> names;
    std::vector<Role> roles;
    std::vector<bool> known_future;

    std::size_t size() const { return names.size(); }
    std::vector<std::size_t> known_future_indices() const;  // attributes given at forecast time
    std::vector<std::size_t> forecast_indices() const;      // attributes to predict
    std::optional<std::size_t> find(const std::string& name) const;
    std::optional<std::size_t> total_traffic_index() const;

    /// Throws on duplicate/empty names, names containing commas, or
    /// mismatched field lengths.
    void validate() const;

    bool operator==(const AttributeSchema&) const = default;
};

AttributeSchema load_schema(const std::filesystem::path& path);
void save_schema(const AttributeSchema& schema, const std::filesystem::path& path);

/// Scoped read instrumentation. While a guard is armed on the current
/// thread, every Panel::value() call on the policy's panel is checked:
/// reads of unobserved cells and reads of rows past the forecast origin
/// (other than declared known-future cells within the horizon) are counted
/// as violations. Used to prove the no-leakage property. An empty panel_id
/// matches every panel.
class ReadGuard {
public:
    struct Policy {
        std::string panel_id;
        std::size_t origin;
        std::size_t horizon;
        std::vector<std::uint8_t> known_future; // per-attribute flag
    };

    explicit ReadGuard(Policy policy);
    ~ReadGuard();
    ReadGuard(const ReadGuard&) = delete;
    ReadGuard& operator=(const ReadGuard&) = delete;

    std::size_t masked_reads() const { return masked_reads_; }
    std::size_t future_reads() const { return future_reads_; }
    std::size_t total_reads() const { return total_reads_; }

private:
    friend class Panel;
    void on_read(const std::string& panel_id, std::size_t t, std::size_t j,
                 bool observed);

    Policy policy_;
    ReadGuard* previous_ = nullptr;
    std::size_t masked_reads_ = 0;
    std::size_t future_reads_ = 0;
    std::size_t total_reads_ = 0;
};

/// One data center's T x A observation matrix plus mask. Immutable after
/// construction; safe to share read-only across workers. Cell values are
/// only reachable through value(), which feeds the active ReadGuard.
class Panel {
public:
    Panel(std::string id, AttributeSchema schema, Matrix values,
          std::vector<std::uint8_t> observed);
    Panel(std::string id, AttributeSchema schema, Matrix values);

    const std::string& id() const { return id_; }
    const AttributeSchema& schema() const { return schema_; }
    std::size_t steps() const { return values_.rows(); }
    std::size_t attrs() const { return values_.cols(); }

    double value(std::size_t t, std::size_t j) const;
    bool observed(std::size_t t, std::size_t j) const {
        return observed_[t * attrs() + j] != 0;
    }
    bool fully_observed() const;
    std::size_t observed_count(std::size_t j) const;
    /// Largest t' <= t with cell (t', j) observed; nullopt when none.
    std::optional<std::size_t> last_observed_at_or_before(std::size_t t,
                                                          std::size_t j) const;

    bool same_content(const Panel& other) const;

private:
    std::string id_;
    AttributeSchema schema_;
    Matrix values_;
    std::vector<std::uint8_t> observed_;
};

Panel load_panel(const std::filesystem::path& path, const AttributeSchema& schema);
void save_panel(const Panel& panel, const std::filesystem::path& path);

/// Marks the given attributes unobserved for all t < cut. Masking is
/// idempotent. Throws UnknownAttributeError / CutOutOfRangeError.
Panel mask_history(const Panel& panel, const std::vector<std::string>& attrs,
                   std::size_t cut);

/// Rows [t0, t1); mask preserved. Throws InvalidRangeError unless
/// 0 <= t0 < t1 <= T.
Panel slice(const Panel& panel, std::size_t t0, std::size_t t1);

/// Panels sharing one schema.
struct Fleet {
    std::vector<Panel> panels;

    void validate() const; // all schemas identical
    const Panel& by_id(const std::string& id) const;
    std::size_t index_of(const std::string& id) const;
};

/// Loads <dir>/schema.txt plus every *.csv in the directory (sorted by
/// filename; panel id = file stem).
Fleet load_fleet(const std::filesystem::path& dir);
void save_fleet(const Fleet& fleet, const std::filesystem::path& dir);

} // namespace cdf

#endif // CDF_PANEL_HPP
