#include <doctest.h>

#include <fstream>

#include "cdf/errors.hpp"
#include "cdf/panel.hpp"
#include "support/testutil.hpp"

using namespace cdf;
using test::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p);
    f << content;
}

} // namespace

TEST_CASE("load_panel reads numeric CSV") {
    TempDir tmp("load");
    const auto schema = test::simple_schema(2);
    write_file(tmp.path() / "p.csv", "a1,a2\n1,2\n3,4\n5,6\n");
    const Panel p = load_panel(tmp.path() / "p.csv", schema);
    CHECK(p.steps() == 3);
    CHECK(p.attrs() == 2);
    CHECK(p.id() == "p");
    CHECK(p.value(1, 0) == 3.0);
    CHECK(p.fully_observed());
}

TEST_CASE("NA cells become unobserved") {
    TempDir tmp("na");
    write_file(tmp.path() / "p.csv", "a1,a2\n1,2\nNA,4\n5,6\n");
    const Panel p = load_panel(tmp.path() / "p.csv", test::simple_schema(2));
    CHECK_FALSE(p.observed(1, 0));
    CHECK(p.observed(1, 1));
}

TEST_CASE("load_panel error paths") {
    TempDir tmp("err");
    const auto schema = test::simple_schema(2);
    write_file(tmp.path() / "missing.csv", "a1,total\n1,2\n");
    CHECK_THROWS_AS(load_panel(tmp.path() / "missing.csv", schema),
                    MissingColumnError);
    write_file(tmp.path() / "bad.csv", "a1,a2\n1,x\n");
    CHECK_THROWS_AS(load_panel(tmp.path() / "bad.csv", schema), NonNumericCellError);
    write_file(tmp.path() / "empty.csv", "");
    CHECK_THROWS_AS(load_panel(tmp.path() / "empty.csv", schema), EmptyFileError);
    write_file(tmp.path() / "headeronly.csv", "a1,a2\n");
    CHECK_THROWS_AS(load_panel(tmp.path() / "headeronly.csv", schema),
                    EmptyFileError);
}

TEST_CASE("save/load round trip is exact") {
    TempDir tmp("roundtrip");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Panel p = test::random_panel("p", 9, 4, seed);
        // punch a few holes in the mask
        p = mask_history(p, {"a2"}, 3);
        save_panel(p, tmp.path() / "p.csv");
        const Panel q = load_panel(tmp.path() / "p.csv", p.schema());
        CHECK(q.same_content(p));
    }
}

TEST_CASE("masked cells render as NA") {
    TempDir tmp("namask");
    Panel p = test::panel_from_columns("p", {{1, 2, 3}, {4, 5, 6}});
    p = mask_history(p, {"a1"}, 1);
    save_panel(p, tmp.path() / "p.csv");
    std::ifstream f(tmp.path() / "p.csv");
    std::string header, row0;
    std::getline(f, header);
    std::getline(f, row0);
    CHECK(row0.substr(0, 3) == "NA,");
}

TEST_CASE("mask_history semantics") {
    const Panel p = test::panel_from_columns("p", {{1, 2, 3, 4}, {5, 6, 7, 8}});

    const Panel unchanged = mask_history(p, {}, 2);
    CHECK(unchanged.same_content(p));

    const Panel masked = mask_history(p, {"a2"}, 2);
    CHECK_FALSE(masked.observed(0, 1));
    CHECK_FALSE(masked.observed(1, 1));
    CHECK(masked.observed(2, 1));
    CHECK(masked.observed(0, 0));

    // idempotent
    const Panel twice = mask_history(masked, {"a2"}, 2);
    CHECK(twice.same_content(masked));

    CHECK_THROWS_AS(mask_history(p, {"nope"}, 1), UnknownAttributeError);
    CHECK_THROWS_AS(mask_history(p, {"a1"}, 9), CutOutOfRangeError);
}

TEST_CASE("slice semantics and composition") {
    const Panel p = test::random_panel("p", 100, 3, 5);
    CHECK(slice(p, 0, 100).same_content(p));
    CHECK(slice(p, 0, 80).steps() == 80);
    CHECK_THROWS_AS(slice(p, 5, 5), InvalidRangeError);
    CHECK_THROWS_AS(slice(p, 5, 101), InvalidRangeError);

    // slice(slice(p,a,b),c,d) == slice(p,a+c,a+d)
    const Panel inner = slice(slice(p, 10, 60), 5, 20);
    CHECK(inner.same_content(slice(p, 15, 30)));
}

TEST_CASE("schema round trip and validation") {
    TempDir tmp("schema");
    AttributeSchema s;
    s.names = {"usage_1", "traffic_1", "total"};
    s.roles = {Role::machine_usage, Role::service_traffic, Role::total_traffic};
    s.known_future = {true, false, false};
    save_schema(s, tmp.path() / "schema.txt");
    const AttributeSchema t = load_schema(tmp.path() / "schema.txt");
    CHECK(t == s);
    CHECK(t.known_future_indices() == std::vector<std::size_t>{0});
    CHECK(t.forecast_indices() == std::vector<std::size_t>{1, 2});
    CHECK(t.total_traffic_index() == std::size_t{2});

    AttributeSchema dup;
    dup.names = {"x", "x"};
    dup.roles = {Role::other, Role::other};
    dup.known_future = {false, false};
    CHECK_THROWS_AS(dup.validate(), SchemaMismatchError);
}

TEST_CASE("fleet requires one shared schema") {
    Fleet fleet;
    fleet.panels.push_back(test::random_panel("a", 5, 2, 1));
    fleet.panels.push_back(test::random_panel("b", 7, 2, 2));
    CHECK_NOTHROW(fleet.validate());
    fleet.panels.push_back(test::random_panel("c", 5, 3, 3));
    CHECK_THROWS_AS(fleet.validate(), SchemaMismatchError);
}

TEST_CASE("read guard counts masked and future reads") {
    Panel p = test::panel_from_columns("p", {{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}}, 1);
    p = mask_history(p, {"a2"}, 2);

    {
        ReadGuard guard({"", 2, 2, {1, 0}});
        (void)p.value(1, 0);          // observed, past: fine
        CHECK(guard.masked_reads() == 0);
        CHECK(guard.future_reads() == 0);
        (void)p.value(0, 1);          // masked cell
        CHECK(guard.masked_reads() == 1);
        (void)p.value(3, 0);          // future read of known-future attr: allowed
        CHECK(guard.future_reads() == 0);
        (void)p.value(3, 1);          // future read of a forecast attr
        CHECK(guard.future_reads() == 1);
        (void)p.value(4, 0);          // within horizon
        CHECK(guard.future_reads() == 1);
    }
    // guard disarmed: no tracking, no crash
    (void)p.value(0, 1);
}
