#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cdf/errors.hpp"
#include "cdf/similarity.hpp"
#include "support/testutil.hpp"

using namespace cdf;

namespace {

std::vector<std::size_t> all_attrs(const Panel& p) {
    std::vector<std::size_t> out(p.attrs());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = j;
    return out;
}

// Two 2-d blobs at +/-center with the given spread.
std::vector<std::vector<double>> two_blobs(std::size_t n_per_blob, double center,
                                           double spread, Rng& rng) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < 2 * n_per_blob; ++i) {
        const double sign = i < n_per_blob ? 1.0 : -1.0;
        out.push_back({sign * center + spread * rng.normal(),
                       sign * center + spread * rng.normal()});
    }
    return out;
}

} // namespace

TEST_CASE("panel_features basics") {
    const Panel constant = test::panel_from_columns("c", {{4, 4, 4, 4}});
    const auto f = panel_features(constant, {0, 4}, all_attrs(constant));
    CHECK(f == std::vector<double>{4.0, 0.0, 0.0}); // mean, sd, autocorr

    // white noise: small lag-1 autocorrelation
    Rng rng(1);
    Matrix values(1000, 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values.data()[i] = rng.uniform_sigma(1.0);
    }
    const Panel noise("n", test::simple_schema(1), std::move(values));
    const auto nf = panel_features(noise, {0, 1000}, all_attrs(noise));
    CHECK(std::abs(nf[2]) < 0.1);

    // identical panels give identical features
    const Panel a = test::random_panel("a", 50, 3, 7);
    const Panel b = test::random_panel("b", 50, 3, 7);
    CHECK(panel_features(a, {0, 50}, all_attrs(a)) ==
          panel_features(b, {0, 50}, all_attrs(b)));

    Panel sparse = mask_history(constant, {"a1"}, 2);
    CHECK_THROWS_AS(panel_features(sparse, {0, 4}, all_attrs(sparse)),
                    InsufficientDataError);
}

TEST_CASE("commonly_observed respects masks") {
    Panel a = test::random_panel("a", 30, 3, 1);
    Panel b = test::random_panel("b", 30, 3, 2);
    a = mask_history(a, {"a2"}, 29);
    const Panel* panels[] = {&a, &b};
    const auto attrs = commonly_observed(panels, {0, 29});
    CHECK(attrs == std::vector<std::size_t>{0, 2});
}

TEST_CASE("gmm_fit closed form for a single component") {
    std::vector<std::vector<double>> data{{1.0, 5.0}, {3.0, 9.0}, {2.0, 7.0}};
    const GmmModel m = gmm_fit(data, 1, 0);
    CHECK(m.means[0][0] == doctest::Approx(2.0));
    CHECK(m.means[0][1] == doctest::Approx(7.0));
    // population variances: mean of squared deviations
    CHECK(m.variances[0][0] == doctest::Approx(2.0 / 3.0));
    CHECK(m.variances[0][1] == doctest::Approx(8.0 / 3.0));
    CHECK(m.weights[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(gmm_fit(data, 4, 0), TooFewSamplesError);
}

TEST_CASE("gmm_fit separates two blobs and EM is monotone") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(40 + seed);
        const auto data = two_blobs(20, 5.0, 0.3, rng);
        const GmmModel m = gmm_fit(data, 2, seed);

        for (std::size_t i = 1; i < m.ll_curve.size(); ++i) {
            CHECK(m.ll_curve[i] >= m.ll_curve[i - 1] - 1e-9);
        }
        // every point lands with its blob
        std::size_t first_cluster = 99;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto resp = gmm_responsibilities(m, data[i]);
            const std::size_t c =
                resp[0] > resp[1] ? 0 : 1;
            if (i == 0) {
                first_cluster = c;
            } else if (i < 20) {
                CHECK(c == first_cluster);
            } else {
                CHECK(c != first_cluster);
            }
        }
    }
}

TEST_CASE("gmm_rank orders by cluster then distance") {
    Rng rng(77);
    // candidates: two tight clusters; target sits in the first
    std::vector<std::pair<std::string, std::vector<double>>> candidates;
    std::vector<std::vector<double>> fit_data;
    const std::vector<double> target{5.0, 5.0};
    for (std::size_t i = 0; i < 10; ++i) {
        const double sign = i < 5 ? 1.0 : -1.0;
        std::vector<double> f{sign * 5.0 + 0.3 * rng.normal(),
                              sign * 5.0 + 0.3 * rng.normal()};
        candidates.emplace_back("c" + std::to_string(i), f);
        fit_data.push_back(f);
    }
    fit_data.push_back(target);
    const GmmModel m = gmm_fit(fit_data, 2, 1);
    const SimilarityRanking ranking = gmm_rank(target, m, candidates);

    CHECK(ranking.entries.size() == 10);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(ranking.entries[i].id[1] - '0' < 5); // same-blob candidates first
    }
    for (std::size_t i = 1; i < 10; ++i) {
        CHECK(ranking.entries[i - 1].score >= ranking.entries[i].score);
    }

    // exact-match candidate ranks first
    candidates.emplace_back("twin", target);
    const SimilarityRanking with_twin = gmm_rank(target, m, candidates);
    CHECK(with_twin.entries.front().id == "twin");

    // K = 1 degenerates to a pure distance ranking
    const GmmModel one = gmm_fit(fit_data, 1, 1);
    const SimilarityRanking flat = gmm_rank(target, one, candidates);
    CHECK(flat.entries.front().id == "twin");
    for (std::size_t i = 1; i < flat.entries.size(); ++i) {
        CHECK(flat.entries[i - 1].score >= flat.entries[i].score);
    }
}

TEST_CASE("eros self-similarity, symmetry, and range") {
    const TimeRange window{0, 60};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Panel a = test::random_panel("a", 60, 3, seed);
        const Panel b = test::random_panel("b", 60, 3, seed + 100);
        const auto attrs = all_attrs(a);
        Fleet fleet;
        fleet.panels = {a, b};
        const auto w = eros_weights(fleet, window, attrs);

        const double self = eros_similarity(a, a, w, window, attrs);
        CHECK(self == doctest::Approx(1.0).epsilon(1e-9));
        const double ab = eros_similarity(a, b, w, window, attrs);
        const double ba = eros_similarity(b, a, w, window, attrs);
        CHECK(std::abs(ab - ba) <= 1e-12);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0 + 1e-12);
    }
}

TEST_CASE("eros of rotated principal axes is zero") {
    // panel a varies along x, panel b along y; eigenbases are swapped
    Rng rng(5);
    Matrix va(80, 2), vb(80, 2);
    for (std::size_t t = 0; t < 80; ++t) {
        const double big = rng.uniform(-10, 10), tiny = rng.uniform(-0.1, 0.1);
        va(t, 0) = big;
        va(t, 1) = tiny;
        vb(t, 0) = rng.uniform(-0.1, 0.1);
        vb(t, 1) = rng.uniform(-10, 10);
    }
    const Panel a("a", test::simple_schema(2), std::move(va));
    const Panel b("b", test::simple_schema(2), std::move(vb));
    const std::vector<double> w{0.5, 0.5};
    const double score = eros_similarity(a, b, w, {0, 80}, all_attrs(a));
    CHECK(score < 0.05);
}

TEST_CASE("eros_weights normalization") {
    // single panel with a known diagonal covariance: eigenvalues ~ {3, 1}
    Rng rng(31);
    Matrix values(4000, 2);
    for (std::size_t t = 0; t < 4000; ++t) {
        values(t, 0) = rng.uniform_sigma(std::sqrt(3.0));
        values(t, 1) = rng.uniform_sigma(1.0);
    }
    const Panel p("p", test::simple_schema(2), std::move(values));
    Fleet fleet;
    fleet.panels = {p};
    const auto w = eros_weights(fleet, {0, 4000}, all_attrs(p));
    CHECK(w[0] == doctest::Approx(0.75).epsilon(0.05));
    CHECK(w[1] == doctest::Approx(0.25).epsilon(0.15));
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w[0] >= 0.0);
    CHECK(w[1] >= 0.0);

    // equal eigenvalues give uniform weights
    Rng rng2(32);
    Matrix iso(4000, 2);
    for (std::size_t i = 0; i < iso.size(); ++i) {
        iso.data()[i] = rng2.uniform_sigma(1.0);
    }
    const Panel q("q", test::simple_schema(2), std::move(iso));
    Fleet fleet2;
    fleet2.panels = {q};
    const auto wq = eros_weights(fleet2, {0, 4000}, all_attrs(q));
    CHECK(wq[0] == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("eros rejects degenerate covariance") {
    const Panel constant = test::panel_from_columns("c", {{1, 1, 1, 1}, {2, 3, 4, 5}});
    const std::vector<double> w{0.5, 0.5};
    CHECK_THROWS_AS(
        eros_similarity(constant, constant, w, {0, 4}, all_attrs(constant)),
        DegenerateCovarianceError);
}

TEST_CASE("manhattan distance") {
    const Panel x = test::panel_from_columns("x", {{3}});
    const Panel y = test::panel_from_columns("y", {{5}});
    CHECK(manhattan_distance(x, y, {0, 1}, all_attrs(x)) == 2.0);

    const Panel a = test::panel_from_columns("a", {{1, 2}, {3, 4}});
    const Panel b = test::panel_from_columns("b", {{2, 0}, {6, 5}});
    // |1-2| + |2-0| + |3-6| + |4-5| = 1 + 2 + 3 + 1 = 7
    CHECK(manhattan_distance(a, b, {0, 2}, all_attrs(a)) == 7.0);
    CHECK(manhattan_distance(a, a, {0, 2}, all_attrs(a)) == 0.0);

    CHECK_THROWS_AS(manhattan_distance(a, b, {0, 5}, all_attrs(a)),
                    LengthMismatchError);
}
