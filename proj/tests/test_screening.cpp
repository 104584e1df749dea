#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "acorsis/dataset.hpp"
#include "acorsis/rng.hpp"
#include "acorsis/screening.hpp"

using namespace acorsis;

namespace {

Matrix random_matrix(int n, int p, RngStream& rng) {
    Matrix x(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) x.at(i, j) = rng.normal();
    return x;
}

std::vector<double> random_vector(int n, RngStream& rng) {
    std::vector<double> v(n);
    for (double& e : v) e = rng.normal();
    return v;
}

// Effect score recomputed through the public one-pair operations, never the
// screening kernel: the independent oracle for acor and all_pairs_sis.
double brute_effect_score(const Dataset& ds, EffectIndex e) {
    std::vector<double> z = interaction_column(ds, e);
    try {
        if (ds.family == Family::gaussian) return std::fabs(pearson(z, ds.y));
        return std::fabs(binary_cor(z, ds.y, ds.n1));
    } catch (const zero_variance_error&) {
        return 0.0;
    }
}

std::pair<double, int> brute_acor(const Dataset& ds, int j) {
    double best = -1.0;
    int partner = 0;
    for (int k = 0; k <= ds.p; ++k) {
        if (k == j) continue;
        const EffectIndex e = k == 0 ? EffectIndex{0, j} : EffectIndex{std::min(j, k), std::max(j, k)};
        const double s = brute_effect_score(ds, e);
        if (s > best) {
            best = s;
            partner = k;
        }
    }
    return {best, partner};
}

std::vector<int> descending_order(const std::vector<double>& v) {
    std::vector<int> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (v[a] != v[b]) return v[a] > v[b];
        return a < b;
    });
    return order;
}

} // namespace

TEST_CASE("acor with a single variable reduces to the marginal correlation") {
    RngStream rng(21);
    const int n = 30;
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) {
        x.at(i, 0) = rng.normal();
        y[i] = x.at(i, 0);
    }
    Dataset ds = standardize(y, x, Family::gaussian);
    auto [score, partner] = acor(ds, 1);
    CHECK(score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(partner == 0);
}

TEST_CASE("acor on a 4-point orthogonal design") {
    // x1, x2 orthogonal two-level columns; their product is a third contrast.
    Matrix x(4, 2);
    const double a[4] = {1, 1, -1, -1};
    const double b[4] = {1, -1, 1, -1};
    for (int i = 0; i < 4; ++i) {
        x.at(i, 0) = a[i];
        x.at(i, 1) = b[i];
    }
    SUBCASE("y equal to the product: both variables score 1 through each other") {
        Dataset ds = standardize({1.0, -1.0, -1.0, 1.0}, x, Family::gaussian);
        auto [s1, p1] = acor(ds, 1);
        auto [s2, p2] = acor(ds, 2);
        CHECK(s1 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p1 == 2);
        CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p2 == 1);
        // the marginal correlations vanish on this design
        CHECK(std::fabs(pearson(ds.x(1), ds.y)) < 1e-12);
        CHECK(std::fabs(pearson(ds.x(2), ds.y)) < 1e-12);
    }
    SUBCASE("y orthogonal to every candidate scores 0") {
        Matrix x1(4, 1);
        for (int i = 0; i < 4; ++i) x1.at(i, 0) = a[i];
        Dataset ds = standardize({1.0, -1.0, 1.0, -1.0}, x1, Family::gaussian);
        auto [s1, p1] = acor(ds, 1); // only candidate is the main effect
        CHECK(s1 == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(p1 == 0);
    }
}

TEST_CASE("acor matches the brute-force pair enumeration") {
    RngStream rng(22);
    const int n = 20, p = 6;
    Dataset ds = standardize(random_vector(n, rng), random_matrix(n, p, rng), Family::gaussian);
    for (int j = 1; j <= p; ++j) {
        auto [score, partner] = acor(ds, j);
        auto [bscore, bpartner] = brute_acor(ds, j);
        CHECK(score == doctest::Approx(bscore).epsilon(1e-12));
        CHECK(partner == bpartner);
    }
    CHECK_THROWS_AS(acor(ds, 0), index_error);
    CHECK_THROWS_AS(acor(ds, p + 1), index_error);
}

TEST_CASE("acor_all agrees with per-variable calls and is thread-count invariant") {
    RngStream rng(23);
    const int n = 25, p = 8;
    Dataset ds = standardize(random_vector(n, rng), random_matrix(n, p, rng), Family::gaussian);
    AcorScores one = acor_all(ds, 1);
    AcorScores eight = acor_all(ds, 8);
    for (int j = 1; j <= p; ++j) {
        auto [score, partner] = acor(ds, j);
        CHECK(one.scores[j - 1] == score); // same kernel, bitwise
        CHECK(one.argmax_partner[j - 1] == partner);
        CHECK(one.scores[j - 1] == eight.scores[j - 1]);
        CHECK(one.argmax_partner[j - 1] == eight.argmax_partner[j - 1]);
        CHECK(one.scores[j - 1] >= 0.0);
        CHECK(one.scores[j - 1] <= 1.0);
    }
}

TEST_CASE("acor_all scores equal the reported pair correlation") {
    RngStream rng(24);
    const int n = 40, p = 5;
    Dataset ds = standardize(random_vector(n, rng), random_matrix(n, p, rng), Family::gaussian);
    AcorScores s = acor_all(ds, 2);
    for (int j = 1; j <= p; ++j) {
        const int k = s.argmax_partner[j - 1];
        const EffectIndex e = k == 0 ? EffectIndex{0, j} : EffectIndex{std::min(j, k), std::max(j, k)};
        std::vector<double> z = interaction_column(ds, e);
        CHECK(s.scores[j - 1] == doctest::Approx(std::fabs(pearson(z, ds.y))).epsilon(1e-12));
    }
}

TEST_CASE("acor_all completes a 200 x 2000 screen inside a generous ceiling") {
    RngStream rng(25);
    const int n = 200, p = 2000;
    Dataset ds = standardize(random_vector(n, rng), random_matrix(n, p, rng), Family::gaussian);
    const auto start = std::chrono::steady_clock::now();
    AcorScores s = acor_all(ds, 1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(static_cast<int>(s.scores.size()) == p);
    CHECK(secs < 120.0);
    MESSAGE("acor_all n=200 p=2000 took ", secs, " s");
}

TEST_CASE("shrunk_variable_set selects by score with index tie-break") {
    AcorScores s;
    s.n = 200;
    SUBCASE("gamma = 1/log n gives d = 37 at n = 200") {
        s.scores.assign(300, 0.0);
        ShrunkSet set = shrunk_variable_set(s, ScreenBudget::default_for(200));
        CHECK(set.d == 37);
        CHECK(static_cast<int>(set.indices.size()) == 37);
    }
    SUBCASE("direct ranking") {
        s.scores = {0.9, 0.1, 0.5};
        ShrunkSet set = shrunk_variable_set(s, ScreenBudget::from_d(2));
        CHECK(set.indices == std::vector<int>{1, 3});
    }
    SUBCASE("ties break by ascending index") {
        s.scores = {0.5, 0.5, 0.5};
        ShrunkSet set = shrunk_variable_set(s, ScreenBudget::from_d(2));
        CHECK(set.indices == std::vector<int>{1, 2});
    }
    SUBCASE("clamped when d exceeds p") {
        s.scores = {0.3, 0.2};
        ShrunkSet set = shrunk_variable_set(s, ScreenBudget::from_d(5));
        CHECK(set.indices == std::vector<int>{1, 2});
        CHECK(set.clamped);
    }
    SUBCASE("invalid budgets") {
        s.scores = {0.3, 0.2};
        CHECK_THROWS_AS(shrunk_variable_set(s, ScreenBudget::from_gamma(0.0)), invalid_gamma_error);
        CHECK_THROWS_AS(shrunk_variable_set(s, ScreenBudget::from_gamma(1.5)), invalid_gamma_error);
        CHECK_THROWS_AS(shrunk_variable_set(s, ScreenBudget::from_d(0)), invalid_gamma_error);
        s.n = 10;
        CHECK_THROWS_AS(shrunk_variable_set(s, ScreenBudget::from_gamma(0.05)), invalid_gamma_error);
    }
}

TEST_CASE("enlarging the budget never drops an index") {
    RngStream rng(26);
    AcorScores s;
    s.n = 100;
    s.scores = random_vector(40, rng);
    for (double& v : s.scores) v = std::fabs(v);
    std::vector<int> previous;
    for (int d = 1; d <= 40; ++d) {
        ShrunkSet set = shrunk_variable_set(s, ScreenBudget::from_d(d));
        for (int idx : previous) CHECK(set.contains(idx));
        previous = set.indices;
    }
}

TEST_CASE("all_pairs_sis keeps everything when d covers all candidates") {
    RngStream rng(27);
    const int n = 12, p = 2;
    Dataset ds = standardize(random_vector(n, rng), random_matrix(n, p, rng), Family::gaussian);
    EffectSet set = all_pairs_sis(ds, 3);
    REQUIRE(set.effects.size() == 3);
    CHECK(set.effects[0] == EffectIndex{0, 1});
    CHECK(set.effects[1] == EffectIndex{0, 2});
    CHECK(set.effects[2] == EffectIndex{1, 2});
}

TEST_CASE("all_pairs_sis finds a perfectly correlated product first") {
    RngStream rng(28);
    const int n = 30, p = 4;
    Matrix x = random_matrix(n, p, rng);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = x.at(i, 0) * x.at(i, 1);
    Dataset ds = standardize(y, x, Family::gaussian);
    EffectSet set = all_pairs_sis(ds, 1);
    REQUIRE(set.effects.size() == 1);
    CHECK(set.effects[0].j == 1);
    CHECK(set.effects[0].k == 2);
}

TEST_CASE("all_pairs_sis matches the exhaustive ranking oracle") {
    RngStream rng(29);
    const int n = 20, p = 5;
    Dataset ds = standardize(random_vector(n, rng), random_matrix(n, p, rng), Family::gaussian);

    struct Entry {
        double score;
        EffectIndex e;
    };
    std::vector<Entry> entries;
    for (int j = 0; j < p; ++j)
        for (int k = j + 1; k <= p; ++k) entries.push_back({brute_effect_score(ds, {j, k}), {j, k}});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.e < b.e;
    });

    for (int d : {1, 3, 7, 15}) {
        EffectSet set = all_pairs_sis(ds, d, 3);
        std::vector<EffectIndex> expect;
        for (int t = 0; t < d && t < static_cast<int>(entries.size()); ++t) expect.push_back(entries[t].e);
        std::sort(expect.begin(), expect.end());
        CHECK(set.effects == expect);
    }
}

TEST_CASE("effect-set hierarchy helpers") {
    EffectSet set;
    set.effects = {{0, 1}, {0, 2}, {1, 2}};
    CHECK_FALSE(set.hierarchy_incomplete());
    CHECK(set.variables() == std::vector<int>{1, 2});
    set.effects = {{0, 1}, {1, 2}};
    CHECK(set.hierarchy_incomplete()); // (1,2) kept but main (0,2) missing
    CHECK(set.variables() == std::vector<int>{1, 2});
}

TEST_CASE("binary_cor follows the printed formula") {
    std::vector<double> z = {1, 2, 3, 4};
    std::vector<double> y = {1, 1, 0, 0};
    const double got = binary_cor(z, y, 2);
    // numerator  ((n-n1)/n)*(-2) - (n1/n)*(+2) = -2
    // denominator sqrt(5 * (2 - 1 + 1)) = sqrt(10)
    CHECK(got == doctest::Approx(-2.0 / std::sqrt(10.0)).epsilon(1e-12));

    // Not the Pearson correlation against the 0/1 response; the gap is the
    // documented diagnostic, and the magnitude never exceeds Pearson's.
    const double rho = pearson(z, y);
    CHECK(std::fabs(got - rho) > 0.1);
    CHECK(std::fabs(got) <= std::fabs(rho) + 1e-15);
}

TEST_CASE("binary_cor rejects degenerate input") {
    std::vector<double> z = {1, 2, 3, 4};
    CHECK_THROWS_AS(binary_cor(z, std::vector<double>{1, 1, 1, 1}, 4), degenerate_response_error);
    CHECK_THROWS_AS(binary_cor(z, std::vector<double>{0, 0, 0, 0}, 0), degenerate_response_error);
    CHECK_THROWS_AS(binary_cor(z, std::vector<double>{1, 1, 0, 0}, 3), degenerate_response_error);
    std::vector<double> constant(4, 1.25);
    CHECK_THROWS_AS(binary_cor(constant, std::vector<double>{1, 1, 0, 0}, 2), zero_variance_error);
}

TEST_CASE("binary_acor_all matches brute force and is thread invariant") {
    RngStream rng(30);
    const int n = 24, p = 5;
    Matrix x = random_matrix(n, p, rng);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    y[0] = 1.0;
    y[1] = 0.0;
    Dataset ds = standardize(y, x, Family::binomial);

    AcorScores s1 = binary_acor_all(ds, 1);
    AcorScores s4 = binary_acor_all(ds, 4);
    for (int j = 1; j <= p; ++j) {
        auto [bscore, bpartner] = brute_acor(ds, j);
        CHECK(s1.scores[j - 1] == doctest::Approx(bscore).epsilon(1e-12));
        CHECK(s1.argmax_partner[j - 1] == bpartner);
        CHECK(s1.scores[j - 1] == s4.scores[j - 1]);
        CHECK(s1.argmax_partner[j - 1] == s4.argmax_partner[j - 1]);
    }
    RngStream rng2(301);
    CHECK_THROWS_AS(binary_acor_all(standardize(random_vector(n, rng2), random_matrix(n, 2, rng2), Family::gaussian)),
                    degenerate_response_error);
}

TEST_CASE("variable ranking by acor equals ranking by the max |t| statistic") {
    RngStream rng(31);
    const int n = 26, p = 6;
    Dataset ds = standardize(random_vector(n, rng), random_matrix(n, p, rng), Family::gaussian);
    AcorScores s = acor_all(ds);

    std::vector<double> tmax(p, -1.0);
    for (int j = 1; j <= p; ++j) {
        for (int k = 0; k <= p; ++k) {
            if (k == j) continue;
            const EffectIndex e = k == 0 ? EffectIndex{0, j} : EffectIndex{std::min(j, k), std::max(j, k)};
            const double r = brute_effect_score(ds, e);
            const double t = r / std::sqrt((1.0 - r * r) / (n - 2));
            tmax[j - 1] = std::max(tmax[j - 1], std::fabs(t));
        }
    }
    CHECK(descending_order(s.scores) == descending_order(tmax));
}

TEST_CASE("aggregated_lrt ranks gaussian variables exactly like acor") {
    RngStream rng(32);
    const int n = 30, p = 5;
    Matrix x = random_matrix(n, p, rng);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = 1.5 * x.at(i, 0) + x.at(i, 1) * x.at(i, 2) + rng.normal();
    Dataset ds = standardize(y, x, Family::gaussian);
    AcorScores s = acor_all(ds);
    AggregatedLrt lrt = aggregated_lrt(ds);
    CHECK(descending_order(s.scores) == descending_order(lrt.values));
    CHECK(lrt.argmax_partner == s.argmax_partner);
}

TEST_CASE("aggregated_lrt on independent binary labels stays at the chi-square-1 scale") {
    RngStream rng(33);
    const int n = 60, p = 1;
    double total = 0.0;
    const int sims = 60;
    for (int s = 0; s < sims; ++s) {
        Matrix x = random_matrix(n, p, rng);
        std::vector<double> y(n);
        for (int i = 0; i < n; ++i) y[i] = i % 2 == 0 ? 1.0 : 0.0; // balanced, independent of x
        Dataset ds = standardize(y, x, Family::binomial);
        AggregatedLrt lrt = aggregated_lrt(ds);
        total += lrt.values[0];
    }
    const double mean = total / sims;
    CHECK(mean > 0.2);
    CHECK(mean < 2.5);
}

TEST_CASE("aggregated_lrt caps a separated fit at the null deviance") {
    RngStream rng(34);
    const int n = 40, p = 1;
    Matrix x = random_matrix(n, p, rng);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = x.at(i, 0) > 0 ? 1.0 : 0.0;
    Dataset ds = standardize(y, x, Family::binomial);
    AggregatedLrt lrt = aggregated_lrt(ds);
    CHECK(lrt.separations > 0);
    CHECK(lrt.values[0] == doctest::Approx(binomial_null_deviance(ds.y)).epsilon(1e-12));
}

TEST_CASE("zero-variance products are scored zero with a warning count") {
    // two-level columns whose product is constant: x2 = -x1 pattern
    Matrix x(6, 2);
    const double a[6] = {1, -1, 1, -1, 1, -1};
    for (int i = 0; i < 6; ++i) {
        x.at(i, 0) = a[i];
        x.at(i, 1) = -a[i];
    }
    std::vector<double> y = {2.0, 1.0, 2.2, 0.8, 1.9, 1.1};
    Dataset ds = standardize(y, x, Family::gaussian);
    AcorScores s = acor_all(ds);
    CHECK(s.zero_variance_pairs == 2); // the (1,2) product, seen from both sides
    // the products are constant, so each max must come from the main effect
    CHECK(s.argmax_partner[0] == 0);
    CHECK(s.argmax_partner[1] == 0);
}
