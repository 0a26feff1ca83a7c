#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "fairdiv/shares.hpp"

using namespace fairdiv;

namespace {

XOSValuation additive(std::vector<double> values) {
    return XOSValuation({std::move(values)});
}

Instance random_instance(uint64_t seed, int n, int m, int cmax = 3) {
    GeneratorSpec spec;
    spec.n = n;
    spec.m = m;
    spec.clauses_min = 1;
    spec.clauses_max = cmax;
    spec.value_min = 0.05;
    spec.value_max = 1.0;
    return generate_instance(spec, seed);
}

// Second, structurally different exhaustive search: recursive assignment of
// the first bundle as a subset mask, memoized on (agents, mask).
double mms_oracle(const XOSValuation& v, int n, uint64_t mask,
                  std::map<std::pair<int, uint64_t>, double>& memo) {
    if (n == 1) {
        Bundle b(mask);
        return v.value(b);
    }
    auto key = std::make_pair(n, mask);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    double best = 0.0;
    uint64_t sub = mask;
    while (true) {
        double cand = std::min(v.value(Bundle(sub)),
                               mms_oracle(v, n - 1, mask & ~sub, memo));
        best = std::max(best, cand);
        if (sub == 0) break;
        sub = (sub - 1) & mask;
    }
    memo[key] = best;
    return best;
}

double mms_oracle(const XOSValuation& v, int n, Bundle items) {
    std::map<std::pair<int, uint64_t>, double> memo;
    return mms_oracle(v, n, items.bits(), memo);
}

}  // namespace

TEST_CASE("mms: additive {3,2,1} split for two agents") {
    XOSValuation v = additive({3, 2, 1});
    ShareResult r = compute_mms(v, 2, Bundle::full(3));
    CHECK(r.value == doctest::Approx(3.0));
    REQUIRE(r.partition.size() == 2);
    // the only split achieving min 3: {0} vs {1,2}
    bool ok = (r.partition[0] == Bundle::from_items({0}) &&
               r.partition[1] == Bundle::from_items({1, 2})) ||
              (r.partition[1] == Bundle::from_items({0}) &&
               r.partition[0] == Bundle::from_items({1, 2}));
    CHECK(ok);
}

TEST_CASE("mms: single agent gets the full value") {
    Instance inst = random_instance(3, 1, 6);
    const XOSValuation& v = inst.valuations[0];
    ShareResult r = compute_mms(v, 1, Bundle::full(6));
    CHECK(r.value == doctest::Approx(v.value(Bundle::full(6))));
}

TEST_CASE("mms matches the recursive-assignment oracle") {
    for (uint64_t seed = 0; seed < 12; ++seed) {
        Instance inst = random_instance(100 + seed, 1, 7, 3);
        const XOSValuation& v = inst.valuations[0];
        ShareResult r = compute_mms(v, 3, Bundle::full(7));
        CHECK(r.value == doctest::Approx(mms_oracle(v, 3, Bundle::full(7))));
        // witness partitions the items exactly and attains the value
        Bundle all;
        double mn = std::numeric_limits<double>::infinity();
        for (const auto& b : r.partition) {
            CHECK_FALSE(all.intersects(b));
            all = all | b;
            mn = std::min(mn, v.value(b));
        }
        CHECK(all == Bundle::full(7));
        CHECK(mn == doctest::Approx(r.value));
    }
}

TEST_CASE("mms guards its search size") {
    XOSValuation v = additive(std::vector<double>(13, 1.0));
    CHECK_THROWS_AS(compute_mms(v, 2, Bundle::full(13)), CapacityError);
    CHECK_THROWS_AS(compute_mms(additive({1.0}), 7, Bundle::full(1)), CapacityError);
}

TEST_CASE("aps: n identical unit items") {
    for (int n : {2, 3, 4}) {
        XOSValuation v = additive(std::vector<double>(n, 1.0));
        ShareResult r = compute_aps(v, n, Bundle::full(n));
        CHECK(r.value == doctest::Approx(1.0));
        r.fractional.validate();
    }
}

TEST_CASE("aps: single agent takes everything") {
    Instance inst = random_instance(5, 1, 6);
    const XOSValuation& v = inst.valuations[0];
    ShareResult r = compute_aps(v, 1, Bundle::full(6));
    CHECK(r.value == doctest::Approx(v.value(Bundle::full(6))));
}

TEST_CASE("aps witness has exact coverage and small support") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Instance inst = random_instance(200 + seed, 3, 8);
        const XOSValuation& v = inst.valuations[0];
        ShareResult r = compute_aps(v, 3, Bundle::full(8));
        r.fractional.validate();
        CHECK(static_cast<int>(r.fractional.entries.size()) <= 8 + 1);
        for (int e = 0; e < 8; ++e)
            CHECK(r.fractional.coverage(e) == doctest::Approx(1.0 / 3).epsilon(1e-7));
        CHECK(r.fractional.min_value(v) == doctest::Approx(r.value));
    }
}

TEST_CASE("aps enumeration is capped") {
    XOSValuation wide(std::vector<std::vector<double>>{std::vector<double>(17, 1.0)});
    CHECK_THROWS_AS(compute_aps(wide, 2, Bundle::full(17)), CapacityError);
}

TEST_CASE("aps dominates mms; strict on a two-clause overlap instance") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        Instance inst = random_instance(300 + seed, 3, 7, 4);
        const XOSValuation& v = inst.valuations[0];
        double aps = compute_aps(v, 3, Bundle::full(7)).value;
        double mms = compute_mms(v, 3, Bundle::full(7)).value;
        CHECK(aps >= mms - kValueTol);
        CHECK(mms >= (11.0 / 40.0) * aps - kValueTol);
    }
    // a fractional cover beats every hard 3-partition here
    XOSValuation v({{2, 2, 1, 2, 1, 1}, {1, 1, 2, 1, 2, 2}});
    double aps = compute_aps(v, 3, Bundle::full(6)).value;
    double mms = compute_mms(v, 3, Bundle::full(6)).value;
    CHECK(aps == doctest::Approx(4.0));
    CHECK(mms == doctest::Approx(3.0));
}

TEST_CASE("aps is scale equivariant") {
    Instance inst = random_instance(17, 2, 6);
    const XOSValuation& v = inst.valuations[0];
    double base = compute_aps(v, 2, Bundle::full(6)).value;
    for (double c : {0.25, 5.0}) {
        std::vector<std::vector<double>> clauses;
        for (const auto& cl : v.clauses()) {
            std::vector<double> row;
            for (double x : cl) row.push_back(c * x);
            clauses.push_back(std::move(row));
        }
        double scaled = compute_aps(XOSValuation(clauses), 2, Bundle::full(6)).value;
        CHECK(scaled == doctest::Approx(c * base).epsilon(1e-9));
    }
}

TEST_CASE("normalize_aps: normalized additive instance stays put") {
    XOSValuation v = additive({1.0, 1.0});
    NormalizedValuation nv = normalize_aps(v, 2, Bundle::full(2));
    CHECK(nv.scale == doctest::Approx(1.0));
    for (const auto& s : nv.support) {
        CHECK(nv.valuation.value(s.bundle) == doctest::Approx(1.0));
        CHECK(nv.additive_value(static_cast<int>(&s - nv.support.data()), s.bundle) ==
              doctest::Approx(1.0));
    }
}

TEST_CASE("normalize_aps is scale invariant") {
    Instance inst = random_instance(23, 3, 6);
    const XOSValuation& v = inst.valuations[0];
    NormalizedValuation a = normalize_aps(v, 3, Bundle::full(6));
    std::vector<std::vector<double>> clauses;
    for (const auto& cl : v.clauses()) {
        std::vector<double> row;
        for (double x : cl) row.push_back(5.0 * x);
        clauses.push_back(std::move(row));
    }
    NormalizedValuation b = normalize_aps(XOSValuation(clauses), 3, Bundle::full(6));
    CHECK(a.scale * 5.0 == doctest::Approx(b.scale));
    REQUIRE(a.support.size() == b.support.size());
    for (size_t s = 0; s < a.support.size(); ++s) {
        CHECK(a.support[s].bundle == b.support[s].bundle);
        CHECK(a.support[s].weight == doctest::Approx(b.support[s].weight));
        for (int e = 0; e < 6; ++e)
            CHECK(a.support[s].additive[e] == doctest::Approx(b.support[s].additive[e]));
    }
}

TEST_CASE("normalize_aps invariants on random instances") {
    Rng rng(4);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Instance inst = random_instance(400 + seed, 3, 7);
        const XOSValuation& v = inst.valuations[0];
        NormalizedValuation nv = normalize_aps(v, 3, Bundle::full(7));
        CHECK(static_cast<int>(nv.support.size()) <= 7 + 1);
        for (size_t s = 0; s < nv.support.size(); ++s) {
            CHECK(nv.additive_value(static_cast<int>(s), nv.support[s].bundle) ==
                  doctest::Approx(1.0));
            CHECK(nv.valuation.value(nv.support[s].bundle) == doctest::Approx(1.0));
        }
        // pointwise below v / APS on sampled bundles
        for (int t = 0; t < 30; ++t) {
            Bundle b(rng.u64() & ((1u << 7) - 1));
            CHECK(nv.valuation.value(b) <= v.value(b) / nv.scale + 1e-9);
        }
        // beta over the untouched partition is exactly 1
        std::vector<Bundle> current;
        for (const auto& s : nv.support) current.push_back(s.bundle);
        CHECK(nv.beta(current) == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(normalize_aps(additive({0.0, 0.0}), 2, Bundle::full(2)),
                    DegenerateError);
}

TEST_CASE("strip_big_items: identity when nothing is big") {
    // four items of equal weight: every item is worth 1/2 of APS=1 at n=2,
    // which stays below alpha * APS only for alpha above 1/2
    XOSValuation v = additive({0.5, 0.5, 0.5, 0.5});
    Instance inst{2, 4, {v, v}};
    BigItemReduction red = strip_big_items(inst, 0.6);
    CHECK(red.grants.empty());
    CHECK(red.residual.n == 2);
    CHECK(red.residual.m == 4);
}

TEST_CASE("strip_big_items: one agent, one item") {
    Instance inst{1, 1, {additive({1.0})}};
    BigItemReduction red = strip_big_items(inst, 0.3);
    REQUIRE(red.grants.size() == 1);
    CHECK(red.grants[0].agent == 0);
    CHECK(red.grants[0].item == 0);
    CHECK(red.residual.n == 0);
}

TEST_CASE("strip_big_items keeps residual shares up") {
    GeneratorSpec spec;
    spec.n = 3;
    spec.m = 7;
    spec.big_item_fraction = 0.4;  // one planted big item
    spec.big_item_alpha = 0.5;
    Instance inst = generate_instance(spec, 9);
    BigItemReduction red = strip_big_items(inst, 0.3);
    CHECK(!red.grants.empty());
    for (size_t i = 0; i < red.residual_aps.size(); ++i)
        CHECK(red.residual_aps[i] >= red.original_aps[red.agent_map[i]] - kValueTol);
}

TEST_CASE("reweight_after_removal follows the transfer formula") {
    // two disjoint bundles at weight 1/2 each; removing an item of the first
    // forces all weight onto the second
    FractionalPartition fp;
    fp.entitlement = 0.5;
    fp.entries.push_back({Bundle::from_items({0, 1}), 0.5});
    fp.entries.push_back({Bundle::from_items({2, 3}), 0.5});
    FractionalPartition out = reweight_after_removal(fp, 0, 2);
    REQUIRE(out.entries.size() == 1);
    CHECK(out.entries[0].bundle == Bundle::from_items({2, 3}));
    CHECK(out.entries[0].weight == doctest::Approx(1.0));
    CHECK(out.entitlement == doctest::Approx(1.0));

    // item in no support bundle: weights scale by n/(n-1)
    FractionalPartition fp2;
    fp2.entitlement = 1.0 / 3;
    fp2.entries.push_back({Bundle::from_items({0}), 1.0 / 3});
    fp2.entries.push_back({Bundle::from_items({1}), 1.0 / 3});
    fp2.entries.push_back({Bundle::from_items({2}), 1.0 / 3});
    FractionalPartition out2 = reweight_after_removal(fp2, 5, 3);
    for (const auto& e : out2.entries)
        CHECK(e.weight == doctest::Approx((1.0 / 3) * 3.0 / 2.0));

    // degenerate: every bundle holds the removed item
    FractionalPartition fp3;
    fp3.entitlement = 0.5;
    fp3.entries.push_back({Bundle::from_items({0, 1}), 1.0});
    CHECK_THROWS_AS(reweight_after_removal(fp3, 0, 2), DegenerateError);
}

TEST_CASE("reweight identities on exact-coverage partitions") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        Instance inst = random_instance(500 + seed, 3, 7);
        ShareResult aps = compute_aps(inst.valuations[0], 3, Bundle::full(7));
        if (aps.value <= kValueTol) continue;
        FractionalPartition fp = aps.fractional;
        int item = static_cast<int>(seed % 7);
        FractionalPartition out = reweight_after_removal(fp, item, 3);
        CHECK(out.total_weight() == doctest::Approx(1.0));
        for (int e = 0; e < 7; ++e)
            CHECK(out.coverage(e) <= 1.0 / 2 + kValueTol);
        // min surviving value never drops
        CHECK(out.min_value(inst.valuations[0]) >=
              fp.min_value(inst.valuations[0]) - kValueTol);
    }
}
