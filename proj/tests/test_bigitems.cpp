#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fairdiv/bigitems.hpp"
#include "fairdiv/harness.hpp"
#include "fairdiv/processes.hpp"

using namespace fairdiv;

namespace {

BigItemGraph make_graph(int n, int w, const std::vector<std::pair<int, int>>& edges) {
    BigItemGraph g;
    g.n = n;
    for (int i = 0; i < w; ++i) g.items.push_back(i);
    g.adj.assign(n, {});
    for (auto [u, e] : edges) g.adj[u].push_back(e);
    for (auto& a : g.adj) std::sort(a.begin(), a.end());
    return g;
}

BigItemGraph random_graph(uint64_t seed, int n, int w, double p) {
    Rng rng(seed);
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int e = 0; e < w; ++e)
            if (rng.uniform() < p) edges.push_back({u, e});
    return make_graph(n, w, edges);
}

// Exponential matching oracle for tiny graphs.
int brute_matching(const BigItemGraph& g, int u, uint64_t used) {
    if (u == g.n) return 0;
    int best = brute_matching(g, u + 1, used);
    for (int e : g.adj[u])
        if (!((used >> e) & 1))
            best = std::max(best,
                            1 + brute_matching(g, u + 1, used | (uint64_t{1} << e)));
    return best;
}

bool is_matching_valid(const BigItemGraph& g, const Matching& m) {
    std::vector<char> used(g.w_size(), 0);
    for (int u = 0; u < g.n; ++u) {
        int e = m.agent_to_item[u];
        if (e < 0) continue;
        if (used[e]) return false;
        used[e] = 1;
        if (!std::binary_search(g.adj[u].begin(), g.adj[u].end(), e)) return false;
        if (m.item_to_agent[e] != u) return false;
    }
    return true;
}

bool is_maximal(const BigItemGraph& g, const Matching& m) {
    for (int u = 0; u < g.n; ++u) {
        if (m.agent_to_item[u] >= 0) continue;
        for (int e : g.adj[u])
            if (m.item_to_agent[e] < 0) return false;
    }
    return true;
}

void audit_case(const BigItemGraph& g, const CaseResult& cs, double eps, Rng& rng) {
    int n = g.n;
    REQUIRE(cs.which >= 1);
    REQUIRE(cs.which <= 4);
    if (cs.which == 1) {
        CHECK(is_matching_valid(g, cs.matching));
        CHECK(cs.matching.size == n);
        return;
    }
    if (cs.which == 2) {
        CHECK(is_matching_valid(g, cs.matching));
        CHECK(is_maximal(g, cs.matching));
        CHECK(cs.matching.size <= (1.0 - eps) * n + 1e-9);
        return;
    }
    CHECK(is_matching_valid(g, cs.matching));
    CHECK(cs.u1.size() == cs.w1.size());
    for (size_t t = 0; t < cs.u1.size(); ++t)
        CHECK(cs.matching.agent_to_item[cs.u1[t]] >= 0);
    if (cs.which == 3) {
        CHECK(is_maximal(g, cs.matching));
        for (int u : cs.u2)
            CHECK(g.degree(u) <= n - 3 * static_cast<int>(cs.u2.size()));
        CHECK(cs.u1.size() + cs.u2.size() == static_cast<size_t>(n));
        return;
    }
    // case 4
    CHECK(cs.u1.size() + cs.u2.size() + cs.u3.size() == static_cast<size_t>(n));
    CHECK(cs.w1.size() + cs.w2.size() + cs.w3.size() ==
          static_cast<size_t>(g.w_size()));
    std::vector<char> in_w2(g.w_size(), 0), in_w3(g.w_size(), 0);
    for (int w : cs.w2) in_w2[w] = 1;
    for (int w : cs.w3) in_w3[w] = 1;
    for (int u : cs.u2)
        for (int e : g.adj[u]) CHECK_FALSE(in_w3[e]);
    for (int u : cs.u3)
        for (int e : g.adj[u]) {
            CHECK_FALSE(in_w2[e]);
            CHECK_FALSE(in_w3[e]);
        }
    CHECK(static_cast<double>(cs.w2.size()) >= (1.0 - 60.0 * eps) * n - 1e-9);
    CHECK(cs.w2.size() < cs.u2.size());

    // sampled universal-matching checks for subsets of u2 of size |w2|
    std::vector<char> allowed_item(g.w_size(), 0);
    for (int w : cs.w2) allowed_item[w] = 1;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> pool = cs.u2;
        for (size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[rng.index(static_cast<int>(i))]);
        pool.resize(cs.w2.size());
        std::vector<char> allowed_agent(n, 0);
        for (int u : pool) allowed_agent[u] = 1;
        BigItemGraph filtered = g;
        for (int u = 0; u < n; ++u)
            if (!allowed_agent[u]) filtered.adj[u].clear();
        for (auto& adj : filtered.adj) {
            std::vector<int> keep;
            for (int e : adj)
                if (allowed_item[e]) keep.push_back(e);
            adj = keep;
        }
        Matching mm = max_matching(filtered);
        CHECK(mm.size == static_cast<int>(cs.w2.size()));
    }
    // exact Hall surplus when the side is small: every nonempty pool subset
    // needs |U2|-|W2| spare neighbors
    if (cs.u2.size() <= 20 && cs.w2.size() <= 20) {
        int k0 = static_cast<int>(cs.u2.size() - cs.w2.size());
        std::vector<uint64_t> nb(cs.w2.size(), 0);
        for (size_t wi = 0; wi < cs.w2.size(); ++wi)
            for (size_t ui = 0; ui < cs.u2.size(); ++ui)
                if (std::binary_search(g.adj[cs.u2[ui]].begin(),
                                       g.adj[cs.u2[ui]].end(), cs.w2[wi]))
                    nb[wi] |= uint64_t{1} << ui;
        for (uint64_t mask = 1; mask < (uint64_t{1} << cs.w2.size()); ++mask) {
            uint64_t un = 0;
            int size = 0;
            for (size_t wi = 0; wi < cs.w2.size(); ++wi)
                if ((mask >> wi) & 1) {
                    un |= nb[wi];
                    ++size;
                }
            CHECK(__builtin_popcountll(un) >= size + k0);
        }
    }
}

}  // namespace

TEST_CASE("matchings: complete and empty graphs") {
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < 5; ++u)
        for (int e = 0; e < 6; ++e) edges.push_back({u, e});
    BigItemGraph comp = make_graph(5, 6, edges);
    CHECK(max_matching(comp).size == 5);

    BigItemGraph empty = make_graph(4, 5, {});
    Matching m = max_matching(empty);
    CHECK(m.size == 0);
    CHECK(is_maximal(empty, m));
}

TEST_CASE("max matching equals the brute-force oracle") {
    for (uint64_t seed = 0; seed < 40; ++seed) {
        BigItemGraph g = random_graph(4000 + seed, 3 + seed % 6, 4 + seed % 5,
                                      0.15 + 0.1 * (seed % 7));
        Matching m = max_matching(g);
        CHECK(is_matching_valid(g, m));
        CHECK(m.size == brute_matching(g, 0, 0));
    }
}

TEST_CASE("maximal_matching extends a preseed without disturbing it") {
    BigItemGraph g = random_graph(4100, 6, 8, 0.4);
    Matching seed;
    seed.agent_to_item.assign(6, -1);
    seed.item_to_agent.assign(8, -1);
    if (!g.adj[2].empty()) {
        seed.agent_to_item[2] = g.adj[2][0];
        seed.item_to_agent[g.adj[2][0]] = 2;
        seed.size = 1;
    }
    Matching m = maximal_matching(g, seed);
    CHECK(is_matching_valid(g, m));
    CHECK(is_maximal(g, m));
    if (seed.size == 1) CHECK(m.agent_to_item[2] == seed.agent_to_item[2]);
}

TEST_CASE("classify: complete graphs saturate, sparse graphs stop early") {
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < 6; ++u)
        for (int e = 0; e < 7; ++e) edges.push_back({u, e});
    CaseResult c1 = classify_cases(make_graph(6, 7, edges), 1.0 / 240);
    CHECK(c1.which == 1);

    edges.clear();
    for (int u = 0; u < 4; ++u) edges.push_back({u, u});
    CaseResult c2 = classify_cases(make_graph(6, 7, edges), 1.0 / 240);
    CHECK(c2.which == 2);

    CHECK_THROWS_AS(classify_cases(make_graph(4, 3, {}), 1.0 / 240), InputError);
    CHECK_THROWS_AS(classify_cases(make_graph(4, 4, {}), 0.7), InputError);
}

TEST_CASE("classify: random audit at the default epsilon") {
    Rng rng(4242);
    for (uint64_t seed = 0; seed < 120; ++seed) {
        int n = 3 + static_cast<int>(seed % 58);
        int w = n + static_cast<int>(seed % 7);
        BigItemGraph g = random_graph(5000 + seed, n, w, 0.05 + 0.13 * (seed % 8));
        CaseResult cs = classify_cases(g, 1.0 / 240);
        audit_case(g, cs, 1.0 / 240, rng);
    }
}

TEST_CASE("classify: planted low-degree group lands in case 3") {
    // agents 0..8 complete over nine items; agents 9..10 both know item 0 only
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < 9; ++u)
        for (int e = 0; e < 9; ++e) edges.push_back({u, e});
    edges.push_back({9, 0});
    edges.push_back({10, 0});
    BigItemGraph g = make_graph(11, 11, edges);
    double eps = 0.3;
    CaseResult cs = classify_cases(g, eps);
    CHECK(cs.which == 3);
    CHECK(cs.u2.size() == 2);  // both contenders stay exposed
    Rng rng(1);
    audit_case(g, cs, eps, rng);
}

TEST_CASE("classify: oversized high-degree core lands in case 4") {
    // eleven mass agents over a ten-item pool plus one satellite pair
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u <= 10; ++u)
        for (int e = 0; e <= 9; ++e) edges.push_back({u, e});
    edges.push_back({11, 10});
    BigItemGraph g = make_graph(12, 14, edges);
    double eps = 0.3;
    CaseResult cs = classify_cases(g, eps);
    REQUIRE(cs.which == 4);
    CHECK(cs.u2.size() == 11);
    CHECK(cs.w2.size() == 10);
    CHECK(cs.u3.empty());
    Rng rng(2);
    audit_case(g, cs, eps, rng);

    // an edgeless straggler joins the third group
    BigItemGraph g2 = make_graph(13, 14, edges);
    CaseResult cs2 = classify_cases(g2, eps);
    REQUIRE(cs2.which == 4);
    CHECK(cs2.u3.size() == 1);
    Rng rng2(3);
    audit_case(g2, cs2, eps, rng2);
}

TEST_CASE("classify is total over constructed families") {
    Rng rng(777);
    for (uint64_t seed = 0; seed < 60; ++seed) {
        int n = 8 + static_cast<int>(seed % 12);
        int pool = n - 2 - static_cast<int>(seed % 3);
        std::vector<std::pair<int, int>> edges;
        int mass = pool + 1 + static_cast<int>(seed % 2);
        for (int u = 0; u < mass && u < n; ++u)
            for (int e = 0; e < pool; ++e) edges.push_back({u, e});
        for (int u = mass; u < n; ++u) edges.push_back({u, pool + (u - mass)});
        BigItemGraph g = make_graph(n, n + 2, edges);
        double eps = 0.3;
        CaseResult cs = classify_cases(g, eps);
        audit_case(g, cs, eps, rng);
    }
}

TEST_CASE("capped welfare: single agent takes a surviving bundle") {
    NormalizedValuation nv;
    nv.n = 4;
    nv.m = 10;
    nv.items = Bundle::full(10);
    nv.scale = 1.0;
    NormalizedValuation::Support s;
    s.weight = 1.0;
    s.bundle = Bundle::from_items({0, 1, 2, 3});
    s.additive.assign(10, 0.0);
    for (int e = 0; e < 4; ++e) s.additive[e] = 0.25;
    nv.support.push_back(s);
    nv.valuation = XOSValuation({s.additive});

    SurvivingFamily fam;
    fam.bundles = {s.bundle};
    fam.weights = {1.0};
    auto got = capped_welfare_allocate({&nv}, {fam}, Bundle::full(10), 0.25, 3);
    REQUIRE(got.size() == 1);
    CHECK(nv.valuation.value(got[0]) >= (1.0 - 0.25) / 2 - kValueTol);
}

TEST_CASE("capped welfare: disjoint supports give everyone a full bundle") {
    std::vector<NormalizedValuation> nvs;
    std::vector<SurvivingFamily> fams;
    for (int a = 0; a < 2; ++a) {
        NormalizedValuation nv;
        nv.n = 4;
        nv.m = 8;
        nv.items = Bundle::full(8);
        nv.scale = 1.0;
        NormalizedValuation::Support s;
        s.weight = 1.0;
        s.additive.assign(8, 0.0);
        for (int t = 0; t < 4; ++t) {
            s.bundle.add(4 * a + t);
            s.additive[4 * a + t] = 0.25;
        }
        nv.support.push_back(s);
        nv.valuation = XOSValuation({s.additive});
        nvs.push_back(nv);
        fams.push_back({{nvs.back().support[0].bundle}, {1.0}});
    }
    auto got =
        capped_welfare_allocate({&nvs[0], &nvs[1]}, fams, Bundle::full(8), 0.25, 5);
    for (int a = 0; a < 2; ++a)
        CHECK(nvs[a].valuation.value(got[a]) >= 0.75 - kValueTol);
    CHECK_FALSE(got[0].intersects(got[1]));
}

TEST_CASE("capped welfare: overlapping families still clear the floor") {
    std::vector<NormalizedValuation> nvs;
    std::vector<SurvivingFamily> fams;
    for (int a = 0; a < 3; ++a) {
        NormalizedValuation nv;
        nv.n = 6;
        nv.m = 6;
        nv.items = Bundle::full(6);
        nv.scale = 1.0;
        for (int b = 0; b < 2; ++b) {
            NormalizedValuation::Support s;
            s.weight = 0.5;
            s.additive.assign(6, 0.0);
            for (int t = 0; t < 3; ++t) {
                int e = (a + 3 * b + t) % 6;
                s.bundle.add(e);
                s.additive[e] = 1.0 / 3;
            }
            nv.support.push_back(s);
        }
        std::vector<std::vector<double>> clauses;
        for (const auto& s : nv.support) clauses.push_back(s.additive);
        nv.valuation = XOSValuation(std::move(clauses));
        SurvivingFamily fam;
        for (const auto& s : nv.support) {
            fam.bundles.push_back(s.bundle);
            fam.weights.push_back(s.weight);
        }
        nvs.push_back(std::move(nv));
        fams.push_back(std::move(fam));
    }
    std::vector<const NormalizedValuation*> ptrs = {&nvs[0], &nvs[1], &nvs[2]};
    auto got = capped_welfare_allocate(ptrs, fams, Bundle::full(6), 0.25, 11);
    Bundle seen;
    for (int a = 0; a < 3; ++a) {
        CHECK(std::min(0.75, nvs[a].valuation.value(got[a])) >= 0.375 - kValueTol);
        CHECK_FALSE(seen.intersects(got[a]));
        seen = seen | got[a];
    }
}

TEST_CASE("capped welfare: large pools run the sampled local search") {
    // 24 pool items and two agents: 3^24 assignments force the search path
    std::vector<NormalizedValuation> nvs;
    std::vector<SurvivingFamily> fams;
    for (int a = 0; a < 2; ++a) {
        NormalizedValuation nv;
        nv.n = 8;
        nv.m = 24;
        nv.items = Bundle::full(24);
        nv.scale = 1.0;
        for (int b = 0; b < 2; ++b) {
            NormalizedValuation::Support s;
            s.weight = 0.5;
            s.additive.assign(24, 0.0);
            for (int t = 0; t < 6; ++t) {
                int e = (12 * a + 6 * b + t + 3 * a) % 24;
                s.bundle.add(e);
                s.additive[e] = 1.0 / 6;
            }
            nv.support.push_back(s);
        }
        std::vector<std::vector<double>> clauses;
        for (const auto& s : nv.support) clauses.push_back(s.additive);
        nv.valuation = XOSValuation(std::move(clauses));
        SurvivingFamily fam;
        for (const auto& s : nv.support) {
            fam.bundles.push_back(s.bundle);
            fam.weights.push_back(s.weight);
        }
        nvs.push_back(std::move(nv));
        fams.push_back(std::move(fam));
    }
    auto got = capped_welfare_allocate({&nvs[0], &nvs[1]}, fams, Bundle::full(24),
                                       0.25, 13);
    for (int a = 0; a < 2; ++a)
        CHECK(std::min(0.75, nvs[a].valuation.value(got[a])) >= 0.375 - kValueTol);
    CHECK_FALSE(got[0].intersects(got[1]));
}

namespace {

NormalizedValuation hat_partition(int n_bundles, int items_per_bundle,
                                  int entitlement, int offset, int universe) {
    NormalizedValuation nv;
    nv.n = entitlement;
    nv.m = universe;
    nv.items = Bundle::full(universe);
    nv.scale = 1.0;
    std::vector<std::vector<double>> clauses;
    for (int b = 0; b < n_bundles; ++b) {
        NormalizedValuation::Support s;
        s.weight = 1.0 / n_bundles;
        s.additive.assign(universe, 0.0);
        for (int t = 0; t < items_per_bundle; ++t) {
            int e = (offset + b * items_per_bundle + t) % universe;
            s.bundle.add(e);
            s.additive[e] = 1.0 / items_per_bundle;
        }
        clauses.push_back(s.additive);
        nv.support.push_back(std::move(s));
    }
    nv.valuation = XOSValuation(std::move(clauses));
    return nv;
}

}  // namespace

TEST_CASE("w3_partition: empty removal chain is the identity") {
    NormalizedValuation nv = hat_partition(5, 2, 5, 0, 10);
    FractionalPartition fp = w3_partition(nv, {}, 3);
    CHECK(fp.entries.size() == 5);
    CHECK(fp.entitlement == doctest::Approx(1.0 / 3));
    CHECK(fp.total_weight() == doctest::Approx(1.0));
}

TEST_CASE("w3_partition: one removal mirrors the reweight formula") {
    GeneratorSpec spec;
    spec.n = 1;
    spec.m = 8;
    spec.value_min = 0.1;
    spec.value_max = 0.9;
    Instance inst = generate_instance(spec, 21);
    NormalizedValuation nv = normalize_aps(inst.valuations[0], 4, Bundle::full(8));
    FractionalPartition direct = reweight_after_removal(nv.partition(), 2, 4);
    FractionalPartition chained = w3_partition(nv, {{0, 2}}, 3);
    REQUIRE(direct.entries.size() == chained.entries.size());
    for (size_t i = 0; i < direct.entries.size(); ++i) {
        CHECK(direct.entries[i].bundle == chained.entries[i].bundle);
        CHECK(direct.entries[i].weight ==
              doctest::Approx(chained.entries[i].weight).epsilon(1e-7));
    }
}

TEST_CASE("w3_partition: chained removals keep weight one and the floor") {
    GeneratorSpec spec;
    spec.n = 1;
    spec.m = 10;
    spec.value_min = 0.2;
    spec.value_max = 1.0;
    for (uint64_t seed = 0; seed < 6; ++seed) {
        Instance inst = generate_instance(spec, 600 + seed);
        NormalizedValuation nv =
            normalize_aps(inst.valuations[0], 5, Bundle::full(10));
        std::vector<std::pair<int, int>> removals = {{0, 1}, {1, 4}};
        NormalizedValuation hat = w3_partition_normalized(nv, removals, 3);
        FractionalPartition fp = hat.partition();
        CHECK(fp.total_weight() == doctest::Approx(1.0));
        for (size_t s = 0; s < hat.support.size(); ++s) {
            CHECK_FALSE(hat.support[s].bundle.contains(1));
            CHECK_FALSE(hat.support[s].bundle.contains(4));
            CHECK(hat.additive_value(static_cast<int>(s), hat.support[s].bundle) ==
                  doctest::Approx(1.0));
        }
        for (int item = 0; item < 10; ++item)
            CHECK(fp.coverage(item) <= 1.0 / 3 + kValueTol);
    }
}

TEST_CASE("allocate_u3: empty pool run is the identity") {
    std::vector<NormalizedValuation> u2 = {hat_partition(5, 4, 5, 0, 40)};
    RunParams params;
    params.alpha = 0.275;
    params.c = 0.1;
    params.D = 5.0;
    U3Result res = allocate_u3({}, Bundle::full(40), u2, params);
    CHECK(res.report.success);
    CHECK(res.u2_avg_before == doctest::Approx(1.0));
    CHECK(res.u2_avg_after == doctest::Approx(1.0));
}

TEST_CASE("allocate_u3: pool picks stay acceptable and observers track losses") {
    const int universe = 40;
    std::vector<NormalizedValuation> u3;
    for (int a = 0; a < 2; ++a) u3.push_back(hat_partition(10, 4, 10, 4 * a, universe));
    std::vector<NormalizedValuation> u2;
    for (int a = 0; a < 3; ++a) u2.push_back(hat_partition(10, 4, 10, 2 * a, universe));
    RunParams params;
    params.alpha = 0.275;
    params.c = 0.2;
    params.D = 5.0;
    int satisfied = 0, total = 0;
    for (uint64_t seed = 1; seed <= 30; ++seed) {
        params.seed = seed;
        U3Result res = allocate_u3(u3, Bundle::full(universe), u2, params);
        REQUIRE(res.report.success);
        for (int a = 0; a < 2; ++a)
            CHECK(res.report.initial_value[a] >= params.alpha - kValueTol);
        CHECK(res.u2_avg_before == doctest::Approx(1.0));
        ++total;
        if (res.u2_avg_after >= 1.0 - 2.0 * 0.2) ++satisfied;
        CHECK(res.u2_avg_after >= 0.0);
    }
    CHECK(satisfied >= total / 2 + 1);  // majority satisfaction
}

TEST_CASE("allocate_u2: one greedy-average round clears alpha") {
    std::vector<NormalizedValuation> u2;
    for (int a = 0; a < 4; ++a) u2.push_back(hat_partition(8, 4, 8, 3 * a, 32));
    std::vector<FilteredPartition> parts(u2.size());
    for (size_t j = 0; j < u2.size(); ++j)
        for (const auto& s : u2[j].support) parts[j].current.push_back(s.bundle);
    U2Result res = allocate_u2(u2, parts, 1, 0.275);
    REQUIRE(res.served.size() == 1);
    CHECK(res.values[0] >= 0.275 - kValueTol);
    CHECK(res.round_avg[0] == doctest::Approx(1.0));
}

TEST_CASE("allocate_u2: disjoint supports only move the served agent") {
    std::vector<NormalizedValuation> u2;
    for (int a = 0; a < 3; ++a) u2.push_back(hat_partition(4, 4, 4, 16 * a, 48));
    std::vector<FilteredPartition> parts(u2.size());
    for (size_t j = 0; j < u2.size(); ++j)
        for (const auto& s : u2[j].support) parts[j].current.push_back(s.bundle);
    U2Result res = allocate_u2(u2, parts, 2, 0.275);
    REQUIRE(res.served.size() == 2);
    for (size_t j = 0; j < u2.size(); ++j) {
        bool was_served =
            std::find(res.served.begin(), res.served.end(), static_cast<int>(j)) !=
            res.served.end();
        if (!was_served) CHECK(parts[j].beta(u2[j]) == doctest::Approx(1.0));
    }
}

TEST_CASE("allocate_u2: round averages dominate the tau-offset recurrence") {
    const int universe = 48;
    std::vector<NormalizedValuation> u2;
    for (int a = 0; a < 12; ++a) u2.push_back(hat_partition(12, 4, 12, 4 * a, universe));
    std::vector<FilteredPartition> parts(u2.size());
    for (size_t j = 0; j < u2.size(); ++j)
        for (const auto& s : u2[j].support) parts[j].current.push_back(s.bundle);
    int n0 = 2;
    U2Result res = allocate_u2(u2, parts, n0, 0.275);
    double eps0 = static_cast<double>(n0) / u2.size();
    double tau = eps0 / (1.0 - 2.0 * eps0);
    GammaConfig cfg;
    cfg.variant = regime_for(0.275);
    cfg.alpha = 0.275;
    cfg.n = n0;
    cfg.start = res.round_avg[0];
    cfg.tau = tau;
    GammaTrace tr = gamma_trace(cfg, n0);
    for (int k = 0; k < n0; ++k)
        CHECK(res.round_avg[k] >= tr.values[k] - tau - kValueTol);
}

namespace {

Instance case3_instance() {
    // three rich agents with a personal big item over sixteen items, one
    // poor agent whose only big item collides with the first rich agent
    Instance inst;
    inst.n = 4;
    inst.m = 16;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> v(16, 0.2);
        v[i + 1] = 1.0;
        inst.valuations.emplace_back(std::vector<std::vector<double>>{std::move(v)});
    }
    std::vector<double> poor(16, 0.09);
    poor[1] = 0.4;
    inst.valuations.emplace_back(std::vector<std::vector<double>>{std::move(poor)});
    return inst;
}

Instance case4_instance() {
    // five pool agents sharing four big items plus a satellite that only
    // cares about a worthless-to-others fifth item
    Instance inst;
    inst.n = 6;
    inst.m = 16;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> v(16, 0.2);
        for (int e = 0; e < 4; ++e) v[e] = 1.0;
        v[4] = 0.0;
        inst.valuations.emplace_back(std::vector<std::vector<double>>{std::move(v)});
    }
    std::vector<double> sat(16, 0.0);
    sat[4] = 1.0;
    inst.valuations.emplace_back(std::vector<std::vector<double>>{std::move(sat)});
    return inst;
}

}  // namespace

TEST_CASE("big-item pipeline: all-big instance is a straight matching") {
    Instance inst;
    inst.n = 3;
    inst.m = 5;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> v(5, 0.1);
        v[i] = 5.0;
        inst.valuations.emplace_back(std::vector<std::vector<double>>{std::move(v)});
    }
    RunParams params;
    params.alpha = 11.0 / 40.0;
    BigItemsReport rep = allocate_with_big_items(inst, params.alpha, params);
    CHECK(rep.case_id == 1);
    Allocation alloc = make_allocation(inst, rep.bundles);
    VerificationReport ver = verify_allocation(inst, alloc, params.alpha, ShareKind::APS);
    CHECK(ver.pass);
}

TEST_CASE("big-item pipeline: single contested item goes through case 2") {
    GeneratorSpec spec;
    spec.n = 1;
    spec.m = 12;
    spec.value_min = 0.23;
    spec.value_max = 0.255;
    Instance flat = generate_instance(spec, 31);
    Instance inst;
    inst.n = 3;
    inst.m = 12;
    std::vector<double> big(12, 0.1);
    big[0] = 3.0;
    inst.valuations.emplace_back(std::vector<std::vector<double>>{std::move(big)});
    inst.valuations.push_back(flat.valuations[0]);
    inst.valuations.push_back(flat.valuations[0]);
    RunParams params;
    params.alpha = 11.0 / 40.0;
    BigItemsReport rep = allocate_with_big_items(inst, params.alpha, params);
    CHECK(rep.case_id == 2);
    Allocation alloc = make_allocation(inst, rep.bundles);
    VerificationReport ver = verify_allocation(inst, alloc, params.alpha, ShareKind::APS);
    CHECK(ver.pass);
}

TEST_CASE("big-item pipeline: constructed case-3 instance verifies") {
    Instance inst = case3_instance();
    Bundle full = Bundle::full(16);
    CHECK(compute_aps(inst.valuations[0], 4, full).value == doctest::Approx(1.0));
    CHECK(compute_aps(inst.valuations[3], 4, full).value == doctest::Approx(0.4));

    RunParams params;
    params.alpha = 11.0 / 40.0;
    params.seed = 3;
    BigItemsReport rep = allocate_with_big_items(inst, params.alpha, params, 0.3);
    CHECK(rep.case_id == 3);
    Allocation alloc = make_allocation(inst, rep.bundles);
    VerificationReport ver = verify_allocation(inst, alloc, params.alpha, ShareKind::APS);
    CHECK(ver.pass);
    CHECK(alloc.achieved[3] >= params.alpha * 0.4 - kValueTol);
}

TEST_CASE("big-item pipeline: constructed case-4 instance completes") {
    Instance inst = case4_instance();
    RunParams params;
    params.alpha = 11.0 / 40.0;
    params.c = 0.2;
    params.D = 5.0;
    params.seed = 7;
    BigItemsReport rep = allocate_with_big_items(inst, params.alpha, params, 0.3);
    REQUIRE(rep.case_id == 4);
    CHECK(rep.cases.w2.size() == 4);
    CHECK(rep.cases.u2.size() == 5);
    Allocation alloc = make_allocation(inst, rep.bundles);
    VerificationReport ver = verify_allocation(inst, alloc, params.alpha, ShareKind::APS);
    CHECK(ver.pass);
    CHECK_FALSE(rep.u2_floor_flag);
    CHECK(rep.gamma_hat_ok);
}

TEST_CASE("allocate_u3: single pool agent meets the expectation identity") {
    const int universe = 40;
    std::vector<NormalizedValuation> u3 = {hat_partition(10, 4, 10, 0, universe)};
    std::vector<NormalizedValuation> u2;
    for (int a = 0; a < 3; ++a) u2.push_back(hat_partition(10, 4, 10, 2 * a, universe));
    RunParams params;
    params.alpha = 0.275;
    params.c = 0.2;
    params.D = 5.0;
    // value-one bundles sit in the top band: Lambda = 2, so no item is drawn
    // with probability above 1/(2 * 10)
    double p = 1.0 / (2.0 * 10);
    double mean_after = 0.0;
    const int seeds = 200;
    for (uint64_t seed = 1; seed <= seeds; ++seed) {
        params.seed = seed;
        U3Result res = allocate_u3(u3, Bundle::full(universe), u2, params);
        REQUIRE(res.report.success);
        mean_after += res.u2_avg_after;
    }
    mean_after /= seeds;
    CHECK(mean_after >= (1.0 - p) * 1.0 - 0.01);
}

TEST_CASE("full corpus end to end: identical passes, mixed reports") {
    RunParams params;
    params.alpha = 11.0 / 40.0;
    params.c = 0.3;
    params.D = 4.0;
    params.seed = 2;
    // identical-valuation instances must clear alpha times the share
    for (int n : {2, 3}) {
        for (uint64_t seed = 0; seed < 4; ++seed) {
            GeneratorSpec spec;
            spec.n = 1;
            spec.m = n == 2 ? 10 : 12;
            spec.value_min = n == 2 ? 0.10 : 0.23;
            spec.value_max = n == 2 ? 0.15 : 0.255;
            Instance one = generate_instance(spec, 50000 + seed);
            Instance inst;
            inst.n = n;
            inst.m = spec.m;
            inst.valuations.assign(n, one.valuations[0]);
            PipelineReport rep =
                run_pipeline(inst, params.alpha, params, PipelineMode::Full);
            CHECK(rep.completed);
            CHECK(rep.verification.pass);
        }
    }
    // mixed corpus: completion plus a coherent ratio report, no pass asserted
    for (uint64_t seed = 0; seed < 6; ++seed) {
        GeneratorSpec spec;
        spec.n = 3 + static_cast<int>(seed % 4);
        spec.m = 12;
        spec.clauses_min = 1;
        spec.clauses_max = 3;
        spec.value_min = 0.05;
        spec.value_max = 1.0;
        spec.overlap = 0.3;
        Instance inst = generate_instance(spec, 51000 + seed);
        PipelineReport rep =
            run_pipeline(inst, params.alpha, params, PipelineMode::Full);
        CHECK(rep.verification.rows.size() == static_cast<size_t>(inst.n));
        for (const auto& row : rep.verification.rows) {
            if (row.share > kValueTol)
                CHECK(row.ratio ==
                      doctest::Approx(row.achieved / row.share).epsilon(1e-9));
        }
    }
}

TEST_CASE("allocate_plain: tiny residuals go through the direct search") {
    GeneratorSpec spec;
    spec.n = 2;
    spec.m = 10;
    spec.clauses_min = 1;
    spec.clauses_max = 2;
    spec.value_min = 0.1;
    spec.value_max = 0.9;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Instance inst = generate_instance(spec, 800 + seed);
        RunParams params;
        params.alpha = 11.0 / 40.0;
        PlainReport rep = allocate_plain(inst, params.alpha, params);
        CHECK(rep.success);
        Allocation alloc = make_allocation(inst, rep.bundles);
        VerificationReport ver =
            verify_allocation(inst, alloc, params.alpha, ShareKind::APS);
        CHECK(ver.pass);
    }
}
