#include "fairdiv/bigitems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fairdiv/processes.hpp"

namespace fairdiv {

BigItemGraph build_big_item_graph(const Instance& inst, double alpha,
                                  const std::vector<double>& aps) {
    if (static_cast<int>(aps.size()) != inst.n)
        throw InputError("build_big_item_graph: aps length mismatch");
    BigItemGraph g;
    g.n = inst.n;
    for (int e = 0; e < inst.m; ++e) g.items.push_back(e);
    g.adj.assign(inst.n, {});
    for (int i = 0; i < inst.n; ++i)
        for (int w = 0; w < inst.m; ++w) {
            double v = inst.valuations[i].item_value(g.items[w]);
            // worthless items never count as big, even for zero-share agents
            if (v > kValueTol && v >= alpha * aps[i] - kValueTol)
                g.adj[i].push_back(w);
        }
    return g;
}

namespace {

bool try_augment(const BigItemGraph& g, int u, const std::vector<char>& allowed_agent,
                 const std::vector<char>& allowed_item, std::vector<char>& visited,
                 Matching& m) {
    for (int w : g.adj[u]) {
        if (!allowed_item[w] || visited[w]) continue;
        visited[w] = 1;
        int owner = m.item_to_agent[w];
        if (owner < 0 || (allowed_agent[owner] &&
                          try_augment(g, owner, allowed_agent, allowed_item, visited, m))) {
            m.agent_to_item[u] = w;
            m.item_to_agent[w] = u;
            return true;
        }
    }
    return false;
}

Matching empty_matching(const BigItemGraph& g) {
    Matching m;
    m.agent_to_item.assign(g.n, -1);
    m.item_to_agent.assign(g.w_size(), -1);
    m.size = 0;
    return m;
}

Matching restricted_max_matching(const BigItemGraph& g,
                                 const std::vector<char>& allowed_agent,
                                 const std::vector<char>& allowed_item) {
    Matching m = empty_matching(g);
    for (int u = 0; u < g.n; ++u) {
        if (!allowed_agent[u]) continue;
        std::vector<char> visited(g.w_size(), 0);
        if (try_augment(g, u, allowed_agent, allowed_item, visited, m)) ++m.size;
    }
    return m;
}

}  // namespace

Matching max_matching(const BigItemGraph& g) {
    return restricted_max_matching(g, std::vector<char>(g.n, 1),
                                   std::vector<char>(g.w_size(), 1));
}

Matching maximal_matching(const BigItemGraph& g, const Matching& preseed) {
    Matching m = preseed;
    for (int u = 0; u < g.n; ++u) {
        if (m.agent_to_item[u] >= 0) continue;
        for (int w : g.adj[u]) {
            if (m.item_to_agent[w] >= 0) continue;
            m.agent_to_item[u] = w;
            m.item_to_agent[w] = u;
            ++m.size;
            break;
        }
    }
    return m;
}

namespace {

// Perfectly match u0, then greedily extend to a maximal matching. Fails when
// u0 cannot be saturated.
bool matching_through(const BigItemGraph& g, const std::vector<char>& u0,
                      Matching& out) {
    std::vector<char> all_items(g.w_size(), 1);
    Matching base = restricted_max_matching(g, u0, all_items);
    int need = 0;
    for (int u = 0; u < g.n; ++u) need += u0[u];
    if (base.size < need) return false;
    out = maximal_matching(g, base);
    return true;
}

}  // namespace

CaseResult classify_cases(const BigItemGraph& g, double eps) {
    // With eps at most 1/240 and n below 240, any matching of size n-1
    // already counts as small, leaving only the first two cases reachable;
    // larger eps values are accepted for constructed experiments.
    if (!(eps > 0.0) || eps > 0.49)
        throw InputError("classify_cases requires 0 < eps < 1/2");
    if (g.w_size() < g.n)
        throw InputError("classify_cases requires |W| >= n");
    const int n = g.n;
    const double small_cap = (1.0 - eps) * n;

    auto finish_matched = [&](const Matching& m, CaseResult& res) {
        for (int u = 0; u < n; ++u)
            if (m.agent_to_item[u] >= 0) {
                res.u1.push_back(u);
                res.w1.push_back(m.agent_to_item[u]);
            }
    };

    Matching m = max_matching(g);
    if (m.size == n) {
        CaseResult res;
        res.which = 1;
        res.matching = m;
        finish_matched(m, res);
        return res;
    }
    if (m.size <= small_cap + 1e-12) {
        CaseResult res;
        res.which = 2;
        res.matching = m;
        finish_matched(m, res);
        return res;
    }

    // Iterative core construction: collect high-degree vertices that every
    // maximal matching leaves exposed, until they can no longer be saturated.
    std::vector<char> u0(n, 0);
    while (true) {
        Matching mm;
        if (!matching_through(g, u0, mm)) break;
        if (mm.size == n) {
            CaseResult res;
            res.which = 1;
            res.matching = mm;
            finish_matched(mm, res);
            return res;
        }
        if (mm.size <= small_cap + 1e-12) {
            CaseResult res;
            res.which = 2;
            res.matching = mm;
            finish_matched(mm, res);
            return res;
        }
        std::vector<int> exposed;
        for (int u = 0; u < n; ++u)
            if (mm.agent_to_item[u] < 0) exposed.push_back(u);
        int pick = -1;
        for (int u : exposed)
            if (g.degree(u) > n - 3 * static_cast<int>(exposed.size())) {
                pick = u;
                break;
            }
        if (pick < 0) {
            CaseResult res;
            res.which = 3;
            res.matching = mm;
            finish_matched(mm, res);
            res.u2 = exposed;
            for (int w = 0; w < g.w_size(); ++w)
                if (mm.item_to_agent[w] < 0) res.w2.push_back(w);
            return res;
        }
        u0[pick] = 1;
    }
    for (int u = 0; u < n; ++u)
        if (g.degree(u) >= (1.0 - 3.0 * eps) * n - 1e-12) u0[u] = 1;

    // Case-4 refinement.
    CaseResult res;
    res.which = 4;
    const int W = g.w_size();
    std::vector<char> in_w0(W, 0);
    for (int u = 0; u < n; ++u)
        if (u0[u])
            for (int w : g.adj[u]) in_w0[w] = 1;

    std::vector<int> match_agent(W, -1);  // item -> agent, the U1/W1 pairs
    std::vector<char> in_u1(n, 0), in_w1(W, 0), in_u3(n, 0), in_w3(W, 0);
    auto marry = [&](int u, int w) {
        match_agent[w] = u;
        in_u1[u] = 1;
        in_w1[w] = 1;
    };

    // Pass 1: agents outside the core grab any free neighbor.
    for (int u = 0; u < n; ++u) {
        if (u0[u]) continue;
        int got = -1;
        for (int w : g.adj[u])
            if (!in_w1[w]) {
                got = w;
                break;
            }
        if (got >= 0)
            marry(u, got);
        else
            in_u3[u] = 1;
    }
    for (int w = 0; w < W; ++w)
        if (!in_w0[w] && !in_w1[w]) in_w3[w] = 1;

    // Hall violator inside (U0, W0): alternating reachability from the
    // exposed core vertices of a maximum matching.
    std::vector<char> w0_items(W, 0);
    for (int w = 0; w < W; ++w) w0_items[w] = in_w0[w];
    Matching core = restricted_max_matching(g, u0, w0_items);
    std::vector<char> in_u0p(n, 0);
    {
        std::vector<char> agent_seen(n, 0), item_seen(W, 0);
        std::vector<int> stack;
        for (int u = 0; u < n; ++u)
            if (u0[u] && core.agent_to_item[u] < 0) {
                stack.push_back(u);
                agent_seen[u] = 1;
            }
        if (stack.empty())
            throw SolverError("case-4 construction expected an unsaturated core");
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            in_u0p[u] = 1;
            for (int w : g.adj[u]) {
                if (!w0_items[w] || item_seen[w]) continue;
                item_seen[w] = 1;
                int owner = core.item_to_agent[w];
                if (owner >= 0 && !agent_seen[owner]) {
                    agent_seen[owner] = 1;
                    stack.push_back(owner);
                }
            }
        }
    }

    // Pass 2: core agents outside the violator grab any free neighbor.
    for (int u = 0; u < n; ++u) {
        if (!u0[u] || in_u0p[u]) continue;
        int got = -1;
        for (int w : g.adj[u])
            if (!in_w1[w]) {
                got = w;
                break;
            }
        if (got >= 0)
            marry(u, got);
        else
            in_u3[u] = 1;
    }
    std::vector<char> in_w0p(W, 0);  // N(U0') minus matched
    for (int u = 0; u < n; ++u)
        if (in_u0p[u])
            for (int w : g.adj[u]) in_w0p[w] = 1;
    for (int w = 0; w < W; ++w) {
        if (in_w0[w] && !in_w0p[w] && !in_w1[w]) in_w3[w] = 1;
        if (in_w1[w]) in_w0p[w] = 0;
    }

    // Degree filter: the pool keeps items seen by three quarters of the
    // agents; the rest are matched away or retired.
    std::vector<int> rev_count(W, 0);
    for (int u = 0; u < n; ++u)
        if (in_u0p[u])
            for (int w : g.adj[u]) ++rev_count[w];
    std::vector<char> in_w2(W, 0);
    for (int w = 0; w < W; ++w)
        if (in_w0p[w] && rev_count[w] >= 0.75 * n - 1e-12) in_w2[w] = 1;

    // Pass 3: items outside the pool get matched into the violator.
    for (int w = 0; w < W; ++w) {
        if (!in_w0p[w] || in_w2[w]) continue;
        int got = -1;
        for (int u = 0; u < n; ++u)
            if (in_u0p[u] && !in_u1[u] &&
                std::binary_search(g.adj[u].begin(), g.adj[u].end(), w)) {
                got = u;
                break;
            }
        if (got >= 0)
            marry(got, w);
        else
            in_w3[w] = 1;
    }

    for (int u = 0; u < n; ++u) {
        if (in_u1[u])
            res.u1.push_back(u);
        else if (in_u0p[u])
            res.u2.push_back(u);
        else
            res.u3.push_back(u);
    }
    for (int w = 0; w < W; ++w) {
        if (in_w1[w])
            res.w1.push_back(w);
        else if (in_w2[w])
            res.w2.push_back(w);
        else
            res.w3.push_back(w);
    }
    res.matching = empty_matching(g);
    for (int w = 0; w < W; ++w)
        if (match_agent[w] >= 0) {
            res.matching.agent_to_item[match_agent[w]] = w;
            res.matching.item_to_agent[w] = match_agent[w];
            ++res.matching.size;
        }
    return res;
}

std::vector<Bundle> capped_welfare_allocate(
    const std::vector<const NormalizedValuation*>& agents,
    const std::vector<SurvivingFamily>& families, Bundle items, double alpha,
    uint64_t seed) {
    const int k = static_cast<int>(agents.size());
    if (k == 0) return {};
    if (families.size() != agents.size())
        throw InputError("capped_welfare_allocate: family count mismatch");
    const double floor = (1.0 - alpha) / 2.0;
    auto capped = [&](int i, Bundle b) {
        return std::min(1.0 - alpha, agents[i]->valuation.value(b));
    };

    std::vector<int> pool = items.items();
    const int mw = static_cast<int>(pool.size());
    double assignments = std::pow(static_cast<double>(k + 1), mw);
    if (assignments <= 1e6) {
        // Exact welfare maximisation over all (k+1)-ary item assignments.
        std::vector<int> owner(mw, 0);
        std::vector<Bundle> best(k), cur(k);
        double best_welfare = -1.0;
        long total = static_cast<long>(assignments);
        for (long code = 0; code < total; ++code) {
            long c = code;
            for (int t = 0; t < mw; ++t) {
                owner[t] = static_cast<int>(c % (k + 1));
                c /= (k + 1);
            }
            for (auto& b : cur) b = Bundle();
            for (int t = 0; t < mw; ++t)
                if (owner[t] > 0) cur[owner[t] - 1].add(pool[t]);
            double welfare = 0.0;
            for (int i = 0; i < k; ++i) welfare += capped(i, cur[i]);
            if (welfare > best_welfare + 1e-12) {
                best_welfare = welfare;
                best = cur;
            }
        }
        for (int i = 0; i < k; ++i)
            if (capped(i, best[i]) < floor - kValueTol)
                throw ExhaustedError(
                    "capped welfare optimum left an agent below (1-alpha)/2", i);
        return best;
    }

    // Local search: lift the worst agent by a sampled surviving bundle
    // whenever that strictly increases total capped welfare.
    Rng rng(seed);
    std::vector<Bundle> cur(k);
    double welfare = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
        int low = -1;
        for (int i = 0; i < k; ++i)
            if (capped(i, cur[i]) < floor - kValueTol) {
                low = i;
                break;
            }
        if (low < 0) return cur;
        const auto& fam = families[low];
        if (fam.bundles.empty())
            throw ExhaustedError("agent has no surviving bundles to draw from", low);
        double total_w = std::accumulate(fam.weights.begin(), fam.weights.end(), 0.0);
        double u = rng.uniform() * total_w;
        int pickb = static_cast<int>(fam.bundles.size()) - 1;
        double acc = 0.0;
        for (size_t b = 0; b < fam.bundles.size(); ++b) {
            acc += fam.weights[b];
            if (u < acc) {
                pickb = static_cast<int>(b);
                break;
            }
        }
        Bundle bstar = fam.bundles[pickb] & items;
        std::vector<Bundle> prop = cur;
        prop[low] = bstar;
        for (int i = 0; i < k; ++i)
            if (i != low) prop[i] = prop[i].minus(bstar);
        double w2 = 0.0;
        for (int i = 0; i < k; ++i) w2 += capped(i, prop[i]);
        if (w2 > welfare + 1e-12) {
            welfare = w2;
            cur = prop;
        }
    }
    throw ExhaustedError("capped welfare local search hit its iteration cap", -1);
}

NormalizedValuation w3_partition_normalized(
    const NormalizedValuation& nv_j, const std::vector<std::pair<int, int>>& removals,
    int n0) {
    if (n0 < 1) throw InputError("w3_partition: n0 must be >= 1");
    NormalizedValuation out = nv_j;
    for (const auto& [agent, item] : removals) {
        (void)agent;
        double surviving = 0.0;
        for (const auto& s : out.support)
            if (!s.bundle.contains(item)) surviving += s.weight;
        if (surviving <= kValueTol)
            throw InputError("w3_partition: removal chain exhausted the partition");
        std::vector<NormalizedValuation::Support> next;
        for (const auto& s : out.support)
            if (!s.bundle.contains(item) && s.weight > 0.0) {
                auto kept = s;
                kept.weight = s.weight / surviving;
                next.push_back(std::move(kept));
            }
        out.support = std::move(next);
        out.items.remove(item);
    }
    out.n = n0;
    FractionalPartition check = out.partition();
    check.validate();
    std::vector<std::vector<double>> clauses;
    for (const auto& s : out.support) clauses.push_back(s.additive);
    out.valuation = XOSValuation(std::move(clauses));
    return out;
}

FractionalPartition w3_partition(const NormalizedValuation& nv_j,
                                 const std::vector<std::pair<int, int>>& removals,
                                 int n0) {
    return w3_partition_normalized(nv_j, removals, n0).partition();
}

U3Result allocate_u3(const std::vector<NormalizedValuation>& u3_agents, Bundle pool,
                     const std::vector<NormalizedValuation>& u2_hat,
                     const RunParams& params) {
    const int nu3 = static_cast<int>(u3_agents.size());
    U3Result out;
    out.report.n = nu3;
    out.report.params = params;
    out.report.initial_bundles.assign(nu3, Bundle());
    out.report.final_bundles.assign(nu3, Bundle());
    out.report.parent_of.assign(nu3, -1);
    out.report.initial_value.assign(nu3, 0.0);
    out.report.final_value.assign(nu3, 0.0);

    out.u2_parts.resize(u2_hat.size());
    for (size_t j = 0; j < u2_hat.size(); ++j)
        for (const auto& s : u2_hat[j].support)
            out.u2_parts[j].current.push_back(s.bundle);
    auto u2_avg = [&]() {
        if (u2_hat.empty()) return 0.0;
        double sum = 0.0;
        for (size_t j = 0; j < u2_hat.size(); ++j)
            sum += out.u2_parts[j].beta(u2_hat[j]);
        return sum / static_cast<double>(u2_hat.size());
    };
    out.u2_avg_before = u2_avg();

    if (nu3 == 0) {
        out.report.success = true;
        out.u2_avg_after = out.u2_avg_before;
        return out;
    }

    std::vector<FilteredPartition> parts(nu3);
    for (int i = 0; i < nu3; ++i)
        for (const auto& s : u3_agents[i].support)
            parts[i].current.push_back(s.bundle & pool);
    // Dangerous pruning looks at the unrestricted bundles, the restriction
    // to the pool is what survives.
    out.report.dropped_dangerous.assign(nu3, {});
    for (int i = 0; i < nu3; ++i)
        for (size_t s = 0; s < u3_agents[i].support.size(); ++s)
            if (total_damage(u3_agents, i, u3_agents[i].support[s].bundle) > params.D) {
                parts[i].current[s] = Bundle();
                out.report.dropped_dangerous[i].push_back(static_cast<int>(s));
            }
    for (int i = 0; i < nu3; ++i)
        out.report.beta_initial.push_back(parts[i].beta(u3_agents[i]));

    Rng rng(params.seed);
    std::vector<char> active(nu3, 1);
    for (int k = 1; k <= nu3; ++k) {
        std::vector<double> betas(nu3, std::numeric_limits<double>::quiet_NaN());
        int pick = -1;
        double best = -1.0;
        for (int i = 0; i < nu3; ++i) {
            if (!active[i]) continue;
            betas[i] = parts[i].beta(u3_agents[i]);
            if (betas[i] > best + 1e-12) {
                best = betas[i];
                pick = i;
            }
        }
        out.report.beta.push_back(betas);
        if (best < params.alpha - kValueTol) {
            out.report.failure_round = k;
            out.u2_avg_after = u2_avg();
            return out;
        }
        CandidateDistribution cd;
        try {
            PartitionView view{&u3_agents[pick], &parts[pick].current};
            cd = build_distribution(classify_bundles(view, params.alpha),
                                    u3_agents[pick].n);
        } catch (const ExhaustedError&) {
            out.report.failure_round = k;
            out.u2_avg_after = u2_avg();
            return out;
        }
        double u = rng.uniform();
        double acc = 0.0;
        int chosen = static_cast<int>(cd.candidates.size()) - 1;
        for (size_t c = 0; c < cd.candidates.size(); ++c) {
            acc += cd.candidates[c].probability;
            if (u < acc) {
                chosen = static_cast<int>(c);
                break;
            }
        }
        const Candidate& cand = cd.candidates[chosen];
        out.report.draws.push_back({k, pick, chosen, cand.items});
        out.report.initial_bundles[pick] = cand.items;
        out.report.parent_of[pick] = cand.parent;
        out.report.final_bundles[pick] = cand.items;
        out.report.initial_value[pick] =
            u3_agents[pick].additive_value(cand.parent, cand.items);
        active[pick] = 0;
        for (int h = 0; h < nu3; ++h)
            if (!active[h] && h != pick)
                out.report.final_bundles[h] =
                    out.report.final_bundles[h].minus(cand.items);
        for (int j = 0; j < nu3; ++j)
            if (active[j])
                parts[j] = filter_step(u3_agents[pick], cand.parent, u3_agents[j],
                                       cand.items, parts[j], params.c);
        // Observers lose the sampled items in full.
        for (auto& part : out.u2_parts)
            for (auto& cur : part.current) cur = cur.minus(cand.items);
    }
    for (int i = 0; i < nu3; ++i)
        out.report.final_value[i] =
            u3_agents[i].additive_value(out.report.parent_of[i],
                                        out.report.final_bundles[i]);
    out.report.success = true;
    out.u2_avg_after = u2_avg();
    return out;
}

U2Result allocate_u2(const std::vector<NormalizedValuation>& u2_hat,
                     std::vector<FilteredPartition>& parts, int n0, double alpha) {
    const int k = static_cast<int>(u2_hat.size());
    if (n0 > k) throw InputError("allocate_u2: n0 exceeds the agent count");
    U2Result out;
    std::vector<char> served(k, 0);
    for (int round = 1; round <= n0; ++round) {
        int pick = -1;
        double best = -1.0;
        double sum = 0.0;
        int active = 0;
        std::vector<double> betas(k, 0.0);
        for (int j = 0; j < k; ++j) {
            if (served[j]) continue;
            betas[j] = parts[j].beta(u2_hat[j]);
            sum += betas[j];
            ++active;
            if (betas[j] > best + 1e-12) {
                best = betas[j];
                pick = j;
            }
        }
        out.round_avg.push_back(active > 0 ? sum / active : 0.0);
        if (pick < 0 || best < alpha - kValueTol)
            throw ExhaustedError("greedy-average allocator ran out of potential", round);

        CandidateDistribution cd;
        try {
            PartitionView view{&u2_hat[pick], &parts[pick].current};
            cd = build_distribution(classify_bundles(view, alpha), u2_hat[pick].n);
        } catch (const ExhaustedError&) {
            throw ExhaustedError("greedy-average allocator found no candidate", round);
        }
        Bundle bestb;
        double best_score = -std::numeric_limits<double>::infinity();
        int best_parent = -1;
        for (const auto& cand : cd.candidates) {
            double score = 0.0;
            for (int j = 0; j < k; ++j) {
                if (served[j] || j == pick) continue;
                double loss = 0.0;
                for (size_t s = 0; s < u2_hat[j].support.size(); ++s)
                    loss += u2_hat[j].support[s].weight *
                            u2_hat[j].additive_value(static_cast<int>(s),
                                                     parts[j].current[s] & cand.items);
                score += betas[j] - loss;
            }
            if (score > best_score + 1e-12) {
                best_score = score;
                bestb = cand.items;
                best_parent = cand.parent;
            }
        }
        served[pick] = 1;
        out.served.push_back(pick);
        out.bundles.push_back(bestb);
        out.values.push_back(u2_hat[pick].additive_value(best_parent, bestb));
        for (int j = 0; j < k; ++j) {
            if (served[j]) continue;
            for (auto& cur : parts[j].current) cur = cur.minus(bestb);
        }
    }
    return out;
}

namespace {

std::vector<double> instance_aps(const Instance& inst) {
    std::vector<double> aps;
    Bundle full = Bundle::full(inst.m);
    for (int i = 0; i < inst.n; ++i)
        aps.push_back(compute_aps(inst.valuations[i], inst.n, full).value);
    return aps;
}

// Exhaustive two-agent split of the residual items maximizing the worse
// ratio against the residual APS values.
std::pair<Bundle, Bundle> best_pair_split(const XOSValuation& v0, const XOSValuation& v1,
                                          int m, double aps0, double aps1) {
    if (m > 13) throw CapacityError("two-agent direct search capped at 13 items");
    uint64_t full = (m == 0) ? 0 : ((uint64_t{1} << m) - 1);
    double best = -1.0;
    std::pair<Bundle, Bundle> out{Bundle(), Bundle(full)};
    for (uint64_t s = 0; s <= full; ++s) {
        Bundle b0(s), b1(full & ~s);
        double r0 = aps0 > kValueTol ? v0.value(b0) / aps0
                                     : std::numeric_limits<double>::infinity();
        double r1 = aps1 > kValueTol ? v1.value(b1) / aps1
                                     : std::numeric_limits<double>::infinity();
        double mn = std::min(r0, r1);
        if (mn > best + 1e-12) {
            best = mn;
            out = {b0, b1};
        }
        if (full == 0) break;
    }
    return out;
}

}  // namespace

PlainReport allocate_plain(const Instance& inst, double alpha,
                           const RunParams& params) {
    PlainReport rep;
    rep.reduction = strip_big_items(inst, alpha);
    rep.bundles.assign(inst.n, Bundle());
    for (const auto& g : rep.reduction.grants) rep.bundles[g.agent].add(g.item);

    const Instance& res = rep.reduction.residual;
    if (res.n == 0) return rep;

    std::vector<int> live;  // residual agents with positive APS
    for (int i = 0; i < res.n; ++i)
        if (rep.reduction.residual_aps[i] > kValueTol) live.push_back(i);
    auto to_original = [&](int residual_agent, Bundle residual_items) {
        Bundle out;
        residual_items.for_each(
            [&](int e) { out.add(rep.reduction.item_map[e]); });
        rep.bundles[rep.reduction.agent_map[residual_agent]] = out;
    };

    if (live.empty()) return rep;
    if (live.size() == 1) {
        to_original(live[0], Bundle::full(res.m));
        return rep;
    }
    if (live.size() == 2) {
        auto [b0, b1] = best_pair_split(res.valuations[live[0]], res.valuations[live[1]],
                                        res.m, rep.reduction.residual_aps[live[0]],
                                        rep.reduction.residual_aps[live[1]]);
        to_original(live[0], b0);
        to_original(live[1], b1);
        return rep;
    }

    std::vector<NormalizedValuation> parts;
    Bundle rfull = Bundle::full(res.m);
    for (int i : live)
        parts.push_back(
            normalize_aps(res.valuations[i], static_cast<int>(live.size()), rfull));
    RunParams rp = params;
    rep.run = allocate_different(parts, rp);
    rep.success = rep.run->success;
    rep.failure_round = rep.run->failure_round;
    if (rep.run->success)
        for (size_t idx = 0; idx < live.size(); ++idx)
            to_original(live[idx], rep.run->final_bundles[idx]);
    return rep;
}

BigItemsReport allocate_with_big_items(const Instance& inst, double alpha,
                                       const RunParams& params, double eps) {
    inst.validate();
    BigItemsReport rep;
    rep.bundles.assign(inst.n, Bundle());
    rep.aps = instance_aps(inst);

    if (inst.m < inst.n) {
        // The four-case split needs |W| >= n; small universes take the
        // plain route directly.
        PlainReport plain = allocate_plain(inst, alpha, params);
        rep.case_id = 0;
        rep.bundles = plain.bundles;
        if (plain.run) rep.residual_run = plain.run;
        return rep;
    }

    BigItemGraph g = build_big_item_graph(inst, alpha, rep.aps);
    rep.cases = classify_cases(g, eps);
    rep.case_id = rep.cases.which;
    const CaseResult& cs = rep.cases;

    auto grant_matched = [&]() {
        for (size_t t = 0; t < cs.u1.size(); ++t)
            rep.bundles[cs.u1[t]].add(g.items[cs.w1[t]]);
    };

    if (cs.which == 1) {
        grant_matched();
        return rep;
    }

    if (cs.which == 2) {
        grant_matched();
        std::vector<char> matched_agent(inst.n, 0);
        std::vector<char> matched_item(inst.m, 0);
        for (size_t t = 0; t < cs.u1.size(); ++t) {
            matched_agent[cs.u1[t]] = 1;
            matched_item[g.items[cs.w1[t]]] = 1;
        }
        Instance residual;
        std::vector<int> agent_map, item_map;
        for (int e = 0; e < inst.m; ++e)
            if (!matched_item[e]) item_map.push_back(e);
        residual.m = static_cast<int>(item_map.size());
        for (int i = 0; i < inst.n; ++i) {
            if (matched_agent[i]) continue;
            agent_map.push_back(i);
            std::vector<std::vector<double>> clauses;
            for (const auto& c : inst.valuations[i].clauses()) {
                std::vector<double> row;
                for (int e : item_map) row.push_back(c[e]);
                clauses.push_back(std::move(row));
            }
            residual.valuations.emplace_back(std::move(clauses));
        }
        residual.n = static_cast<int>(agent_map.size());
        if (residual.n > 0) {
            PlainReport plain = allocate_plain(residual, alpha, params);
            if (plain.run) rep.residual_run = plain.run;
            for (int i = 0; i < residual.n; ++i)
                plain.bundles[i].for_each(
                    [&](int e) { rep.bundles[agent_map[i]].add(item_map[e]); });
        }
        return rep;
    }

    if (cs.which == 3) {
        grant_matched();
        const int k = static_cast<int>(cs.u2.size());
        if (k == 0) return rep;
        Bundle w2;
        for (int w : cs.w2) w2.add(g.items[w]);
        Bundle w1;
        for (int w : cs.w1) w1.add(g.items[w]);

        std::vector<NormalizedValuation> nvs;
        std::vector<SurvivingFamily> families;
        Bundle full = Bundle::full(inst.m);
        for (int agent : cs.u2) {
            NormalizedValuation nv = normalize_aps(inst.valuations[agent], inst.n, full);
            // Bundles touched by an allocated big item, topped up with small
            // allocated items until exactly n-3k allocated items count as big.
            Bundle bigs;
            for (int w : cs.w1) {
                int e = g.items[w];
                if (std::binary_search(g.adj[agent].begin(), g.adj[agent].end(), w))
                    bigs.add(e);
            }
            int target_bigs = std::max(0, inst.n - 3 * k);
            Bundle treat_big = bigs;
            w1.for_each([&](int e) {
                if (treat_big.count() < target_bigs && !treat_big.contains(e))
                    treat_big.add(e);
            });
            Bundle small_lost = w1.minus(treat_big);
            SurvivingFamily fam;
            for (const auto& s : nv.support) {
                if (s.bundle.intersects(treat_big)) continue;
                if ((s.bundle & small_lost).count() >= 2) continue;
                fam.bundles.push_back(s.bundle);
                fam.weights.push_back(s.weight);
            }
            families.push_back(std::move(fam));
            nvs.push_back(std::move(nv));
        }
        std::vector<const NormalizedValuation*> ptrs;
        for (const auto& nv : nvs) ptrs.push_back(&nv);
        std::vector<Bundle> got =
            capped_welfare_allocate(ptrs, families, w2, alpha, params.seed);
        for (int t = 0; t < k; ++t) rep.bundles[cs.u2[t]] = got[t];
        return rep;
    }

    // Case 4.
    grant_matched();
    Bundle residual_items;
    Bundle w2, w3;
    for (int w : cs.w2) {
        residual_items.add(g.items[w]);
        w2.add(g.items[w]);
    }
    for (int w : cs.w3) {
        residual_items.add(g.items[w]);
        w3.add(g.items[w]);
    }
    const int n4 = static_cast<int>(cs.u2.size() + cs.u3.size());
    const int n0 = static_cast<int>(cs.u2.size() - cs.w2.size());
    if (n4 == 0) return rep;

    // U3 partitions over the residual pool.
    std::vector<NormalizedValuation> u3_parts;
    std::vector<int> u3_live;
    for (int agent : cs.u3) {
        double aps =
            compute_aps(inst.valuations[agent], n4, residual_items).value;
        if (aps <= kValueTol) continue;  // content with the empty bundle
        u3_live.push_back(agent);
        u3_parts.push_back(normalize_aps(inst.valuations[agent], n4, residual_items));
    }

    // Hat partitions for U2: strip the pool via a matching that avoids the
    // owner, then renormalize for the n0 rounds to come.
    std::vector<NormalizedValuation> u2_hat;
    std::vector<int> u2_live;
    std::vector<char> in_u2(inst.n, 0);
    for (int agent : cs.u2) in_u2[agent] = 1;
    for (int agent : cs.u2) {
        double aps =
            compute_aps(inst.valuations[agent], n4, residual_items).value;
        if (aps <= kValueTol) continue;
        std::vector<char> allowed_agent(inst.n, 0);
        for (int other : cs.u2)
            if (other != agent) allowed_agent[other] = 1;
        std::vector<char> allowed_item(g.w_size(), 0);
        for (int w : cs.w2) allowed_item[w] = 1;
        Matching mj = restricted_max_matching(g, allowed_agent, allowed_item);
        if (mj.size < static_cast<int>(cs.w2.size()))
            throw InputError("case-4 payload violation: no owner-avoiding matching");
        std::vector<std::pair<int, int>> removals;
        for (int w : cs.w2) removals.push_back({mj.item_to_agent[w], g.items[w]});
        NormalizedValuation nv =
            normalize_aps(inst.valuations[agent], n4, residual_items);
        u2_hat.push_back(w3_partition_normalized(nv, removals, std::max(1, n0)));
        u2_live.push_back(agent);
    }

    RunParams u3_params = params;
    U3Result u3 = allocate_u3(u3_parts, w3, u2_hat, u3_params);
    rep.u3_run = u3.report;
    rep.u2_avg_before = u3.u2_avg_before;
    rep.u2_avg_after = u3.u2_avg_after;
    if (!u3.report.success)
        throw ExhaustedError("case-4 pool allocator exhausted", u3.report.failure_round);
    for (size_t idx = 0; idx < u3_live.size(); ++idx)
        rep.bundles[u3_live[idx]] = u3.report.final_bundles[idx];

    // Average-residual floor of the pool run, reported but never asserted.
    {
        double eps4 = 1.0 - static_cast<double>(cs.w2.size()) / inst.n;
        eps4 = std::min(std::max(eps4, 1e-9), 1.0 - 1e-9);
        try {
            double rho = solve_rho(alpha, regime_for(alpha) == AlphaRegime::Small
                                              ? RhoVariant::SmallAlpha
                                              : RhoVariant::BigAlpha);
            rep.u2_avg_floor =
                1.0 - 16.0 * alpha * eps4 / (3.0 * (1.0 - eps4) * (rho - alpha));
            rep.u2_floor_flag = rep.u2_avg_after < rep.u2_avg_floor - kValueTol;
        } catch (const SolverError&) {
            rep.u2_avg_floor = -std::numeric_limits<double>::infinity();
        }
    }

    // Greedy-average rounds for n0 agents of U2.
    int rounds = std::max(0, n0 - (static_cast<int>(cs.u2.size()) -
                                   static_cast<int>(u2_live.size())));
    std::vector<char> u2_served(u2_live.size(), 0);
    if (rounds > 0 && !u2_hat.empty()) {
        U2Result u2res = allocate_u2(u2_hat, u3.u2_parts, rounds, params.alpha);
        rep.u2_round_avg = u2res.round_avg;
        for (size_t t = 0; t < u2res.served.size(); ++t) {
            rep.bundles[u2_live[u2res.served[t]]] = u2res.bundles[t];
            u2_served[u2res.served[t]] = 1;
        }
        double eps0 = static_cast<double>(n0) / cs.u2.size();
        if (eps0 < 0.5 - 1e-9 && !u2res.round_avg.empty()) {
            rep.tau = eps0 / (1.0 - 2.0 * eps0);
            GammaConfig cfg;
            cfg.variant = regime_for(params.alpha);
            cfg.alpha = params.alpha;
            cfg.n = rounds;
            cfg.start = u2res.round_avg[0];
            cfg.tau = rep.tau;
            if (cfg.start > cfg.alpha + cfg.tau + kValueTol) {
                GammaTrace tr = gamma_trace(cfg, rounds);
                rep.gamma_hat = tr.values;
                for (size_t kk = 0; kk < tr.values.size(); ++kk)
                    if (u2res.round_avg[kk] < tr.values[kk] - rep.tau - kValueTol)
                        rep.gamma_hat_ok = false;
            } else {
                rep.gamma_hat_ok = false;
            }
        }
    }

    // Whoever remains in U2 is matched into the big items of the pool side.
    std::vector<char> allowed_agent(inst.n, 0), allowed_item(g.w_size(), 0);
    for (size_t idx = 0; idx < u2_live.size(); ++idx)
        if (!u2_served[idx]) allowed_agent[u2_live[idx]] = 1;
    for (int w : cs.w2) allowed_item[w] = 1;
    Matching final_match = restricted_max_matching(g, allowed_agent, allowed_item);
    for (size_t idx = 0; idx < u2_live.size(); ++idx) {
        int agent = u2_live[idx];
        if (u2_served[idx]) continue;
        int w = final_match.agent_to_item[agent];
        if (w < 0)
            throw InputError("case-4 payload violation: leftover agent unmatched");
        rep.bundles[agent].add(g.items[w]);
    }
    return rep;
}

}  // namespace fairdiv
