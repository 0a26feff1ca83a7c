#include "fairdiv/randomized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "fairdiv/processes.hpp"

namespace fairdiv {

using nlohmann::json;

double damage(const NormalizedValuation& vj, Bundle b) {
    double sum = 0.0;
    for (size_t s = 0; s < vj.support.size(); ++s)
        sum += vj.support[s].weight *
               vj.additive_value(static_cast<int>(s), b & vj.support[s].bundle);
    return sum;
}

double total_damage(const std::vector<NormalizedValuation>& agents, int i, Bundle b) {
    double sum = 0.0;
    for (size_t j = 0; j < agents.size(); ++j)
        if (static_cast<int>(j) != i) sum += damage(agents[j], b);
    return sum;
}

std::vector<std::vector<int>> prune_dangerous(
    const std::vector<NormalizedValuation>& agents,
    std::vector<FilteredPartition>& parts, double D) {
    if (!(D > 0.0)) throw InputError("prune_dangerous: D must be positive");
    std::vector<std::vector<int>> dropped(agents.size());
    for (size_t i = 0; i < agents.size(); ++i) {
        for (size_t s = 0; s < agents[i].support.size(); ++s) {
            if (total_damage(agents, static_cast<int>(i), agents[i].support[s].bundle) >
                D) {
                parts[i].current[s] = Bundle();
                dropped[i].push_back(static_cast<int>(s));
            }
        }
    }
    return dropped;
}

FilteredPartition filter_step(const NormalizedValuation& picker_vals, int picker_parent,
                              const NormalizedValuation& vj, Bundle b,
                              const FilteredPartition& part, double c) {
    if (!(c > 0.0)) throw InputError("filter_step: c must be positive");
    const size_t k = vj.support.size();
    std::vector<int> order(k);
    for (size_t s = 0; s < k; ++s) order[s] = static_cast<int>(s);
    std::vector<double> key(k);
    for (size_t s = 0; s < k; ++s)
        key[s] = picker_vals.additive_value(picker_parent, b & part.current[s]);
    // stable: equal keys keep bundle-id order
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int bidx) { return key[a] > key[bidx] + 1e-15; });

    FilteredPartition out = part;
    double spent = 0.0;
    for (int s : order) {
        double dmg = vj.support[s].weight * vj.additive_value(s, b & part.current[s]);
        if (spent + dmg > c + 1e-12) break;
        spent += dmg;
        out.current[s] = part.current[s].minus(b);
    }
    return out;
}

double RunReport::stolen_bound() const {
    double cn = params.c * n;
    if (cn <= 1.0) return std::numeric_limits<double>::infinity();
    return params.D / (params.c * (cn - 1.0));
}

std::string RunReport::to_json() const {
    json doc;
    doc["n"] = n;
    doc["success"] = success;
    doc["failure_round"] = failure_round;
    doc["params"] = {{"alpha", params.alpha},
                     {"c", params.c},
                     {"D", params.D},
                     {"seed", params.seed},
                     {"eps", params.eps}};
    auto bundles_json = [](const std::vector<Bundle>& bs) {
        json arr = json::array();
        for (const auto& b : bs) arr.push_back(b.items());
        return arr;
    };
    doc["initial_bundles"] = bundles_json(initial_bundles);
    doc["final_bundles"] = bundles_json(final_bundles);
    doc["initial_value"] = initial_value;
    doc["final_value"] = final_value;
    doc["beta_initial"] = beta_initial;
    json beta_rows = json::array();
    for (const auto& row : beta) {
        json r = json::array();
        for (double x : row)
            r.push_back(std::isnan(x) ? json() : json(x));
        beta_rows.push_back(std::move(r));
    }
    doc["beta"] = std::move(beta_rows);
    json draws_json = json::array();
    for (const auto& d : draws)
        draws_json.push_back({{"round", d.round},
                              {"agent", d.agent},
                              {"candidate", d.candidate_index},
                              {"items", d.sampled.items()}});
    doc["draws"] = std::move(draws_json);
    json flags = json::array();
    for (const auto& [agent, round] : event_flags)
        flags.push_back({{"agent", agent}, {"round", round}});
    doc["event_flags"] = std::move(flags);
    return doc.dump(2);
}

RunReport allocate_different(const std::vector<NormalizedValuation>& agents,
                             const RunParams& params) {
    const int n = static_cast<int>(agents.size());
    if (n < 2) throw InputError("allocate_different needs n >= 2 agents");
    for (const auto& a : agents)
        if (a.n != n)
            throw InputError("allocate_different: partition entitlement mismatch");

    RunReport rep;
    rep.n = n;
    rep.params = params;
    rep.initial_bundles.assign(n, Bundle());
    rep.final_bundles.assign(n, Bundle());
    rep.parent_of.assign(n, -1);
    rep.initial_value.assign(n, 0.0);
    rep.final_value.assign(n, 0.0);

    std::vector<FilteredPartition> parts(n);
    for (int i = 0; i < n; ++i)
        for (const auto& s : agents[i].support) parts[i].current.push_back(s.bundle);
    rep.dropped_dangerous = prune_dangerous(agents, parts, params.D);
    for (int i = 0; i < n; ++i) rep.beta_initial.push_back(parts[i].beta(agents[i]));

    // Deterministic per-round monitor traces, one per agent, started at the
    // post-pruning potential. Violations are reported, never fatal.
    std::vector<GammaTrace> monitor(params.eps > 0.0 ? n : 0);
    if (params.eps > 0.0) {
        for (int i = 0; i < n; ++i) {
            GammaConfig cfg;
            cfg.variant = regime_for(params.alpha);
            cfg.alpha = params.alpha;
            cfg.n = n;
            cfg.start = rep.beta_initial[i];
            cfg.eps = params.eps;
            if (cfg.start > cfg.alpha + cfg.eps)
                monitor[i] = gamma_trace(cfg, n);
        }
    }

    Rng rng(params.seed);
    std::vector<char> active(n, 1);

    for (int k = 1; k <= n; ++k) {
        std::vector<double> betas(n, std::numeric_limits<double>::quiet_NaN());
        int pick = -1;
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
            if (!active[i]) continue;
            betas[i] = parts[i].beta(agents[i]);
            if (betas[i] > best + 1e-12) {
                best = betas[i];
                pick = i;
            }
        }
        rep.beta.push_back(betas);
        if (params.eps > 0.0)
            for (int i = 0; i < n; ++i) {
                if (!active[i] || monitor[i].values.empty()) continue;
                if (k - 1 < static_cast<int>(monitor[i].values.size()) &&
                    betas[i] < monitor[i].values[k - 1] - params.eps - kValueTol)
                    rep.event_flags.push_back({i, k});
            }

        if (best < params.alpha - kValueTol) {
            rep.failure_round = k;
            return rep;
        }

        CandidateDistribution cd;
        try {
            PartitionView view{&agents[pick], &parts[pick].current};
            cd = build_distribution(classify_bundles(view, params.alpha), n);
        } catch (const ExhaustedError&) {
            rep.failure_round = k;
            return rep;
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
        rep.draws.push_back({k, pick, chosen, cand.items});
        rep.initial_bundles[pick] = cand.items;
        rep.parent_of[pick] = cand.parent;
        rep.final_bundles[pick] = cand.items;
        rep.initial_value[pick] = agents[pick].additive_value(cand.parent, cand.items);
        active[pick] = 0;

        // Stealing: later winners take contested items back from earlier ones.
        for (int h = 0; h < n; ++h)
            if (!active[h] && h != pick)
                rep.final_bundles[h] = rep.final_bundles[h].minus(cand.items);

        for (int j = 0; j < n; ++j)
            if (active[j])
                parts[j] = filter_step(agents[pick], cand.parent, agents[j],
                                       cand.items, parts[j], params.c);
    }

    for (int i = 0; i < n; ++i)
        rep.final_value[i] =
            agents[i].additive_value(rep.parent_of[i], rep.final_bundles[i]);
    rep.success = true;
    return rep;
}

}  // namespace fairdiv
