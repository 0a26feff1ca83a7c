#include "fairdiv/identical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace fairdiv {

std::vector<Bundle> unify_items(const NormalizedValuation& nv, int s, Bundle within,
                                double alpha) {
    struct Atom {
        Bundle items;
        double value;
    };
    std::vector<Atom> atoms;
    Bundle scope = nv.support[s].bundle & within;
    scope.for_each([&](int e) {
        atoms.push_back({Bundle::single(e), nv.support[s].additive[e]});
    });
    auto by_value = [](const Atom& a, const Atom& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.items.bits() < b.items.bits();
    };
    while (atoms.size() >= 2) {
        std::sort(atoms.begin(), atoms.end(), by_value);
        if (atoms[0].value + atoms[1].value >= alpha - kValueTol) break;
        atoms[0].items = atoms[0].items | atoms[1].items;
        atoms[0].value += atoms[1].value;
        atoms.erase(atoms.begin() + 1);
    }
    // Largest first; ties by lowest member index for determinism.
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.items.bits() < b.items.bits();
    });
    std::vector<Bundle> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) out.push_back(a.items);
    return out;
}

namespace {

// Acceptable sub-bundles per the pairing construction: band 2 yields three
// cyclic pairs with every item in at most two of them, band 3 yields two
// disjoint pairs. Falls back to the whole surviving set (band-1 treatment)
// when an oversized single item leaves too few atoms to pair.
void build_family_subs(const NormalizedValuation& nv, int s, Bundle within,
                       double alpha, ClassPartition::Family& fam) {
    Bundle whole = nv.support[s].bundle & within;
    if (fam.band == 0) {
        fam.credit = 0.0;
        return;
    }
    if (fam.band == 1) {
        fam.credit = 1.0;
        fam.prob_divisor = 1;
        fam.subs = {whole};
        return;
    }
    std::vector<Bundle> atoms = unify_items(nv, s, within, alpha);
    auto val = [&](const Bundle& b) { return nv.additive_value(s, b); };
    auto degrade = [&]() {
        fam.degraded = true;
        fam.credit = 1.0;
        fam.prob_divisor = 1;
        fam.subs = {whole};
    };
    if (fam.band == 2) {
        // three sub-bundles, each item in at most two
        if (atoms.size() >= 3) {
            fam.credit = 1.5;
            fam.prob_divisor = 2;
            fam.subs = {atoms[0] | atoms[1], atoms[1] | atoms[2], atoms[2] | atoms[0]};
        } else if (atoms.size() == 2 && val(atoms[0]) >= alpha - kValueTol &&
                   val(atoms[1]) >= alpha - kValueTol) {
            fam.credit = 1.5;
            fam.prob_divisor = 2;
            fam.subs = {atoms[0], atoms[1], atoms[0] | atoms[1]};
        } else {
            degrade();
        }
        return;
    }
    // band 3: two disjoint sub-bundles
    if (atoms.size() >= 4) {
        fam.credit = 2.0;
        fam.prob_divisor = 1;
        fam.subs = {atoms[0] | atoms[1], atoms[2] | atoms[3]};
    } else if (atoms.size() == 3 && val(atoms[0]) >= alpha - kValueTol) {
        fam.credit = 2.0;
        fam.prob_divisor = 1;
        fam.subs = {atoms[0], atoms[1] | atoms[2]};
    } else if (atoms.size() == 2 && val(atoms[0]) >= alpha - kValueTol &&
               val(atoms[1]) >= alpha - kValueTol) {
        fam.credit = 2.0;
        fam.prob_divisor = 1;
        fam.subs = {atoms[0], atoms[1]};
    } else {
        degrade();
    }
}

}  // namespace

ClassPartition classify_bundles(const PartitionView& view, double alpha) {
    if (!(alpha > 0.0)) throw InputError("classify_bundles: alpha must be positive");
    const NormalizedValuation& nv = *view.val;
    ClassPartition cp;
    for (size_t s = 0; s < nv.support.size(); ++s) {
        double w = nv.support[s].weight;
        if (w <= kValueTol) continue;
        Bundle within = (*view.current)[s];
        double value = nv.additive_value(static_cast<int>(s), within);
        ClassPartition::Family fam;
        fam.parent = static_cast<int>(s);
        fam.weight = w;
        if (value < alpha - kValueTol)
            fam.band = 0;
        else if (value < 2.0 * alpha - kValueTol)
            fam.band = 1;
        else if (value < 3.0 * alpha - kValueTol)
            fam.band = 2;
        else
            fam.band = 3;
        build_family_subs(nv, static_cast<int>(s), within, alpha, fam);
        cp.band_weight[fam.band] += w;
        cp.lambda_total += fam.credit * w;
        cp.families.push_back(std::move(fam));
    }
    return cp;
}

CandidateDistribution build_distribution(const ClassPartition& cp, int n) {
    if (cp.lambda_total <= kValueTol)
        throw ExhaustedError(
            "no acceptable bundle: every surviving class is below alpha", -1);
    CandidateDistribution cd;
    cd.lambda_total = cp.lambda_total;
    cd.item_probability_bound = 1.0 / (n * cp.lambda_total);
    for (const auto& fam : cp.families) {
        if (fam.band == 0 || fam.subs.empty()) continue;
        double prob = fam.weight / (fam.prob_divisor * cp.lambda_total);
        for (size_t k = 0; k < fam.subs.size(); ++k)
            cd.candidates.push_back(
                {fam.subs[k], prob, fam.parent, static_cast<int>(k), 0.0});
    }
    return cd;
}

GreedyState GreedyState::start(const NormalizedValuation& nv) {
    GreedyState st;
    st.val = &nv;
    st.remaining = nv.items;
    for (const auto& s : nv.support) st.current.push_back(s.bundle);
    st.beta = nv.beta(st.current);
    return st;
}

namespace {

double removal_loss(const GreedyState& st, Bundle b) {
    const NormalizedValuation& nv = *st.val;
    double loss = 0.0;
    for (size_t s = 0; s < nv.support.size(); ++s)
        loss += nv.support[s].weight *
                nv.additive_value(static_cast<int>(s), st.current[s] & b);
    return loss;
}

}  // namespace

StepResult greedy_step(GreedyState& state, double alpha, GreedyMode mode) {
    const NormalizedValuation& nv = *state.val;
    ClassPartition cp = classify_bundles(state.view(), alpha);

    StepResult res;
    res.lambda_total = cp.lambda_total;
    res.band_weight = cp.band_weight;

    Bundle best;
    int best_parent = -1;
    double best_after = -1.0;
    bool found = false;

    if (mode == GreedyMode::Efficient) {
        CandidateDistribution cd;
        try {
            cd = build_distribution(cp, nv.n);
        } catch (const ExhaustedError&) {
            throw ExhaustedError("greedy step found no acceptable candidate",
                                 state.round);
        }
        for (const auto& c : cd.candidates) {
            double after = state.beta - removal_loss(state, c.items);
            if (!found || after > best_after + 1e-12) {
                best = c.items;
                best_parent = c.parent;
                best_after = after;
                found = true;
            }
        }
    } else {
        for (size_t s = 0; s < nv.support.size(); ++s) {
            if (nv.support[s].weight <= kValueTol) continue;
            Bundle scope = state.current[s];
            if (scope.count() > 20)
                throw CapacityError(
                    "exhaustive-minimal mode capped at 20 items per bundle");
            std::vector<int> items = scope.items();
            int k = static_cast<int>(items.size());
            for (uint64_t mask = 1; mask < (uint64_t{1} << k); ++mask) {
                Bundle b;
                for (int t = 0; t < k; ++t)
                    if ((mask >> t) & 1u) b.add(items[t]);
                double v = nv.additive_value(static_cast<int>(s), b);
                if (v < alpha - kValueTol) continue;
                bool minimal = true;
                b.for_each([&](int e) {
                    Bundle sub = b;
                    sub.remove(e);
                    if (nv.additive_value(static_cast<int>(s), sub) >=
                        alpha - kValueTol)
                        minimal = false;
                });
                if (!minimal) continue;
                double after = state.beta - removal_loss(state, b);
                if (!found || after > best_after + 1e-12) {
                    best = b;
                    best_parent = static_cast<int>(s);
                    best_after = after;
                    found = true;
                }
            }
        }
        if (!found)
            throw ExhaustedError("no minimal acceptable bundle survives", state.round);
    }

    res.chosen = best;
    res.parent = best_parent;
    res.beta_after = best_after;

    state.remaining = state.remaining.minus(best);
    for (auto& cur : state.current) cur = cur.minus(best);
    state.beta = best_after;
    state.round += 1;
    return res;
}

IdenticalResult allocate_identical(const NormalizedValuation& nv, int n, double alpha,
                                   GreedyMode mode) {
    if (n < 1) throw InputError("allocate_identical: n must be >= 1");
    GreedyState st = GreedyState::start(nv);
    IdenticalResult out;
    std::vector<int> parents;
    for (int i = 0; i < n; ++i) {
        double beta_before = st.beta;
        StepResult step = greedy_step(st, alpha, mode);
        out.trace.push_back({i + 1, beta_before, step.lambda_total, step.band_weight});
        out.bundles.push_back(step.chosen);
        parents.push_back(step.parent);
    }
    out.trace.push_back({n + 1, st.beta, 0.0, {0.0, 0.0, 0.0, 0.0}});
    // Leftovers go to the last agent; values are monotone so nothing is lost.
    out.bundles.back() = out.bundles.back() | st.remaining;
    for (int i = 0; i < n; ++i) {
        out.values.push_back(nv.valuation.value(out.bundles[i]));
        out.parent_values.push_back(nv.additive_value(parents[i], out.bundles[i]));
    }
    return out;
}

std::string beta_trace_csv(const std::vector<BetaTraceRow>& trace) {
    std::ostringstream ss;
    ss << "round,beta,lambda,w_alpha,w_2alpha,w_3alpha,w_1\n";
    ss.precision(12);
    for (const auto& r : trace)
        ss << r.round << ',' << r.beta << ',' << r.lambda_total << ','
           << r.band_weight[0] << ',' << r.band_weight[1] << ',' << r.band_weight[2]
           << ',' << r.band_weight[3] << '\n';
    return ss.str();
}

}  // namespace fairdiv
