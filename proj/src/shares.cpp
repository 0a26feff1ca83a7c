#include "fairdiv/shares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fairdiv/lp.hpp"

namespace fairdiv {

namespace {

constexpr int kApsEnumCap = 16;  // 2^m LP columns
constexpr int kMmsItemCap = 12;
constexpr int kMmsAgentCap = 6;

// Valuation restricted to `items` and compressed to local indices, with a
// dense table of values over all local subsets.
struct LocalTable {
    int mm = 0;
    std::vector<int> to_global;
    std::vector<double> val;  // size 2^mm

    LocalTable(const XOSValuation& v, Bundle items) {
        to_global = items.items();
        mm = static_cast<int>(to_global.size());
        size_t sz = size_t{1} << mm;
        val.assign(sz, 0.0);
        std::vector<double> cval(sz);
        for (int j = 0; j < v.num_clauses(); ++j) {
            cval[0] = 0.0;
            for (size_t mask = 1; mask < sz; ++mask) {
                int e = __builtin_ctzll(mask);
                cval[mask] = cval[mask & (mask - 1)] + v.clause(j)[to_global[e]];
            }
            for (size_t mask = 0; mask < sz; ++mask)
                val[mask] = std::max(val[mask], cval[mask]);
        }
    }

    Bundle global(uint64_t mask) const {
        Bundle b;
        uint64_t x = mask;
        while (x) {
            int e = __builtin_ctzll(x);
            b.add(to_global[e]);
            x &= x - 1;
        }
        return b;
    }
};

}  // namespace

double FractionalPartition::total_weight() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight;
    return s;
}

double FractionalPartition::coverage(int e) const {
    double s = 0.0;
    for (const auto& en : entries)
        if (en.bundle.contains(e)) s += en.weight;
    return s;
}

double FractionalPartition::min_value(const XOSValuation& v) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) best = std::min(best, v.value(e.bundle));
    return entries.empty() ? 0.0 : best;
}

void FractionalPartition::validate() const {
    if (entries.empty()) throw InputError("fractional partition has no entries");
    double sum = 0.0;
    Bundle all;
    for (const auto& e : entries) {
        if (e.weight < -kValueTol) throw InputError("negative partition weight");
        sum += e.weight;
        all = all | e.bundle;
    }
    if (std::abs(sum - 1.0) > kValueTol)
        throw InputError("partition weights sum to " + std::to_string(sum));
    all.for_each([&](int e) {
        if (coverage(e) > entitlement + kValueTol)
            throw InputError("item coverage exceeds entitlement");
    });
}

ShareResult compute_mms(const XOSValuation& v, int n, Bundle items) {
    if (n < 1) throw InputError("compute_mms: n must be >= 1");
    if (n > kMmsAgentCap || items.count() > kMmsItemCap)
        throw CapacityError("compute_mms guarded to n <= 6, m <= 12");

    LocalTable t(v, items);
    const int mm = t.mm;
    const uint64_t full = mm == 0 ? 0 : ((uint64_t{1} << mm) - 1);

    ShareResult out;
    out.kind = ShareKind::MMS;
    if (n == 1) {
        out.value = t.val[full];
        out.partition = {items};
        return out;
    }
    if (mm == 0) {
        out.value = 0.0;
        out.partition.assign(n, Bundle());
        return out;
    }

    std::vector<uint64_t> cur(n, 0), best_part(n, 0);
    double best = -1.0;
    // Items in index order; item t may open at most one new bundle, which
    // cuts the n^m space by the bundle-permutation factor.
    auto dfs = [&](auto&& self, int item, int used, uint64_t rest) -> void {
        if (item == mm) {
            double mn = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) mn = std::min(mn, t.val[cur[j]]);
            if (mn > best) {
                best = mn;
                best_part = cur;
            }
            return;
        }
        double ub = used < n ? t.val[rest] : std::numeric_limits<double>::infinity();
        for (int j = 0; j < used; ++j) ub = std::min(ub, t.val[cur[j] | rest]);
        if (ub <= best) return;
        uint64_t bit = uint64_t{1} << item;
        int open = std::min(used + 1, n);
        for (int j = 0; j < open; ++j) {
            cur[j] |= bit;
            self(self, item + 1, std::max(used, j + 1), rest & ~bit);
            cur[j] &= ~bit;
        }
    };
    dfs(dfs, 0, 0, full);

    out.value = best;
    for (int j = 0; j < n; ++j) out.partition.push_back(t.global(best_part[j]));
    return out;
}

namespace {

// The APS LP at level z over the given columns; returns the solution vector
// when feasible.
bool aps_feasible(const std::vector<uint64_t>& cols, int mm, int n,
                  std::vector<double>* solution = nullptr) {
    LPProblem p;
    int nc = static_cast<int>(cols.size());
    LPProblem::Row sum_row;
    sum_row.coeffs.assign(nc, 1.0);
    sum_row.rel = Relation::Equal;
    sum_row.rhs = 1.0;
    p.rows.push_back(std::move(sum_row));
    for (int e = 0; e < mm; ++e) {
        LPProblem::Row r;
        r.coeffs.assign(nc, 0.0);
        for (int j = 0; j < nc; ++j)
            if ((cols[j] >> e) & 1u) r.coeffs[j] = 1.0;
        r.rel = Relation::LessEq;
        r.rhs = 1.0 / n;
        p.rows.push_back(std::move(r));
    }
    LPOutcome out = solve_lp(p);
    if (out.status != LPStatus::Optimal) return false;
    if (solution) *solution = std::move(out.solution);
    return true;
}

struct WitnessEntry {
    uint64_t mask;
    double weight;
};

// Raise every item's coverage to exactly 1/n by shifting weight from bundles
// missing the item onto their padded supersets. Supersets keep value >= z*
// by monotonicity, so the family stays valid.
void pad_to_exact_coverage(std::vector<WitnessEntry>& entries, int mm, int n) {
    auto coverage = [&](int e) {
        double c = 0.0;
        for (const auto& en : entries)
            if ((en.mask >> e) & 1u) c += en.weight;
        return c;
    };
    auto add_weight = [&](uint64_t mask, double w) {
        for (auto& en : entries)
            if (en.mask == mask) {
                en.weight += w;
                return;
            }
        entries.push_back({mask, w});
    };
    for (int e = 0; e < mm; ++e) {
        double deficit = 1.0 / n - coverage(e);
        while (deficit > 1e-15) {
            int donor = -1;
            for (size_t i = 0; i < entries.size(); ++i) {
                if ((entries[i].mask >> e) & 1u) continue;
                if (entries[i].weight <= 1e-15) continue;
                if (donor < 0 || entries[i].weight > entries[donor].weight)
                    donor = static_cast<int>(i);
            }
            if (donor < 0)
                throw SolverError("APS witness padding ran out of donor bundles");
            double delta = std::min(entries[donor].weight, deficit);
            entries[donor].weight -= delta;
            add_weight(entries[donor].mask | (uint64_t{1} << e), delta);
            deficit -= delta;
        }
    }
    entries.erase(std::remove_if(entries.begin(), entries.end(),
                                 [](const WitnessEntry& en) {
                                     return en.weight <= 1e-15;
                                 }),
                  entries.end());
}

// Caratheodory-style support reduction: while more bundles than rows remain,
// move along a kernel direction of the constraint matrix until some weight
// hits zero. All m+1 equalities are preserved exactly.
void reduce_support(std::vector<WitnessEntry>& entries, int mm) {
    const int rows = mm + 1;
    while (static_cast<int>(entries.size()) > rows) {
        const int k = static_cast<int>(entries.size());
        // A is rows x k: the all-ones row plus one indicator row per item.
        std::vector<std::vector<double>> a(rows, std::vector<double>(k, 0.0));
        for (int j = 0; j < k; ++j) {
            a[0][j] = 1.0;
            for (int e = 0; e < mm; ++e)
                if ((entries[j].mask >> e) & 1u) a[e + 1][j] = 1.0;
        }
        // Gaussian elimination to find a kernel vector.
        std::vector<int> pivot_col(rows, -1);
        int r = 0;
        for (int c = 0; c < k && r < rows; ++c) {
            int best = -1;
            for (int i = r; i < rows; ++i)
                if (best < 0 || std::abs(a[i][c]) > std::abs(a[best][c])) best = i;
            if (best < 0 || std::abs(a[best][c]) < 1e-12) continue;
            std::swap(a[r], a[best]);
            double inv = 1.0 / a[r][c];
            for (int j = c; j < k; ++j) a[r][j] *= inv;
            for (int i = 0; i < rows; ++i) {
                if (i == r) continue;
                double f = a[i][c];
                if (f == 0.0) continue;
                for (int j = c; j < k; ++j) a[i][j] -= f * a[r][j];
            }
            pivot_col[r] = c;
            ++r;
        }
        int free_col = -1;
        {
            std::vector<char> is_pivot(k, 0);
            for (int i = 0; i < r; ++i)
                if (pivot_col[i] >= 0) is_pivot[pivot_col[i]] = 1;
            for (int c = 0; c < k; ++c)
                if (!is_pivot[c]) {
                    free_col = c;
                    break;
                }
        }
        if (free_col < 0) return;  // full column rank, nothing to reduce
        std::vector<double> kernel(k, 0.0);
        kernel[free_col] = 1.0;
        for (int i = 0; i < r; ++i)
            if (pivot_col[i] >= 0) kernel[pivot_col[i]] = -a[i][free_col];
        // step to the first weight that reaches zero
        double step = std::numeric_limits<double>::infinity();
        bool positive = false;
        for (int j = 0; j < k; ++j)
            if (kernel[j] > 1e-12) {
                positive = true;
                step = std::min(step, entries[j].weight / kernel[j]);
            }
        if (!positive) {
            for (auto& x : kernel) x = -x;
            step = std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j)
                if (kernel[j] > 1e-12)
                    step = std::min(step, entries[j].weight / kernel[j]);
        }
        if (!std::isfinite(step))
            throw SolverError("APS witness reduction found an unbounded direction");
        for (int j = 0; j < k; ++j) entries[j].weight -= step * kernel[j];
        entries.erase(std::remove_if(entries.begin(), entries.end(),
                                     [](const WitnessEntry& en) {
                                         return en.weight <= 1e-12;
                                     }),
                      entries.end());
    }
}

}  // namespace

ShareResult compute_aps(const XOSValuation& v, int n, Bundle items) {
    if (n < 1) throw InputError("compute_aps: n must be >= 1");
    if (items.count() > kApsEnumCap)
        throw CapacityError("compute_aps enumeration capped at m <= 16");

    LocalTable t(v, items);
    const int mm = t.mm;
    const size_t sz = size_t{1} << mm;

    ShareResult out;
    out.kind = ShareKind::APS;
    if (mm == 0) {
        out.value = 0.0;
        out.fractional.entries.push_back({Bundle(), 1.0});
        out.fractional.entitlement = 1.0 / n;
        return out;
    }

    std::vector<double> levels = {0.0};
    levels.reserve(sz);
    for (size_t mask = 1; mask < sz; ++mask) levels.push_back(t.val[mask]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 levels.end());

    // Level-minimal bundles only: dropping any bundle that can lose an item
    // and stay at the level preserves feasibility (replace it by the smaller
    // bundle, coverage only shrinks) and cuts the LP down hard.
    auto minimal_cols = [&](double z) {
        std::vector<uint64_t> cols;
        for (size_t mask = 0; mask < sz; ++mask) {
            if (t.val[mask] < z - 1e-12) continue;
            bool minimal = true;
            uint64_t x = mask;
            while (x) {
                uint64_t bit = x & (~x + 1);
                if (t.val[mask & ~bit] >= z - 1e-12) {
                    minimal = false;
                    break;
                }
                x &= x - 1;
            }
            if (minimal) cols.push_back(mask);
        }
        return cols;
    };

    int lo = 0, hi = static_cast<int>(levels.size()) - 1;  // levels[0]=0 feasible
    while (lo < hi) {
        int mid = (lo + hi + 1) / 2;
        if (aps_feasible(minimal_cols(levels[mid]), mm, n))
            lo = mid;
        else
            hi = mid - 1;
    }
    double zstar = levels[lo];

    // Witness: a basic solution over the minimal bundles, padded to exact
    // per-item coverage 1/n (supersets stay above the level), then reduced
    // back to at most m+1 bundles along kernel directions.
    std::vector<uint64_t> cols = minimal_cols(zstar);
    std::vector<double> solution;
    if (!aps_feasible(cols, mm, n, &solution))
        throw SolverError("APS witness LP infeasible at the optimal level");
    std::vector<WitnessEntry> entries;
    for (size_t j = 0; j < cols.size(); ++j)
        if (solution[j] > 1e-12) entries.push_back({cols[j], solution[j]});
    if (entries.empty()) entries.push_back({0, 1.0});
    pad_to_exact_coverage(entries, mm, n);
    reduce_support(entries, mm);

    out.value = zstar;
    out.fractional.entitlement = 1.0 / n;
    for (const auto& en : entries)
        out.fractional.entries.push_back({t.global(en.mask), en.weight});
    double mn = out.fractional.min_value(v);
    if (std::abs(mn - zstar) > kValueTol)
        throw SolverError("APS witness min value drifted from the optimum");
    return out;
}

double NormalizedValuation::additive_value(int s, Bundle b) const {
    const auto& f = support[s].additive;
    double sum = 0.0;
    b.for_each([&](int e) { sum += f[e]; });
    return sum;
}

double NormalizedValuation::beta(const std::vector<Bundle>& current) const {
    double sum = 0.0;
    for (size_t s = 0; s < support.size(); ++s)
        sum += support[s].weight * additive_value(static_cast<int>(s), current[s]);
    return sum;
}

FractionalPartition NormalizedValuation::partition() const {
    FractionalPartition fp;
    fp.entitlement = 1.0 / n;
    for (const auto& s : support) fp.entries.push_back({s.bundle, s.weight});
    return fp;
}

NormalizedValuation normalize_aps(const XOSValuation& v, int n, Bundle items) {
    ShareResult aps = compute_aps(v, n, items);
    if (aps.value <= kValueTol)
        throw DegenerateError("normalize_aps: APS is zero, nothing to scale");

    NormalizedValuation nv;
    nv.n = n;
    nv.m = v.num_items();
    nv.scale = aps.value;
    nv.items = items;

    std::vector<std::vector<double>> clauses;
    for (const auto& entry : aps.fractional.entries) {
        Bundle s = entry.bundle;
        NormalizedValuation::Support sup;
        sup.bundle = s;
        sup.weight = entry.weight;
        sup.additive.assign(nv.m, 0.0);
        if (!s.empty()) {
            int k = v.maximizing_clause(s);
            double denom = v.clause_value(k, s);
            s.for_each([&](int e) { sup.additive[e] = v.clause(k)[e] / denom; });
        }
        clauses.push_back(sup.additive);
        nv.support.push_back(std::move(sup));
    }
    nv.valuation = XOSValuation(std::move(clauses));
    return nv;
}

BigItemReduction strip_big_items(const Instance& inst, double alpha) {
    inst.validate();
    if (!(alpha > 0.0) || alpha > 1.0)
        throw InputError("strip_big_items: alpha must lie in (0, 1]");

    std::vector<int> agents(inst.n);
    for (int i = 0; i < inst.n; ++i) agents[i] = i;
    Bundle remaining = Bundle::full(inst.m);

    BigItemReduction red;
    red.original_aps.resize(inst.n);
    for (int i = 0; i < inst.n; ++i)
        red.original_aps[i] =
            compute_aps(inst.valuations[i], inst.n, remaining).value;

    while (!agents.empty()) {
        int na = static_cast<int>(agents.size());
        bool granted = false;
        for (size_t ai = 0; ai < agents.size() && !granted; ++ai) {
            int i = agents[ai];
            double aps = compute_aps(inst.valuations[i], na, remaining).value;
            if (aps <= kValueTol) continue;
            std::vector<int> items = remaining.items();
            for (int e : items) {
                if (inst.valuations[i].item_value(e) >= alpha * aps - kValueTol) {
                    red.grants.push_back({i, e, inst.valuations[i].item_value(e), aps});
                    agents.erase(agents.begin() + ai);
                    remaining.remove(e);
                    granted = true;
                    break;
                }
            }
        }
        if (!granted) break;
    }

    red.agent_map = agents;
    red.item_map = remaining.items();

    Instance res;
    res.n = static_cast<int>(agents.size());
    res.m = static_cast<int>(red.item_map.size());
    for (int i : agents) {
        std::vector<std::vector<double>> clauses;
        for (const auto& c : inst.valuations[i].clauses()) {
            std::vector<double> row;
            for (int e : red.item_map) row.push_back(c[e]);
            clauses.push_back(std::move(row));
        }
        res.valuations.emplace_back(std::move(clauses));
    }
    red.residual = std::move(res);

    if (red.residual.n > 0) {
        Bundle rfull = Bundle::full(red.residual.m);
        for (int i = 0; i < red.residual.n; ++i) {
            double after =
                compute_aps(red.residual.valuations[i], red.residual.n, rfull).value;
            red.residual_aps.push_back(after);
            if (after < red.original_aps[red.agent_map[i]] - kValueTol)
                throw SolverError("residual APS decreased after big-item removal");
        }
    }
    return red;
}

FractionalPartition reweight_after_removal(const FractionalPartition& fp, int item,
                                           int n) {
    if (n < 2) throw InputError("reweight_after_removal needs n >= 2");
    double surviving = 0.0;
    for (const auto& e : fp.entries)
        if (!e.bundle.contains(item)) surviving += e.weight;
    if (surviving <= kValueTol)
        throw DegenerateError("all partition weight sits on bundles with the item");

    FractionalPartition out;
    out.entitlement = 1.0 / (n - 1);
    double scale = static_cast<double>(n) / (n - 1);
    for (const auto& e : fp.entries)
        if (!e.bundle.contains(item) && e.weight > 0.0)
            out.entries.push_back({e.bundle, e.weight * scale});
    return out;
}

}  // namespace fairdiv
