#ifndef FAIRDIV_SHARES_HPP
#define FAIRDIV_SHARES_HPP

#include <vector>

#include "fairdiv/core.hpp"

namespace fairdiv {

// Weighted bundle family {(B, lambda_B)}: weights sum to 1 and no item is
// covered by more than the entitlement.
struct FractionalPartition {
    struct Entry {
        Bundle bundle;
        double weight = 0.0;
    };
    std::vector<Entry> entries;
    double entitlement = 0.0;

    double total_weight() const;
    double coverage(int e) const;
    double min_value(const XOSValuation& v) const;
    void validate() const;
};

enum class ShareKind { APS, MMS };

struct ShareResult {
    ShareKind kind = ShareKind::APS;
    double value = 0.0;
    FractionalPartition fractional;  // APS witness
    std::vector<Bundle> partition;   // MMS witness: exact partition of the items
};

// Exact max-min over all partitions of `items` into n (possibly empty)
// bundles. Guarded to n <= 6, m <= 12; symmetry broken by assigning items in
// index order with canonical bundle opening.
ShareResult compute_mms(const XOSValuation& v, int n, Bundle items);

// Exact anyprice share: the largest achievable bundle value z such that the
// feasibility LP {lambda >= 0 over bundles with v(B) >= z, sum lambda = 1,
// per-item coverage <= 1/n} admits a solution. The search runs over the
// sorted distinct bundle values; the returned witness is a basic solution of
// the equality-coverage LP at the optimum, so every item is covered exactly
// 1/n and the support has at most m+1 bundles.
ShareResult compute_aps(const XOSValuation& v, int n, Bundle items);

// Valuation scaled so APS = 1, rebuilt as a max over one additive function
// per support bundle. Each support bundle has value exactly 1 under its own
// function, and the rebuilt valuation is pointwise below v / APS.
struct NormalizedValuation {
    int n = 0;
    int m = 0;
    double scale = 1.0;  // the original APS value
    Bundle items;
    XOSValuation valuation;
    struct Support {
        Bundle bundle;
        double weight = 0.0;
        std::vector<double> additive;  // dedicated linear form, zero off the bundle
    };
    std::vector<Support> support;

    double additive_value(int s, Bundle b) const;
    // beta potential of a filtration: sum_s weight_s * v_s(current[s])
    double beta(const std::vector<Bundle>& current) const;
    FractionalPartition partition() const;
};

NormalizedValuation normalize_aps(const XOSValuation& v, int n, Bundle items);

// Claim-style reduction: while some agent values a single item at or above
// alpha times her APS, give it to her and drop both. Residual agents keep
// at least their original APS (recomputed and checked).
struct BigItemReduction {
    struct Grant {
        int agent;
        int item;
        double item_value;
        double aps_at_grant;
    };
    std::vector<Grant> grants;
    Instance residual;
    std::vector<int> agent_map;  // residual index -> original agent
    std::vector<int> item_map;   // residual index -> original item
    std::vector<double> original_aps;  // per original agent, before any removal
    std::vector<double> residual_aps;  // per residual agent, after all removals
};

BigItemReduction strip_big_items(const Instance& inst, double alpha);

// Item-removal weight transfer: mu_S = n/(n-1) * lambda_S for
// S not containing e, zero otherwise; output entitlement 1/(n-1).
FractionalPartition reweight_after_removal(const FractionalPartition& fp, int item,
                                           int n);

}  // namespace fairdiv

#endif
