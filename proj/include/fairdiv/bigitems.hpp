#ifndef FAIRDIV_BIGITEMS_HPP
#define FAIRDIV_BIGITEMS_HPP

#include <optional>
#include <vector>

#include "fairdiv/randomized.hpp"
#include "fairdiv/shares.hpp"

namespace fairdiv {

// Agents on the left, items on the right; an edge marks an item worth at
// least alpha times the agent's APS scale.
struct BigItemGraph {
    int n = 0;
    std::vector<int> items;              // right side, global item ids
    std::vector<std::vector<int>> adj;   // agent -> sorted right-side indices

    int w_size() const { return static_cast<int>(items.size()); }
    int degree(int u) const { return static_cast<int>(adj[u].size()); }
};

BigItemGraph build_big_item_graph(const Instance& inst, double alpha,
                                  const std::vector<double>& aps);

struct Matching {
    std::vector<int> agent_to_item;  // right-side index or -1
    std::vector<int> item_to_agent;  // agent id or -1
    int size = 0;
};

// Maximum matching by augmenting paths; deterministic scan order.
Matching max_matching(const BigItemGraph& g);
// Greedy extension of the preseed to a maximal matching.
Matching maximal_matching(const BigItemGraph& g, const Matching& preseed);

// The four structural cases. Agent lists hold agent ids, item lists hold
// right-side indices of the graph.
struct CaseResult {
    int which = 0;
    Matching matching;  // case 1: saturating; case 2: maximal; cases 3-4: (U1,W1)
    std::vector<int> u1, u2, u3;
    std::vector<int> w1, w2, w3;
};

// Constructive classification: try a saturating matching, then a small
// maximal matching, then the degree-bounded split, and otherwise build the
// four-part refinement.
CaseResult classify_cases(const BigItemGraph& g, double eps);

// Bundles each agent keeps for drawing in the capped-welfare step; every
// bundle is worth at least 1-alpha inside the item pool.
struct SurvivingFamily {
    std::vector<Bundle> bundles;
    std::vector<double> weights;
};

// Every agent ends with capped value at least (1-alpha)/2: exact welfare
// maximisation when the assignment space is small, otherwise seeded local
// search driven by the randomized improvement step.
std::vector<Bundle> capped_welfare_allocate(
    const std::vector<const NormalizedValuation*>& agents,
    const std::vector<SurvivingFamily>& families, Bundle items, double alpha,
    uint64_t seed);

// Removal chain along a matching that avoids agent j: the partition loses
// every pool item, keeps only bundles inside the leftover items, and is
// declared for entitlement 1/n0.
NormalizedValuation w3_partition_normalized(const NormalizedValuation& nv_j,
                                            const std::vector<std::pair<int, int>>&
                                                removals,  // (agent, global item)
                                            int n0);
FractionalPartition w3_partition(const NormalizedValuation& nv_j,
                                 const std::vector<std::pair<int, int>>& removals,
                                 int n0);

struct U3Result {
    RunReport report;  // indices are positions within the u3 agent list
    std::vector<FilteredPartition> u2_parts;
    double u2_avg_before = 0.0;
    double u2_avg_after = 0.0;
};

// Restricted randomized allocator: only the listed agents are served and
// only pool items are drawn, while observer partitions lose each sampled
// bundle in full.
U3Result allocate_u3(const std::vector<NormalizedValuation>& u3_agents, Bundle pool,
                     const std::vector<NormalizedValuation>& u2_hat,
                     const RunParams& params);

struct U2Result {
    std::vector<int> served;          // positions in the u2 list, pick order
    std::vector<Bundle> bundles;      // same order as served
    std::vector<double> values;       // additive value of each pick
    std::vector<double> round_avg;    // average active potential per round
};

// Greedy-average allocator for n0 rounds over the filtered hat-partitions.
U2Result allocate_u2(const std::vector<NormalizedValuation>& u2_hat,
                     std::vector<FilteredPartition>& parts, int n0, double alpha);

struct BigItemsReport {
    int case_id = 0;
    CaseResult cases;
    std::vector<Bundle> bundles;  // per original agent
    std::vector<double> aps;      // APS of every agent on the full instance

    // case-2 recursion diagnostics
    std::optional<RunReport> residual_run;

    // case-4 diagnostics
    std::optional<RunReport> u3_run;
    double u2_avg_before = 0.0;
    double u2_avg_after = 0.0;
    double u2_avg_floor = 0.0;
    bool u2_floor_flag = false;
    std::vector<double> u2_round_avg;
    std::vector<double> gamma_hat;  // matching tau-offset trace
    double tau = 0.0;
    bool gamma_hat_ok = true;
};

// Case dispatch on the full instance. eps defaults to 1/240.
BigItemsReport allocate_with_big_items(const Instance& inst, double alpha,
                                       const RunParams& params,
                                       double eps = 1.0 / 240.0);

// No-big-items pipeline: strip, then allocate the residual with the
// randomized allocator (direct search below three agents).
struct PlainReport {
    BigItemReduction reduction;
    std::optional<RunReport> run;  // set when the randomized allocator ran
    std::vector<Bundle> bundles;   // per original agent
    bool success = true;
    int failure_round = -1;
};

PlainReport allocate_plain(const Instance& inst, double alpha, const RunParams& params);

}  // namespace fairdiv

#endif
