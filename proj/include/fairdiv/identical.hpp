#ifndef FAIRDIV_IDENTICAL_HPP
#define FAIRDIV_IDENTICAL_HPP

#include <array>
#include <vector>

#include "fairdiv/shares.hpp"

namespace fairdiv {

// A filtration of a normalized partition: current[s] holds the items still
// counted for support bundle s. The identical allocator keeps S cap M^i
// here; the randomized allocator keeps its per-agent filtered sets.
struct PartitionView {
    const NormalizedValuation* val = nullptr;
    const std::vector<Bundle>* current = nullptr;
};

// Surviving support bundles bucketed by their current value band
// [(t-1)a, ta) (top band reaches 1), with the acceptable sub-bundles each
// band contributes and its weight credit toward Lambda.
struct ClassPartition {
    struct Family {
        int parent = -1;  // support index
        int band = 0;     // 0: below alpha, 1: [a,2a), 2: [2a,3a), 3: [3a,1]
        double weight = 0.0;
        double credit = 0.0;        // 0, 1, 3/2, 2
        int prob_divisor = 1;       // per-copy weight is lambda/(divisor*Lambda)
        bool degraded = false;      // fallback when too few atoms (big items)
        std::vector<Bundle> subs;   // each of value >= alpha
    };
    std::array<double, 4> band_weight = {0.0, 0.0, 0.0, 0.0};
    double lambda_total = 0.0;  // 0*L_a + 1*L_2a + 3/2*L_3a + 2*L_1
    std::vector<Family> families;
};

struct Candidate {
    Bundle items;
    double probability = 0.0;
    int parent = -1;
    int sub_index = 0;
    double value = 0.0;  // under the parent bundle's additive form
};

struct CandidateDistribution {
    std::vector<Candidate> candidates;
    double item_probability_bound = 0.0;  // 1/(n*Lambda)
    double lambda_total = 0.0;
};

// Greedy pairing of unified items: atoms merge in ascending additive value
// until any two carry at least alpha together.
std::vector<Bundle> unify_items(const NormalizedValuation& nv, int s, Bundle within,
                                double alpha);

ClassPartition classify_bundles(const PartitionView& view, double alpha);

// Throws ExhaustedError when every surviving bundle sits below alpha.
CandidateDistribution build_distribution(const ClassPartition& cp, int n);

struct GreedyState {
    const NormalizedValuation* val = nullptr;
    std::vector<Bundle> current;  // per support bundle
    Bundle remaining;
    int round = 1;
    double beta = 0.0;

    static GreedyState start(const NormalizedValuation& nv);
    PartitionView view() const { return {val, &current}; }
};

enum class GreedyMode { Efficient, ExhaustiveMinimal };

struct StepResult {
    Bundle chosen;
    int parent = -1;
    double beta_after = 0.0;
    double lambda_total = 0.0;
    std::array<double, 4> band_weight = {0.0, 0.0, 0.0, 0.0};
};

// Picks the acceptable bundle maximising the next potential and advances the
// state. Efficient mode chooses among the distribution candidates;
// exhaustive-minimal searches every minimal acceptable subset of each
// surviving support bundle (tiny instances only).
StepResult greedy_step(GreedyState& state, double alpha, GreedyMode mode);

struct BetaTraceRow {
    int round = 0;
    double beta = 0.0;
    double lambda_total = 0.0;
    std::array<double, 4> band_weight = {0.0, 0.0, 0.0, 0.0};
};

struct IdenticalResult {
    std::vector<Bundle> bundles;       // one per agent, pairwise disjoint
    std::vector<double> values;        // under the rebuilt XOS valuation
    std::vector<double> parent_values; // under the chosen parent's additive form
    std::vector<BetaTraceRow> trace;   // beta before each round, plus final
};

IdenticalResult allocate_identical(const NormalizedValuation& nv, int n, double alpha,
                                   GreedyMode mode = GreedyMode::Efficient);

std::string beta_trace_csv(const std::vector<BetaTraceRow>& trace);

}  // namespace fairdiv

#endif
