#ifndef FAIRDIV_RANDOMIZED_HPP
#define FAIRDIV_RANDOMIZED_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fairdiv/identical.hpp"
#include "fairdiv/shares.hpp"

namespace fairdiv {

struct RunParams {
    double alpha = 0.25;
    double c = 0.1;   // per-round damage cap of the filtering step
    double D = 4.0;   // dangerous-bundle threshold
    uint64_t seed = 1;
    double eps = 0.0;  // event-monitor inset; 0 disables the monitor
};

// Value agent j loses if the items of b leave every bundle of her partition.
double damage(const NormalizedValuation& vj, Bundle b);
// Sum of damage over all agents except i.
double total_damage(const std::vector<NormalizedValuation>& agents, int i, Bundle b);

// Per-agent filtration: filtered[s] is what survives of support bundle s.
struct FilteredPartition {
    std::vector<Bundle> current;
    double beta(const NormalizedValuation& nv) const { return nv.beta(current); }
};

// Empties every support bundle whose total damage to the other agents
// exceeds D. Returns per-agent lists of dropped support indices.
std::vector<std::vector<int>> prune_dangerous(
    const std::vector<NormalizedValuation>& agents,
    std::vector<FilteredPartition>& parts, double D);

// One filtering pass: bundles sorted by the picker's value of their
// intersection with b, items of b removed from the maximal prefix whose
// damage to agent j stays within c.
FilteredPartition filter_step(const NormalizedValuation& picker_vals, int picker_parent,
                              const NormalizedValuation& vj, Bundle b,
                              const FilteredPartition& part, double c);

struct RoundLog {
    int round = 0;
    int agent = -1;
    int candidate_index = -1;
    Bundle sampled;
};

struct RunReport {
    int n = 0;
    bool success = false;
    int failure_round = -1;
    RunParams params;
    std::vector<Bundle> initial_bundles;  // B_i as sampled
    std::vector<Bundle> final_bundles;    // Q_i^n after stealing
    std::vector<int> parent_of;           // support bundle each B_i came from
    std::vector<double> initial_value;    // picker's additive value of B_i
    std::vector<double> final_value;      // same form on Q_i^n
    std::vector<double> beta_initial;     // beta_i^1 after dangerous pruning
    std::vector<std::vector<double>> beta;  // beta[k][i]; NaN once inactive
    std::vector<RoundLog> draws;
    std::vector<std::vector<int>> dropped_dangerous;
    std::vector<std::pair<int, int>> event_flags;  // (agent, round) monitor hits

    double stolen_loss(int i) const { return initial_value[i] - final_value[i]; }
    double stolen_bound() const;  // D / (c (cn - 1))
    std::string to_json() const;
};

// The n-round randomized allocator: dangerous pruning, max-beta agent pick,
// seeded sampling from the candidate distribution, stealing via full removal
// from earlier winners, and per-agent filtering capped at c.
RunReport allocate_different(const std::vector<NormalizedValuation>& agents,
                             const RunParams& params);

}  // namespace fairdiv

#endif
