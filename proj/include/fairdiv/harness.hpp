#ifndef FAIRDIV_HARNESS_HPP
#define FAIRDIV_HARNESS_HPP

#include <optional>
#include <string>

#include "fairdiv/bigitems.hpp"
#include "fairdiv/identical.hpp"

namespace fairdiv {

struct VerificationReport {
    struct AgentRow {
        double achieved = 0.0;
        double share = 0.0;
        double ratio = 0.0;  // infinity when the share is zero
        bool pass = false;
    };
    std::vector<AgentRow> rows;
    double min_ratio = 0.0;
    int failures = 0;
    bool pass = false;

    std::string to_json() const;
};

// Recomputes everything through the exact share oracles, independent of any
// allocator path. pass means achieved >= alpha * share - 1e-9 for everyone.
VerificationReport verify_allocation(const Instance& inst, const Allocation& alloc,
                                     double alpha, ShareKind kind);

enum class PipelineMode { Identical, Different, Full };

// Case witness mapped back to original agent and item ids.
struct CasePayload {
    int which = 0;
    std::vector<int> u1, u2, u3;
    std::vector<int> w1, w2, w3;
};

struct PipelineReport {
    PipelineMode mode = PipelineMode::Full;
    double alpha = 0.0;
    RunParams params;
    bool completed = false;  // allocator ran to the end
    int failure_round = -1;
    int case_id = -1;  // -1: no classification stage ran
    std::optional<CasePayload> cases;
    std::vector<BigItemReduction::Grant> grants;
    std::optional<RunReport> run;             // randomized stage, when it ran
    std::vector<BetaTraceRow> beta_trace;     // identical mode only
    Allocation allocation;
    VerificationReport verification;

    std::string to_json() const;
};

// strip_big_items, then classify and dispatch on the residual, then verify
// against the APS oracle.
PipelineReport run_pipeline(const Instance& inst, double alpha, const RunParams& params,
                            PipelineMode mode);

// FAIRDIV_THREADS, defaulting to the hardware concurrency (at least 1).
int thread_count();

}  // namespace fairdiv

#endif
