#ifndef FAIRDIV_LP_HPP
#define FAIRDIV_LP_HPP

#include <vector>

namespace fairdiv {

enum class Relation { LessEq, Equal, GreaterEq };
enum class LPSense { Maximize, Minimize, FeasibilityOnly };
enum class LPStatus { Optimal, Infeasible, Unbounded };

// Variables are nonnegative; rows all have the same width.
struct LPProblem {
    LPSense sense = LPSense::FeasibilityOnly;
    std::vector<double> objective;  // ignored for FeasibilityOnly
    struct Row {
        std::vector<double> coeffs;
        Relation rel = Relation::LessEq;
        double rhs = 0.0;
    };
    std::vector<Row> rows;
};

struct LPOutcome {
    LPStatus status = LPStatus::Infeasible;
    std::vector<double> solution;
    double objective = 0.0;
    int nonzeros = 0;  // structural variables above 1e-9; <= row count for basic solutions
};

// Dense two-phase simplex, Bland's rule for anti-cycling, 1e-10 pivot
// tolerance. Deterministic for a fixed input.
LPOutcome solve_lp(const LPProblem& p);

}  // namespace fairdiv

#endif
