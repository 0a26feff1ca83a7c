#include "fairdiv/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairdiv/core.hpp"

namespace fairdiv {

namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kFeasTol = 1e-8;

// Tableau with explicit basis; objective kept as a priced-out row.
struct Tableau {
    int rows;
    int cols;  // structural + slack + artificial
    std::vector<std::vector<double>> a;
    std::vector<double> rhs;
    std::vector<double> z;  // reduced costs of the current objective
    double zval = 0.0;
    std::vector<int> basis;
    long step = 0;

    void pivot(int r, int c) {
        double piv = a[r][c];
        if (std::abs(piv) < kPivotTol)
            throw SolverError("numerically singular basis at pivot step " +
                              std::to_string(step));
        double inv = 1.0 / piv;
        for (int j = 0; j < cols; ++j) a[r][j] *= inv;
        rhs[r] *= inv;
        a[r][c] = 1.0;
        for (int i = 0; i < rows; ++i) {
            if (i == r) continue;
            double f = a[i][c];
            if (f == 0.0) continue;
            for (int j = 0; j < cols; ++j) a[i][j] -= f * a[r][j];
            a[i][c] = 0.0;
            rhs[i] -= f * rhs[r];
        }
        double f = z[c];
        if (f != 0.0) {
            for (int j = 0; j < cols; ++j) z[j] -= f * a[r][j];
            z[c] = 0.0;
            zval -= f * rhs[r];
        }
        basis[r] = c;
        ++step;
    }

    // Minimizes the current objective row. Returns false on unbounded.
    bool run(long cap) {
        while (true) {
            if (step > cap)
                throw SolverError("simplex iteration cap exceeded at step " +
                                  std::to_string(step));
            int enter = -1;
            for (int j = 0; j < cols; ++j)
                if (z[j] < -kPivotTol) {  // Bland: lowest eligible index
                    enter = j;
                    break;
                }
            if (enter < 0) return true;
            int leave = -1;
            double best = 0.0;
            for (int i = 0; i < rows; ++i) {
                if (a[i][enter] > kPivotTol) {
                    double ratio = rhs[i] / a[i][enter];
                    if (leave < 0 || ratio < best - kPivotTol ||
                        (ratio < best + kPivotTol && basis[i] < basis[leave])) {
                        leave = i;
                        best = ratio;
                    }
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
    }
};

}  // namespace

LPOutcome solve_lp(const LPProblem& p) {
    const int m = static_cast<int>(p.rows.size());
    int nc = m > 0 ? static_cast<int>(p.rows[0].coeffs.size())
                   : static_cast<int>(p.objective.size());
    for (const auto& r : p.rows)
        if (static_cast<int>(r.coeffs.size()) != nc)
            throw InputError("LP rows have inconsistent widths");
    if (p.sense != LPSense::FeasibilityOnly &&
        static_cast<int>(p.objective.size()) != nc)
        throw InputError("LP objective width mismatch");
    for (const auto& r : p.rows)
        for (double x : r.coeffs)
            if (!std::isfinite(x)) throw InputError("LP coefficient not finite");

    // Count slack and artificial columns. Rows are normalized to rhs >= 0.
    int nslack = 0, nart = 0;
    for (const auto& r : p.rows) {
        Relation rel = r.rel;
        if (r.rhs < 0.0)
            rel = (rel == Relation::LessEq)      ? Relation::GreaterEq
                  : (rel == Relation::GreaterEq) ? Relation::LessEq
                                                 : Relation::Equal;
        if (rel != Relation::Equal) ++nslack;
        if (rel != Relation::LessEq) ++nart;
    }

    Tableau t;
    t.rows = m;
    t.cols = nc + nslack + nart;
    t.a.assign(m, std::vector<double>(t.cols, 0.0));
    t.rhs.assign(m, 0.0);
    t.z.assign(t.cols, 0.0);
    t.basis.assign(m, -1);

    int scol = nc, acol = nc + nslack;
    std::vector<int> art_rows;
    for (int i = 0; i < m; ++i) {
        double sign = p.rows[i].rhs < 0.0 ? -1.0 : 1.0;
        Relation rel = p.rows[i].rel;
        if (sign < 0.0)
            rel = (rel == Relation::LessEq)      ? Relation::GreaterEq
                  : (rel == Relation::GreaterEq) ? Relation::LessEq
                                                 : Relation::Equal;
        for (int j = 0; j < nc; ++j) t.a[i][j] = sign * p.rows[i].coeffs[j];
        t.rhs[i] = sign * p.rows[i].rhs;
        if (rel == Relation::LessEq) {
            t.a[i][scol] = 1.0;
            t.basis[i] = scol++;
        } else {
            if (rel == Relation::GreaterEq) t.a[i][scol++] = -1.0;
            t.a[i][acol] = 1.0;
            t.basis[i] = acol;
            art_rows.push_back(i);
            ++acol;
        }
    }

    const long cap = 2000 + 200L * (m + t.cols);
    const int art_base = nc + nslack;

    // Phase 1: minimize the sum of artificials.
    if (nart > 0) {
        for (int i : art_rows) {
            for (int j = 0; j < t.cols; ++j) t.z[j] -= t.a[i][j];
            t.zval -= t.rhs[i];
        }
        for (int j = art_base; j < t.cols; ++j) t.z[j] += 1.0;
        t.run(cap);  // bounded below by 0, cannot be unbounded
        if (-t.zval > kFeasTol) return LPOutcome{LPStatus::Infeasible, {}, 0.0, 0};
        // Pivot remaining artificials out where a nonzero entry exists;
        // rows with none are redundant and get dropped.
        for (int i = 0; i < m; ++i) {
            if (t.basis[i] < art_base) continue;
            for (int j = 0; j < art_base; ++j)
                if (std::abs(t.a[i][j]) > kPivotTol) {
                    t.pivot(i, j);
                    break;
                }
        }
        for (int i = t.rows - 1; i >= 0; --i) {
            if (t.basis[i] < art_base) continue;
            t.a.erase(t.a.begin() + i);
            t.rhs.erase(t.rhs.begin() + i);
            t.basis.erase(t.basis.begin() + i);
            --t.rows;
        }
        for (auto& row : t.a) row.resize(art_base);
        t.z.resize(art_base);
        t.cols = art_base;
    }

    // Phase 2 objective priced out against the feasible basis.
    std::fill(t.z.begin(), t.z.end(), 0.0);
    t.zval = 0.0;
    if (p.sense != LPSense::FeasibilityOnly) {
        double flip = p.sense == LPSense::Maximize ? -1.0 : 1.0;
        for (int j = 0; j < nc; ++j) t.z[j] = flip * p.objective[j];
    }
    for (int i = 0; i < t.rows; ++i) {
        int b = t.basis[i];
        double f = t.z[b];
        if (f != 0.0) {
            for (int j = 0; j < t.cols; ++j) t.z[j] -= f * t.a[i][j];
            t.z[b] = 0.0;
            t.zval -= f * t.rhs[i];
        }
    }
    bool bounded = t.run(cap);
    if (!bounded) return LPOutcome{LPStatus::Unbounded, {}, 0.0, 0};

    LPOutcome out;
    out.status = LPStatus::Optimal;
    out.solution.assign(nc, 0.0);
    for (int i = 0; i < t.rows; ++i)
        if (t.basis[i] < nc) out.solution[t.basis[i]] = std::max(0.0, t.rhs[i]);
    double obj = 0.0;
    if (p.sense != LPSense::FeasibilityOnly)
        for (int j = 0; j < nc; ++j) obj += p.objective[j] * out.solution[j];
    out.objective = obj;
    for (double x : out.solution)
        if (x > 1e-9) ++out.nonzeros;
    return out;
}

}  // namespace fairdiv
