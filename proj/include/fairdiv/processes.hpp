#ifndef FAIRDIV_PROCESSES_HPP
#define FAIRDIV_PROCESSES_HPP

#include <cstdint>
#include <vector>

namespace fairdiv {

// Regime split of the probability bounds: alpha at most 3/11 uses the single
// two-class bound, larger alpha switches denominators at beta = 3 alpha.
enum class AlphaRegime { Small, Big };

inline AlphaRegime regime_for(double alpha) {
    return alpha <= 3.0 / 11.0 ? AlphaRegime::Small : AlphaRegime::Big;
}

// Largest per-item probability needed to sample an acceptable bundle when
// the potential is at least beta and no item is worth alpha or more.
// Piecewise in (alpha, beta); all three branches agree at alpha = 3/11 and
// the big-alpha branches agree at beta = 3 alpha.
double p_bound(double alpha, double beta, long n);

// Optimal value W of the four-class weight program; p_bound = 1 / (n W).
double opt_w_closed(double alpha, double beta);
double opt_w_lp(double alpha, double beta);

struct GammaConfig {
    AlphaRegime variant = AlphaRegime::Small;
    double alpha = 0.25;
    long n = 2;          // steps-per-horizon scale in the denominators
    double start = 1.0;  // gamma^1
    double eps = 0.0;    // error inset subtracted inside the denominators
    double tau = 0.0;    // constant offset of the greedy-average process
};

struct GammaTrace {
    std::vector<double> values;  // gamma^1 .. gamma^k
    std::vector<int> regimes;    // denominator branch applied at each step (0/1)
    bool premature_drop = false;
    long drop_step = -1;  // first step at which the value was <= alpha+eps+tau
};

// Exact replay of the configured recurrence for `steps` values.
GammaTrace gamma_trace(const GammaConfig& cfg, long steps);

// Final value only; streaming, used by the large sweeps.
double gamma_final(const GammaConfig& cfg, long steps);

// gamma_n^n for every n in [n_lo, n_hi], lanes processed in blocks so the
// sweep vectorizes; blocks fan out over `threads` workers. Returns the
// minimum over the range and optionally the whole series.
double gamma_floor_sweep(const GammaConfig& cfg, long n_lo, long n_hi,
                         std::vector<double>* series = nullptr, int threads = 1);

struct PtPoint {
    double t;
    double p;
};
// p_t = p_bound(alpha, t, n) on a grid of t in (alpha, 1].
std::vector<PtPoint> pt_curve(double alpha, long n, const std::vector<double>& grid);
std::vector<double> uniform_grid(double lo, double hi, int points);

struct EpochCheck {
    bool holds = false;
    double lhs = 0.0;
    double rhs = 0.0;
};

// Sufficiency inequality for the process started at 1-delta with inset eps
// to stay at or above rho+eps through step n0, using d epochs. One-sided:
// holds=true guarantees the floor, false says nothing.
EpochCheck epoch_sufficiency(double alpha, double eps, double delta, double rho,
                             long d, long n, long n0, AlphaRegime variant);

enum class DoublingVariant { SmallAlpha, BigAlpha, TauOffset };

double doubling_threshold(DoublingVariant variant, double alpha, double tau, long n);
bool doubling_holds(DoublingVariant variant, double alpha, double tau, long n,
                    double beta);

// Root solving (bisection to 1e-10 residual bracketing).
enum class RhoVariant { SmallAlpha, BigAlpha, SmallItems };
double solve_rho(double alpha, RhoVariant variant);
double solve_alpha_star();

// Parameter preset whose constants scale for the large-n guarantees:
// c = const * ln^-3 n, eps = const * sqrt(c ln n), D = const^2 * sqrt(n).
struct Schedule {
    double c = 0.0;
    double eps = 0.0;
    double D = 0.0;
};
Schedule asymptotic_schedule(double alpha, long n);

}  // namespace fairdiv

#endif
