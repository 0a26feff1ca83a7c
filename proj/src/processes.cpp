#include "fairdiv/processes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "fairdiv/core.hpp"
#include "fairdiv/lp.hpp"

namespace fairdiv {

double p_bound(double alpha, double beta, long n) {
    if (!(beta > alpha))
        throw InputError("p_bound requires beta > alpha");
    if (alpha <= 3.0 / 11.0) return (1.0 - alpha) / (2.0 * (beta - alpha) * n);
    if (beta >= 3.0 * alpha)
        return 2.0 * (1.0 - 3.0 * alpha) / ((beta - 12.0 * alpha + 3.0) * n);
    return 4.0 * alpha / (3.0 * (beta - alpha) * n);
}

double opt_w_closed(double alpha, double beta) {
    if (beta <= alpha) return 0.0;
    if (alpha <= 3.0 / 11.0) return 2.0 * (beta - alpha) / (1.0 - alpha);
    if (beta >= 3.0 * alpha)
        return (beta - 12.0 * alpha + 3.0) / (2.0 * (1.0 - 3.0 * alpha));
    return 3.0 * (beta - alpha) / (4.0 * alpha);
}

double opt_w_lp(double alpha, double beta) {
    // minimize 0 w_a + 1 w_2a + 3/2 w_3a + 2 w_1
    //   s.t.   w_a + w_2a + w_3a + w_1 = 1
    //          a w_a + 2a w_2a + 3a w_3a + w_1 >= beta
    LPProblem p;
    p.sense = LPSense::Minimize;
    p.objective = {0.0, 1.0, 1.5, 2.0};
    p.rows.push_back({{1.0, 1.0, 1.0, 1.0}, Relation::Equal, 1.0});
    p.rows.push_back({{alpha, 2.0 * alpha, 3.0 * alpha, 1.0}, Relation::GreaterEq, beta});
    LPOutcome out = solve_lp(p);
    if (out.status != LPStatus::Optimal)
        throw SolverError("opt_w_lp: weight program not optimal");
    return out.objective;
}

namespace {

// One step of the recurrence. The inset is subtracted inside the denominator
// and in the regime test, matching the eps- and tau-processes.
inline double gamma_step(AlphaRegime variant, double alpha, double inset, long n,
                         double g, int* regime) {
    double x = g - inset;
    if (variant == AlphaRegime::Small) {
        if (regime) *regime = 0;
        return g * (1.0 - (1.0 - alpha) / (2.0 * (x - alpha) * n));
    }
    if (x >= 3.0 * alpha) {
        if (regime) *regime = 0;
        return g * (1.0 - 2.0 * (1.0 - 3.0 * alpha) / ((x - 12.0 * alpha + 3.0) * n));
    }
    if (regime) *regime = 1;
    return g * (1.0 - 4.0 * alpha / (3.0 * (x - alpha) * n));
}

}  // namespace

GammaTrace gamma_trace(const GammaConfig& cfg, long steps) {
    double floor = cfg.alpha + cfg.eps + cfg.tau;
    if (!(cfg.start > floor))
        throw InputError("gamma_trace: start must exceed alpha+eps+tau");
    GammaTrace out;
    out.values.reserve(static_cast<size_t>(std::min(steps, 1000000L)));
    double g = cfg.start;
    out.values.push_back(g);
    for (long k = 1; k < steps; ++k) {
        if (g <= floor) {
            out.premature_drop = true;
            out.drop_step = k;
            break;
        }
        int regime = 0;
        g = gamma_step(cfg.variant, cfg.alpha, cfg.eps + cfg.tau, cfg.n, g, &regime);
        out.regimes.push_back(regime);
        out.values.push_back(g);
    }
    return out;
}

double gamma_final(const GammaConfig& cfg, long steps) {
    double floor = cfg.alpha + cfg.eps + cfg.tau;
    double g = cfg.start;
    for (long k = 1; k < steps; ++k) {
        if (g <= floor) return g;
        g = gamma_step(cfg.variant, cfg.alpha, cfg.eps + cfg.tau, cfg.n, g, nullptr);
    }
    return g;
}

namespace {

double gamma_sweep_block(const GammaConfig& cfg, long n_lo, long n_hi,
                         std::vector<double>* series) {
    constexpr int B = 64;  // lane block; the inner loop vectorizes
    double worst = std::numeric_limits<double>::infinity();
    double inset = cfg.eps + cfg.tau;
    double a = cfg.alpha;
    for (long base = n_lo; base <= n_hi; base += B) {
        int lanes = static_cast<int>(std::min<long>(B, n_hi - base + 1));
        double g[B];
        double nn[B];
        long steps[B];
        for (int l = 0; l < lanes; ++l) {
            g[l] = cfg.start;
            nn[l] = static_cast<double>(base + l);
            steps[l] = base + l - 1;  // n-1 applications give gamma^n
        }
        long max_steps = steps[lanes - 1];
        if (cfg.variant == AlphaRegime::Small) {
            double c1 = (1.0 - a) / 2.0;
            for (long k = 0; k < max_steps; ++k)
                for (int l = 0; l < lanes; ++l) {
                    double x = g[l] - inset - a;
                    double gn = g[l] * (1.0 - c1 / (x * nn[l]));
                    g[l] = k < steps[l] ? gn : g[l];
                }
        } else {
            double chi = 2.0 * (1.0 - 3.0 * a);
            double clo = 4.0 * a / 3.0;
            for (long k = 0; k < max_steps; ++k)
                for (int l = 0; l < lanes; ++l) {
                    double x = g[l] - inset;
                    double fhi = 1.0 - chi / ((x - 12.0 * a + 3.0) * nn[l]);
                    double flo = 1.0 - clo / ((x - a) * nn[l]);
                    double gn = g[l] * (x >= 3.0 * a ? fhi : flo);
                    g[l] = k < steps[l] ? gn : g[l];
                }
        }
        for (int l = 0; l < lanes; ++l) {
            worst = std::min(worst, g[l]);
            if (series) series->push_back(g[l]);
        }
    }
    return worst;
}

}  // namespace

double gamma_floor_sweep(const GammaConfig& cfg, long n_lo, long n_hi,
                         std::vector<double>* series, int threads) {
    if (n_hi < n_lo) return std::numeric_limits<double>::infinity();
    if (threads <= 1 || n_hi - n_lo < 256)
        return gamma_sweep_block(cfg, n_lo, n_hi, series);
    long span = n_hi - n_lo + 1;
    int workers = static_cast<int>(std::min<long>(threads, (span + 255) / 256));
    std::vector<std::vector<double>> partial(workers);
    std::vector<double> worst(workers, std::numeric_limits<double>::infinity());
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        long lo = n_lo + span * w / workers;
        long hi = n_lo + span * (w + 1) / workers - 1;
        pool.emplace_back([&, w, lo, hi]() {
            worst[w] = gamma_sweep_block(cfg, lo, hi, series ? &partial[w] : nullptr);
        });
    }
    for (auto& t : pool) t.join();
    double result = std::numeric_limits<double>::infinity();
    for (int w = 0; w < workers; ++w) {
        result = std::min(result, worst[w]);
        if (series) series->insert(series->end(), partial[w].begin(), partial[w].end());
    }
    return result;
}

std::vector<double> uniform_grid(double lo, double hi, int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i)
        g[i] = lo + (hi - lo) * i / (points - 1);
    return g;
}

std::vector<PtPoint> pt_curve(double alpha, long n, const std::vector<double>& grid) {
    std::vector<PtPoint> out;
    out.reserve(grid.size());
    for (double t : grid) {
        if (!(t > alpha) || t > 1.0 + kValueTol)
            throw InputError("pt_curve grid must lie in (alpha, 1]");
        out.push_back({t, p_bound(alpha, t, n)});
    }
    return out;
}

EpochCheck epoch_sufficiency(double alpha, double eps, double delta, double rho,
                             long d, long n, long n0, AlphaRegime variant) {
    if (!(alpha + eps <= rho) || !(rho < 1.0))
        throw InputError("epoch_sufficiency requires alpha+eps <= rho < 1");
    if (d < 1 || d > n) throw InputError("epoch_sufficiency requires 1 <= d <= n");
    if (n0 < 1 || n0 > n) throw InputError("epoch_sufficiency requires 1 <= n0 <= n");
    if (!(delta > 0.0) || delta > 1.0 - (alpha + eps))
        throw InputError("epoch_sufficiency requires 0 < delta <= 1-(alpha+eps)");

    EpochCheck out;
    double dn = static_cast<double>(d);
    double nn = static_cast<double>(n);
    double n0n = static_cast<double>(n0);
    if (variant == AlphaRegime::Small) {
        out.lhs = 2.0 * (1.0 - rho + alpha * std::log(rho)) / (1.0 - alpha);
        out.rhs = n0n / nn + 6.0 * eps / (1.0 - alpha) +
                  2.0 * delta * (1.0 - eps / (1.0 - alpha)) + dn * (1.0 - rho) / nn +
                  2.0 * (1.0 - rho) / (rho * (rho * dn + 1.0)) +
                  2.0 * (1.0 - delta - eps - alpha) / (dn * (1.0 - alpha));
    } else {
        double l3a = std::log(3.0 * alpha);
        out.lhs = 3.0 * (3.0 * alpha - rho - alpha * l3a + alpha * std::log(rho)) /
                      (4.0 * alpha) +
                  (1.0 - 3.0 * alpha + (12.0 * alpha - 3.0) * l3a) /
                      (2.0 * (1.0 - 3.0 * alpha));
        double a3e = 3.0 * alpha + eps;
        out.rhs = n0n / nn +
                  eps * (5.0 / (4.0 * alpha) + (1.0 - l3a) / (2.0 * (1.0 - 3.0 * alpha))) +
                  2.0 * delta + dn * (1.0 - rho) / nn +
                  3.0 * (3.0 - rho + 1.0 / dn) / (2.0 * rho * (rho * dn + 1.0)) +
                  3.0 * (1.0 - a3e) / (2.0 * a3e * (a3e * dn + 1.0)) +
                  3.0 * (1.0 / dn + 4.0 * alpha) / (4.0 * a3e * alpha * dn) +
                  (4.0 - delta - eps - 12.0 * alpha) / (2.0 * dn * (1.0 - 3.0 * alpha));
    }
    out.holds = out.lhs >= out.rhs;
    return out;
}

double doubling_threshold(DoublingVariant variant, double alpha, double tau, long n) {
    double nn = static_cast<double>(n);
    if (variant == DoublingVariant::SmallAlpha) {
        double at = alpha + tau;
        return at + (1.0 - alpha +
                     std::sqrt(16.0 * nn * at * (1.0 - alpha) +
                               (1.0 - alpha) * (1.0 - alpha))) /
                        (8.0 * nn);
    }
    // Big-alpha and the tau-offset greedy-average process share one form;
    // with tau = 0 it reduces to alpha + alpha(1 + sqrt(6n+1))/(3n).
    double at = alpha + tau;
    return at + (alpha + std::sqrt(6.0 * at * alpha * nn + alpha * alpha)) / (3.0 * nn);
}

bool doubling_holds(DoublingVariant variant, double alpha, double tau, long n,
                    double beta) {
    if (beta > 1.0 + kValueTol)
        throw InputError("doubling_holds requires beta <= 1");
    return beta > doubling_threshold(variant, alpha, tau, n);
}

namespace {

template <typename F>
double bisect_root(F f, double lo, double hi, const char* what) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0))
        throw SolverError(std::string("no sign change in bracket for ") + what);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (std::abs(fm) < 1e-10 && (hi - lo) < 1e-12) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double solve_rho(double alpha, RhoVariant variant) {
    switch (variant) {
        case RhoVariant::SmallAlpha:
            return bisect_root(
                [alpha](double r) {
                    return 2.0 * (1.0 - r + alpha * std::log(r)) - (1.0 - alpha);
                },
                alpha + 1e-9, 1.0 - 1e-12, "small-alpha rho");
        case RhoVariant::BigAlpha:
            return bisect_root(
                [alpha](double r) {
                    double l3a = std::log(3.0 * alpha);
                    return 3.0 * (3.0 * alpha - r - alpha * l3a + alpha * std::log(r)) /
                               (4.0 * alpha) +
                           (1.0 - 3.0 * alpha + (12.0 * alpha - 3.0) * l3a) /
                               (2.0 * (1.0 - 3.0 * alpha)) -
                           1.0;
                },
                alpha, 1.0 - 1e-12, "big-alpha rho");
        case RhoVariant::SmallItems:
            return bisect_root(
                [](double r) { return 1.0 - r + r * std::log(r) - r * (1.0 - r); },
                0.05, 0.95, "small-items rho");
    }
    throw InputError("solve_rho: unknown variant");
}

double solve_alpha_star() {
    return bisect_root(
        [](double a) {
            return (12.0 * a - 3.0) * std::log(3.0 * a) / (1.0 - 3.0 * a) -
                   (1.5 * std::log(3.0) - 2.0);
        },
        0.26, 0.32, "alpha-star");
}

Schedule asymptotic_schedule(double alpha, long n) {
    if (n < 3) throw InputError("asymptotic_schedule needs n >= 3");
    double rho = solve_rho(alpha, regime_for(alpha) == AlphaRegime::Small
                                      ? RhoVariant::SmallAlpha
                                      : RhoVariant::BigAlpha);
    double ln = std::log(static_cast<double>(n));
    Schedule s;
    if (regime_for(alpha) == AlphaRegime::Small) {
        double base = 5.0 * (1.0 - alpha) / (rho - alpha);
        s.c = base / (ln * ln * ln);
        s.eps = 7.0 * std::sqrt(4.0 * s.c * (1.0 - alpha) / (rho - alpha) * ln);
        s.D = base * base * std::sqrt(static_cast<double>(n));
    } else {
        double base = 40.0 * alpha / (3.0 * (rho - alpha));
        s.c = base / (ln * ln * ln);
        s.eps = 17.0 * std::sqrt(2.0 * s.c * alpha / (rho - alpha) * ln);
        s.D = base * base * std::sqrt(static_cast<double>(n));
    }
    return s;
}

}  // namespace fairdiv
