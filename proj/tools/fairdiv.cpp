#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairdiv/harness.hpp"
#include "fairdiv/processes.hpp"

using namespace fairdiv;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 2;
constexpr int kExitExhausted = 3;
constexpr int kExitInput = 4;

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open output file: " + path);
    out << body;
}

Allocation load_allocation(const Instance& inst, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open allocation file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ParseError(std::string("allocation is not valid JSON: ") + e.what());
    }
    if (!doc.contains("bundles") || !doc["bundles"].is_array())
        throw ParseError("allocation document needs a bundles array");
    std::vector<Bundle> bundles;
    for (const auto& b : doc["bundles"]) {
        Bundle bb;
        for (const auto& e : b) bb.add(e.get<int>());
        bundles.push_back(bb);
    }
    if (static_cast<int>(bundles.size()) != inst.n)
        throw InputError("allocation bundle count != n");
    return make_allocation(inst, bundles);
}

int run(int argc, char** argv) {
    CLI::App app{"fair-division engine: share oracles, allocators, process tools"};
    app.require_subcommand(1);

    // aps / mms
    std::string inst_path;
    int agent = -1;
    auto* aps_cmd = app.add_subcommand("aps", "anyprice share of each agent");
    aps_cmd->add_option("instance", inst_path)->required();
    aps_cmd->add_option("--agent", agent);
    auto* mms_cmd = app.add_subcommand("mms", "maximin share of each agent");
    mms_cmd->add_option("instance", inst_path)->required();
    mms_cmd->add_option("--agent", agent);

    // alloc
    std::string mode = "full", report_out;
    double alpha = 11.0 / 40.0;
    double c_param = 0.0, d_param = 0.0;
    uint64_t seed = 1;
    auto* alloc_cmd = app.add_subcommand("alloc", "run the allocation pipeline");
    alloc_cmd->add_option("instance", inst_path)->required();
    alloc_cmd->add_option("--alpha", alpha)->required();
    alloc_cmd->add_option("--mode", mode)
        ->check(CLI::IsMember({"identical", "different", "full"}));
    alloc_cmd->add_option("--c", c_param);
    alloc_cmd->add_option("--D", d_param);
    alloc_cmd->add_option("--seed", seed);
    alloc_cmd->add_option("--out", report_out);
    std::string trace_out;
    alloc_cmd->add_option("--trace", trace_out, "beta trace CSV (identical mode)");

    // gamma
    std::string variant = "small", csv_out;
    long nsteps = 100;
    double geps = 0.0, gdelta = 0.0, gtau = 0.0;
    long sweep = 0;
    auto* gamma_cmd = app.add_subcommand("gamma", "potential recurrence traces");
    gamma_cmd->add_option("--variant", variant)
        ->check(CLI::IsMember({"small", "big", "eps", "tau"}));
    gamma_cmd->add_option("--alpha", alpha)->required();
    gamma_cmd->add_option("--n", nsteps)->required();
    gamma_cmd->add_option("--eps", geps);
    gamma_cmd->add_option("--delta", gdelta);
    gamma_cmd->add_option("--tau", gtau);
    gamma_cmd->add_option("--sweep", sweep, "emit (n, gamma_n^n) for n in [2, sweep]");
    gamma_cmd->add_option("--csv", csv_out);

    // pt
    int points = 1000;
    auto* pt_cmd = app.add_subcommand("pt", "per-item probability curve");
    pt_cmd->add_option("--alpha", alpha)->required();
    pt_cmd->add_option("--n", nsteps)->required();
    pt_cmd->add_option("--points", points);
    pt_cmd->add_option("--csv", csv_out);

    // roots
    double roots_alpha = 3.0 / 11.0;
    auto* roots_cmd = app.add_subcommand("roots", "transcendental constants");
    roots_cmd->add_option("--alpha", roots_alpha);

    // doubling
    double beta = 1.0;
    auto* dbl_cmd = app.add_subcommand("doubling", "doubling threshold predicate");
    dbl_cmd->add_option("--variant", variant)
        ->check(CLI::IsMember({"small", "big", "tau"}));
    dbl_cmd->add_option("--alpha", alpha)->required();
    dbl_cmd->add_option("--n", nsteps)->required();
    dbl_cmd->add_option("--tau", gtau);
    dbl_cmd->add_option("--beta", beta);

    // classify
    double eps = 1.0 / 240.0;
    auto* cls_cmd = app.add_subcommand("classify", "bipartite big-item cases");
    cls_cmd->add_option("instance", inst_path)->required();
    cls_cmd->add_option("--alpha", alpha)->required();
    cls_cmd->add_option("--eps", eps);

    // gen
    std::string spec_path, gen_out = "instance.json";
    auto* gen_cmd = app.add_subcommand("gen", "generate an instance");
    gen_cmd->add_option("--spec", spec_path)->required();
    gen_cmd->add_option("--seed", seed);
    gen_cmd->add_option("-o,--out", gen_out);

    // verify
    std::string alloc_path, share = "aps";
    auto* verify_cmd = app.add_subcommand("verify", "verify an allocation");
    verify_cmd->add_option("instance", inst_path)->required();
    verify_cmd->add_option("allocation", alloc_path)->required();
    verify_cmd->add_option("--alpha", alpha)->required();
    verify_cmd->add_option("--share", share)->check(CLI::IsMember({"aps", "mms"}));

    CLI11_PARSE(app, argc, argv);

    if (aps_cmd->parsed() || mms_cmd->parsed()) {
        Instance inst = load_instance_file(inst_path);
        bool use_aps = aps_cmd->parsed();
        Bundle full = Bundle::full(inst.m);
        for (int i = 0; i < inst.n; ++i) {
            if (agent >= 0 && i != agent) continue;
            double v = use_aps ? compute_aps(inst.valuations[i], inst.n, full).value
                               : compute_mms(inst.valuations[i], inst.n, full).value;
            std::cout << (use_aps ? "aps" : "mms") << " agent " << i << " = " << fmt(v)
                      << "\n";
        }
        return kExitOk;
    }

    if (alloc_cmd->parsed()) {
        Instance inst = load_instance_file(inst_path);
        RunParams params;
        params.alpha = alpha;
        params.seed = seed;
        if (c_param > 0.0 && d_param > 0.0) {
            params.c = c_param;
            params.D = d_param;
        } else if (inst.n >= 3) {
            Schedule s = asymptotic_schedule(alpha, inst.n);
            params.c = c_param > 0.0 ? c_param : s.c;
            params.D = d_param > 0.0 ? d_param : s.D;
            params.eps = s.eps;
        }
        PipelineMode pm = mode == "identical"   ? PipelineMode::Identical
                          : mode == "different" ? PipelineMode::Different
                                                : PipelineMode::Full;
        PipelineReport rep = run_pipeline(inst, alpha, params, pm);
        if (!report_out.empty()) write_file(report_out, rep.to_json() + "\n");
        if (!trace_out.empty()) write_file(trace_out, beta_trace_csv(rep.beta_trace));
        std::cout << "completed = " << (rep.completed ? "yes" : "no")
                  << ", min ratio = " << fmt(rep.verification.min_ratio)
                  << ", failures = " << rep.verification.failures << "\n";
        if (!rep.completed) return kExitExhausted;
        return rep.verification.pass ? kExitOk : kExitVerifyFail;
    }

    if (gamma_cmd->parsed()) {
        GammaConfig cfg;
        cfg.alpha = alpha;
        cfg.variant = (variant == "small") ? AlphaRegime::Small
                      : (variant == "big") ? AlphaRegime::Big
                                           : regime_for(alpha);
        cfg.eps = variant == "eps" ? geps : 0.0;
        cfg.tau = variant == "tau" ? gtau : 0.0;
        cfg.start = 1.0 - gdelta;
        std::ostringstream ss;
        if (sweep > 1) {
            std::vector<double> series;
            cfg.n = 2;
            gamma_floor_sweep(cfg, 2, sweep, &series, thread_count());
            ss << "n,gamma_n_n\n";
            for (size_t i = 0; i < series.size(); ++i)
                ss << (i + 2) << ',' << fmt(series[i]) << '\n';
        } else {
            cfg.n = nsteps;
            GammaTrace tr = gamma_trace(cfg, nsteps);
            ss << "step,value\n";
            for (size_t i = 0; i < tr.values.size(); ++i)
                ss << (i + 1) << ',' << fmt(tr.values[i]) << '\n';
        }
        if (csv_out.empty())
            std::cout << ss.str();
        else
            write_file(csv_out, ss.str());
        return kExitOk;
    }

    if (pt_cmd->parsed()) {
        auto grid = uniform_grid(alpha + (1.0 - alpha) / points, 1.0, points);
        auto curve = pt_curve(alpha, nsteps, grid);
        std::ostringstream ss;
        ss << "t,p\n";
        for (const auto& [t, p] : curve) ss << fmt(t) << ',' << fmt(p) << '\n';
        if (csv_out.empty())
            std::cout << ss.str();
        else
            write_file(csv_out, ss.str());
        return kExitOk;
    }

    if (roots_cmd->parsed()) {
        std::cout << "alpha_star = " << fmt(solve_alpha_star()) << "\n";
        std::cout << "rho_small(" << fmt(roots_alpha) << ") = "
                  << fmt(solve_rho(roots_alpha, RhoVariant::SmallAlpha)) << "\n";
        if (roots_alpha >= 3.0 / 11.0)
            std::cout << "rho_big(" << fmt(roots_alpha) << ") = "
                      << fmt(solve_rho(roots_alpha, RhoVariant::BigAlpha)) << "\n";
        std::cout << "rho_small_items = " << fmt(solve_rho(0.0, RhoVariant::SmallItems))
                  << "\n";
        return kExitOk;
    }

    if (dbl_cmd->parsed()) {
        DoublingVariant dv = variant == "small" ? DoublingVariant::SmallAlpha
                             : variant == "big" ? DoublingVariant::BigAlpha
                                                : DoublingVariant::TauOffset;
        double thr = doubling_threshold(dv, alpha, gtau, nsteps);
        std::cout << "threshold = " << fmt(thr) << ", holds(beta=" << fmt(beta)
                  << ") = " << (doubling_holds(dv, alpha, gtau, nsteps, beta) ? "yes" : "no")
                  << "\n";
        return kExitOk;
    }

    if (cls_cmd->parsed()) {
        Instance inst = load_instance_file(inst_path);
        std::vector<double> aps;
        Bundle full = Bundle::full(inst.m);
        for (int i = 0; i < inst.n; ++i)
            aps.push_back(compute_aps(inst.valuations[i], inst.n, full).value);
        BigItemGraph g = build_big_item_graph(inst, alpha, aps);
        CaseResult cs = classify_cases(g, eps);
        json doc;
        doc["case"] = cs.which;
        doc["u1"] = cs.u1;
        doc["u2"] = cs.u2;
        doc["u3"] = cs.u3;
        auto items_of = [&](const std::vector<int>& ws) {
            std::vector<int> out;
            for (int w : ws) out.push_back(g.items[w]);
            return out;
        };
        doc["w1"] = items_of(cs.w1);
        doc["w2"] = items_of(cs.w2);
        doc["w3"] = items_of(cs.w3);
        std::cout << doc.dump(2) << "\n";
        return kExitOk;
    }

    if (gen_cmd->parsed()) {
        std::ifstream in(spec_path);
        if (!in) throw InputError("cannot open spec file: " + spec_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        GeneratorSpec spec = GeneratorSpec::from_json(ss.str());
        save_instance_file(generate_instance(spec, seed), gen_out);
        std::cout << "wrote " << gen_out << "\n";
        return kExitOk;
    }

    if (verify_cmd->parsed()) {
        Instance inst = load_instance_file(inst_path);
        Allocation alloc = load_allocation(inst, alloc_path);
        VerificationReport rep = verify_allocation(
            inst, alloc, alpha, share == "aps" ? ShareKind::APS : ShareKind::MMS);
        std::cout << rep.to_json() << "\n";
        return rep.pass ? kExitOk : kExitVerifyFail;
    }

    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ExhaustedError& e) {
        std::cerr << "exhausted: " << e.what() << " (round " << e.round << ")\n";
        return kExitExhausted;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
