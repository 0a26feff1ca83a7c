#include "fairdiv/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include <json.hpp>

#include "fairdiv/identical.hpp"

namespace fairdiv {

using nlohmann::json;

std::string VerificationReport::to_json() const {
    json doc;
    json agents = json::array();
    for (const auto& r : rows)
        agents.push_back({{"achieved", r.achieved},
                          {"share", r.share},
                          {"ratio", std::isinf(r.ratio) ? json() : json(r.ratio)},
                          {"pass", r.pass}});
    doc["agents"] = std::move(agents);
    doc["min_ratio"] = std::isinf(min_ratio) ? json() : json(min_ratio);
    doc["failures"] = failures;
    doc["pass"] = pass;
    return doc.dump(2);
}

VerificationReport verify_allocation(const Instance& inst, const Allocation& alloc,
                                     double alpha, ShareKind kind) {
    inst.validate();
    alloc.validate(inst);
    VerificationReport rep;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    Bundle full = Bundle::full(inst.m);
    for (int i = 0; i < inst.n; ++i) {
        VerificationReport::AgentRow row;
        row.achieved = inst.valuations[i].value(alloc.bundles[i]);
        row.share = kind == ShareKind::APS
                        ? compute_aps(inst.valuations[i], inst.n, full).value
                        : compute_mms(inst.valuations[i], inst.n, full).value;
        row.ratio = row.share > kValueTol
                        ? row.achieved / row.share
                        : std::numeric_limits<double>::infinity();
        row.pass = row.achieved >= alpha * row.share - kValueTol;
        if (!row.pass) ++rep.failures;
        rep.min_ratio = std::min(rep.min_ratio, row.ratio);
        rep.rows.push_back(row);
    }
    rep.pass = rep.failures == 0;
    return rep;
}

std::string PipelineReport::to_json() const {
    json doc;
    doc["mode"] = mode == PipelineMode::Identical    ? "identical"
                  : mode == PipelineMode::Different ? "different"
                                                    : "full";
    doc["alpha"] = alpha;
    doc["params"] = {{"c", params.c},
                     {"D", params.D},
                     {"seed", params.seed},
                     {"eps", params.eps}};
    doc["completed"] = completed;
    doc["failure_round"] = failure_round;
    doc["case"] = case_id;
    if (cases) {
        doc["case_payload"] = {{"which", cases->which}, {"u1", cases->u1},
                               {"u2", cases->u2},       {"u3", cases->u3},
                               {"w1", cases->w1},       {"w2", cases->w2},
                               {"w3", cases->w3}};
    }
    json gr = json::array();
    for (const auto& g : grants)
        gr.push_back({{"agent", g.agent}, {"item", g.item}, {"value", g.item_value}});
    doc["grants"] = std::move(gr);
    json bundles = json::array();
    for (const auto& b : allocation.bundles) bundles.push_back(b.items());
    doc["bundles"] = std::move(bundles);
    if (run) doc["run"] = json::parse(run->to_json());
    doc["achieved"] = allocation.achieved;
    doc["verification"] = json::parse(verification.to_json());
    return doc.dump(2);
}

PipelineReport run_pipeline(const Instance& inst, double alpha, const RunParams& params,
                            PipelineMode mode) {
    inst.validate();
    PipelineReport rep;
    rep.mode = mode;
    rep.alpha = alpha;
    rep.params = params;

    std::vector<Bundle> bundles(inst.n);
    if (mode == PipelineMode::Identical) {
        for (int i = 1; i < inst.n; ++i)
            if (!(inst.valuations[i] == inst.valuations[0]))
                throw InputError("identical mode requires one shared valuation");
        BigItemReduction red = strip_big_items(inst, alpha);
        rep.grants = red.grants;
        for (const auto& g : red.grants) bundles[g.agent].add(g.item);
        const Instance& res = red.residual;
        if (res.n > 0 && Bundle::full(res.m).count() >= 0) {
            double aps = res.m > 0 ? red.residual_aps[0] : 0.0;
            if (aps > kValueTol) {
                NormalizedValuation nv =
                    normalize_aps(res.valuations[0], res.n, Bundle::full(res.m));
                try {
                    IdenticalResult ir = allocate_identical(nv, res.n, alpha);
                    rep.beta_trace = ir.trace;
                    for (int i = 0; i < res.n; ++i) {
                        Bundle mapped;
                        ir.bundles[i].for_each(
                            [&](int e) { mapped.add(red.item_map[e]); });
                        bundles[red.agent_map[i]] = mapped;
                    }
                    rep.completed = true;
                } catch (const ExhaustedError& ex) {
                    rep.completed = false;
                    rep.failure_round = ex.round;
                }
            } else {
                rep.completed = true;  // zero share: nothing to guarantee
            }
        } else {
            rep.completed = true;
        }
    } else if (mode == PipelineMode::Different) {
        PlainReport plain = allocate_plain(inst, alpha, params);
        rep.grants = plain.reduction.grants;
        bundles = plain.bundles;
        rep.completed = plain.success;
        rep.failure_round = plain.failure_round;
        rep.run = plain.run;
    } else {
        BigItemReduction red = strip_big_items(inst, alpha);
        rep.grants = red.grants;
        for (const auto& g : red.grants) bundles[g.agent].add(g.item);
        const Instance& res = red.residual;
        rep.completed = true;
        if (res.n > 0) {
            try {
                BigItemsReport big = allocate_with_big_items(res, alpha, params);
                rep.case_id = big.case_id;
                if (big.residual_run) rep.run = big.residual_run;
                else if (big.u3_run) rep.run = big.u3_run;
                if (big.case_id >= 1) {
                    CasePayload payload;
                    payload.which = big.cases.which;
                    auto agents = [&](const std::vector<int>& xs) {
                        std::vector<int> out;
                        for (int a : xs) out.push_back(red.agent_map[a]);
                        return out;
                    };
                    auto items = [&](const std::vector<int>& ws) {
                        std::vector<int> out;
                        for (int w : ws) out.push_back(red.item_map[w]);
                        return out;
                    };
                    payload.u1 = agents(big.cases.u1);
                    payload.u2 = agents(big.cases.u2);
                    payload.u3 = agents(big.cases.u3);
                    payload.w1 = items(big.cases.w1);
                    payload.w2 = items(big.cases.w2);
                    payload.w3 = items(big.cases.w3);
                    rep.cases = std::move(payload);
                }
                if (big.residual_run && !big.residual_run->success) {
                    rep.completed = false;
                    rep.failure_round = big.residual_run->failure_round;
                }
                for (int i = 0; i < res.n; ++i) {
                    Bundle mapped;
                    big.bundles[i].for_each([&](int e) { mapped.add(red.item_map[e]); });
                    bundles[red.agent_map[i]] = mapped;
                }
            } catch (const ExhaustedError& ex) {
                rep.completed = false;
                rep.failure_round = ex.round;
            }
        }
    }

    rep.allocation = make_allocation(inst, bundles);
    rep.verification = verify_allocation(inst, rep.allocation, alpha, ShareKind::APS);
    return rep;
}

int thread_count() {
    if (const char* env = std::getenv("FAIRDIV_THREADS")) {
        int k = std::atoi(env);
        if (k > 0) return k;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace fairdiv
