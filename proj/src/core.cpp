#include "fairdiv/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fairdiv {

using nlohmann::json;

Bundle Bundle::full(int m) {
    if (m < 0 || m > kMaxItems)
        throw InputError("universe size out of range: " + std::to_string(m));
    return m == 0 ? Bundle() : Bundle(~uint64_t{0} >> (64 - m));
}

Bundle Bundle::from_items(const std::vector<int>& items) {
    Bundle b;
    for (int e : items) b.add(e);
    return b;
}

std::vector<int> Bundle::items() const {
    std::vector<int> out;
    out.reserve(count());
    for_each([&](int e) { out.push_back(e); });
    return out;
}

XOSValuation::XOSValuation(std::vector<std::vector<double>> clauses)
    : clauses_(std::move(clauses)) {
    if (clauses_.empty()) throw InputError("XOS valuation needs at least one clause");
    m_ = static_cast<int>(clauses_[0].size());
    if (m_ > kMaxItems + 1) throw InputError("too many items for bundle word");
    for (const auto& c : clauses_) {
        if (static_cast<int>(c.size()) != m_)
            throw InputError("clause length mismatch");
        for (double x : c)
            if (!(x >= 0.0) || !std::isfinite(x))
                throw InputError("clause entries must be finite and nonnegative");
    }
}

double XOSValuation::clause_value(int j, Bundle s) const {
    const auto& c = clauses_[j];
    double sum = 0.0;
    s.for_each([&](int e) {
        if (e >= m_) throw InputError("item index out of range for valuation");
        sum += c[e];
    });
    return sum;
}

double XOSValuation::value(Bundle s) const {
    if (s.empty()) return 0.0;
    double best = 0.0;
    for (int j = 0; j < num_clauses(); ++j)
        best = std::max(best, clause_value(j, s));
    return best;
}

int XOSValuation::maximizing_clause(Bundle s) const {
    int arg = 0;
    double best = clause_value(0, s);
    for (int j = 1; j < num_clauses(); ++j) {
        double v = clause_value(j, s);
        if (v > best + kValueTol) {
            best = v;
            arg = j;
        }
    }
    return arg;
}

void Instance::validate() const {
    if (n < 1) throw InputError("instance needs n >= 1 agents");
    if (m < 0 || m > kMaxItems) throw InputError("instance m out of range");
    if (static_cast<int>(valuations.size()) != n)
        throw InputError("valuations length must equal n");
    for (const auto& v : valuations)
        if (v.num_items() != m) throw InputError("valuation item count != m");
}

void Allocation::validate(const Instance& inst) const {
    if (static_cast<int>(bundles.size()) != inst.n)
        throw InputError("allocation bundle count != n");
    Bundle seen;
    for (const auto& b : bundles) {
        if (!b.subset_of(Bundle::full(inst.m)))
            throw InputError("allocated item outside universe");
        if (seen.intersects(b)) throw InputError("allocation bundles overlap");
        seen = seen | b;
    }
    if (achieved.size() != bundles.size())
        throw InputError("achieved length != bundle count");
    for (int i = 0; i < inst.n; ++i) {
        double v = inst.valuations[i].value(bundles[i]);
        if (std::abs(v - achieved[i]) > kValueTol)
            throw InputError("achieved value mismatch for agent " + std::to_string(i));
    }
}

Allocation make_allocation(const Instance& inst, std::vector<Bundle> bundles) {
    Allocation a;
    a.bundles = std::move(bundles);
    a.achieved.resize(a.bundles.size());
    for (size_t i = 0; i < a.bundles.size(); ++i)
        a.achieved[i] = inst.valuations[i].value(a.bundles[i]);
    a.validate(inst);
    return a;
}

namespace {

double require_value(const json& j, const std::string& where) {
    if (!j.is_number())
        throw ParseError("expected a number at " + where);
    double x = j.get<double>();
    if (!std::isfinite(x)) throw ParseError("non-finite value at " + where);
    if (x < 0.0) throw ParseError("negative value at " + where);
    return x;
}

}  // namespace

Instance load_instance(const std::string& bytes) {
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::exception& e) {
        throw ParseError(std::string("instance document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("n") || !doc.contains("m") ||
        !doc.contains("valuations"))
        throw ParseError("instance document must have fields n, m, valuations");
    if (!doc["n"].is_number_integer() || !doc["m"].is_number_integer())
        throw ParseError("n and m must be integers");
    Instance inst;
    inst.n = doc["n"].get<int>();
    inst.m = doc["m"].get<int>();
    const json& vals = doc["valuations"];
    if (!vals.is_array()) throw ParseError("valuations must be an array");
    int ai = 0;
    for (const json& agent : vals) {
        std::string apath = "valuations[" + std::to_string(ai) + "]";
        if (!agent.is_array() || agent.empty())
            throw ParseError(apath + " must be a nonempty array of clauses");
        std::vector<std::vector<double>> clauses;
        int ci = 0;
        for (const json& clause : agent) {
            std::string cpath = apath + "[" + std::to_string(ci) + "]";
            if (!clause.is_array() || static_cast<int>(clause.size()) != inst.m)
                throw ParseError(cpath + " must be a length-m array");
            std::vector<double> row;
            int ei = 0;
            for (const json& x : clause) {
                row.push_back(require_value(x, cpath + "[" + std::to_string(ei) + "]"));
                ++ei;
            }
            clauses.push_back(std::move(row));
            ++ci;
        }
        inst.valuations.emplace_back(std::move(clauses));
        ++ai;
    }
    try {
        inst.validate();
    } catch (const InputError& e) {
        throw ParseError(e.what());
    }
    return inst;
}

std::string save_instance(const Instance& inst) {
    inst.validate();
    json doc;
    doc["n"] = inst.n;
    doc["m"] = inst.m;
    json vals = json::array();
    for (const auto& v : inst.valuations) {
        json agent = json::array();
        for (const auto& c : v.clauses()) agent.push_back(c);
        vals.push_back(std::move(agent));
    }
    doc["valuations"] = std::move(vals);
    return doc.dump(2);
}

Instance load_instance_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open instance file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_instance(ss.str());
}

void save_instance_file(const Instance& inst, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open output file: " + path);
    out << save_instance(inst) << "\n";
}

void GeneratorSpec::validate() const {
    if (n < 1 || m < 0 || m > kMaxItems) throw SpecError("generator: bad n or m");
    if (clauses_min < 1 || clauses_max < clauses_min)
        throw SpecError("generator: bad clause count range");
    if (!(value_min >= 0.0) || value_max < value_min)
        throw SpecError("generator: bad value range");
    if (big_item_fraction < 0.0 || big_item_fraction > 1.0)
        throw SpecError("generator: big_item_fraction outside [0,1]");
    if (big_item_alpha <= 0.0 || big_item_alpha >= 1.0)
        throw SpecError("generator: big_item_alpha outside (0,1)");
    if (overlap < 0.0 || overlap > 1.0)
        throw SpecError("generator: overlap outside [0,1]");
    int planted = static_cast<int>(std::ceil(big_item_fraction * n));
    if (planted > m)
        throw SpecError("generator: cannot plant " + std::to_string(planted) +
                        " distinct big items into m=" + std::to_string(m));
}

GeneratorSpec GeneratorSpec::from_json(const std::string& bytes) {
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::exception& e) {
        throw SpecError(std::string("generator spec is not valid JSON: ") + e.what());
    }
    GeneratorSpec s;
    auto get = [&](const char* key, auto& field) {
        if (doc.contains(key)) field = doc[key].get<std::decay_t<decltype(field)>>();
    };
    get("n", s.n);
    get("m", s.m);
    get("clauses_min", s.clauses_min);
    get("clauses_max", s.clauses_max);
    get("value_min", s.value_min);
    get("value_max", s.value_max);
    get("big_item_fraction", s.big_item_fraction);
    get("big_item_alpha", s.big_item_alpha);
    get("overlap", s.overlap);
    s.validate();
    return s;
}

std::string GeneratorSpec::to_json() const {
    json doc;
    doc["n"] = n;
    doc["m"] = m;
    doc["clauses_min"] = clauses_min;
    doc["clauses_max"] = clauses_max;
    doc["value_min"] = value_min;
    doc["value_max"] = value_max;
    doc["big_item_fraction"] = big_item_fraction;
    doc["big_item_alpha"] = big_item_alpha;
    doc["overlap"] = overlap;
    return doc.dump(2);
}

Instance generate_instance(const GeneratorSpec& spec, uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    Instance inst;
    inst.n = spec.n;
    inst.m = spec.m;

    std::vector<double> shared(spec.m);
    for (double& x : shared) x = rng.uniform(spec.value_min, spec.value_max);

    for (int i = 0; i < spec.n; ++i) {
        int nc = spec.clauses_min + rng.index(spec.clauses_max - spec.clauses_min + 1);
        std::vector<std::vector<double>> clauses(nc, std::vector<double>(spec.m, 0.0));
        for (auto& c : clauses)
            for (int e = 0; e < spec.m; ++e) {
                double own = rng.uniform(spec.value_min, spec.value_max);
                c[e] = spec.overlap * shared[e] + (1.0 - spec.overlap) * own;
            }
        inst.valuations.emplace_back(std::move(clauses));
    }

    // Planted big items: raise one distinct item per chosen agent so that it
    // carries at least big_item_alpha of every clause total, hence at least
    // that fraction of v(M) >= APS.
    int planted = static_cast<int>(std::ceil(spec.big_item_fraction * spec.n));
    for (int i = 0; i < planted; ++i) {
        int e = i % spec.m;
        auto clauses = inst.valuations[i].clauses();
        double a = spec.big_item_alpha;
        for (auto& c : clauses) {
            double rest = 0.0;
            for (int x = 0; x < spec.m; ++x)
                if (x != e) rest += c[x];
            double need = rest > 0.0 ? a * rest / (1.0 - a) : 1.0;
            c[e] = std::max(c[e], need * (1.0 + 1e-9) + 1e-12);
        }
        inst.valuations[i] = XOSValuation(std::move(clauses));
    }
    inst.validate();
    return inst;
}

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
    uint64_t x = seed;
    for (auto& s : s_) s = (x = splitmix64(x));
}

uint64_t Rng::u64() {
    uint64_t result = rotl(s_[1] * 5, 7) * 9;
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::index(int k) {
    if (k <= 0) throw InputError("Rng::index needs k > 0");
    return static_cast<int>(u64() % static_cast<uint64_t>(k));
}

Rng Rng::split(uint64_t salt) const { return Rng(splitmix64(seed_ ^ splitmix64(salt))); }

}  // namespace fairdiv
