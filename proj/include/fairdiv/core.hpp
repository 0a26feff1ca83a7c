#ifndef FAIRDIV_CORE_HPP
#define FAIRDIV_CORE_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairdiv {

// Absolute tolerance for all cross-value comparisons unless an operation
// states otherwise.
inline constexpr double kValueTol = 1e-9;

// Maximum universe size: bundles are bit sets in a single machine word so
// the exhaustive share oracles can enumerate 2^m subsets.
inline constexpr int kMaxItems = 63;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : InputError {
    using InputError::InputError;
};
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SpecError : InputError {
    using InputError::InputError;
};
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExhaustedError : std::runtime_error {
    int round;
    ExhaustedError(const std::string& what, int round_)
        : std::runtime_error(what), round(round_) {}
};

// Set of item indices in [0, m), stored as a bit mask.
class Bundle {
  public:
    Bundle() = default;
    explicit Bundle(uint64_t bits) : bits_(bits) {}

    static Bundle full(int m);
    static Bundle single(int e) { return Bundle(uint64_t{1} << check(e)); }
    static Bundle from_items(const std::vector<int>& items);

    uint64_t bits() const { return bits_; }
    bool contains(int e) const { return (bits_ >> check(e)) & 1u; }
    bool empty() const { return bits_ == 0; }
    int count() const { return __builtin_popcountll(bits_); }

    void add(int e) { bits_ |= uint64_t{1} << check(e); }
    void remove(int e) { bits_ &= ~(uint64_t{1} << check(e)); }

    Bundle operator|(Bundle o) const { return Bundle(bits_ | o.bits_); }
    Bundle operator&(Bundle o) const { return Bundle(bits_ & o.bits_); }
    Bundle minus(Bundle o) const { return Bundle(bits_ & ~o.bits_); }
    bool subset_of(Bundle o) const { return (bits_ & ~o.bits_) == 0; }
    bool intersects(Bundle o) const { return (bits_ & o.bits_) != 0; }
    bool operator==(const Bundle&) const = default;

    std::vector<int> items() const;

    // Applies fn to every member index in increasing order.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        uint64_t b = bits_;
        while (b) {
            int e = __builtin_ctzll(b);
            fn(e);
            b &= b - 1;
        }
    }

  private:
    static int check(int e) {
        if (e < 0 || e > kMaxItems)
            throw InputError("item index out of range: " + std::to_string(e));
        return e;
    }
    uint64_t bits_ = 0;
};

// Max over additive clauses; monotone by construction since all clause
// entries are nonnegative.
class XOSValuation {
  public:
    XOSValuation() = default;
    explicit XOSValuation(std::vector<std::vector<double>> clauses);

    int num_items() const { return m_; }
    int num_clauses() const { return static_cast<int>(clauses_.size()); }
    const std::vector<double>& clause(int j) const { return clauses_[j]; }
    const std::vector<std::vector<double>>& clauses() const { return clauses_; }

    double clause_value(int j, Bundle s) const;
    double value(Bundle s) const;
    // Lowest clause index attaining value(s).
    int maximizing_clause(Bundle s) const;
    double item_value(int e) const { return value(Bundle::single(e)); }

    bool operator==(const XOSValuation&) const = default;

  private:
    std::vector<std::vector<double>> clauses_;
    int m_ = 0;
};

struct Instance {
    int n = 0;
    int m = 0;
    std::vector<XOSValuation> valuations;  // one per agent, entitlement 1/n

    void validate() const;
    bool operator==(const Instance&) const = default;
};

struct Allocation {
    std::vector<Bundle> bundles;   // one per agent, possibly empty
    std::vector<double> achieved;  // value(v_i, bundles[i])

    // Checks disjointness, range, and that achieved matches recomputation.
    void validate(const Instance& inst) const;
};

// Recomputes achieved values from the instance.
Allocation make_allocation(const Instance& inst, std::vector<Bundle> bundles);

// Instance document: {"n": int, "m": int, "valuations": [[[float; m]...]...]}.
Instance load_instance(const std::string& bytes);
std::string save_instance(const Instance& inst);
Instance load_instance_file(const std::string& path);
void save_instance_file(const Instance& inst, const std::string& path);

struct GeneratorSpec {
    int n = 2;
    int m = 4;
    int clauses_min = 1;
    int clauses_max = 1;
    double value_min = 0.0;
    double value_max = 1.0;
    // Fraction of agents that get one planted item worth at least
    // big_item_alpha times their value for the whole universe (hence at
    // least that fraction of their APS).
    double big_item_fraction = 0.0;
    double big_item_alpha = 0.3;
    // 0 = independent agents, 1 = all agents share one additive profile.
    double overlap = 0.0;

    void validate() const;
    static GeneratorSpec from_json(const std::string& bytes);
    std::string to_json() const;
};

Instance generate_instance(const GeneratorSpec& spec, uint64_t seed);

// Deterministic, splittable generator (xoshiro256** seeded via splitmix64);
// identical sequences on every platform, so runs replay bit-exactly.
class Rng {
  public:
    explicit Rng(uint64_t seed);

    uint64_t u64();
    double uniform();  // [0, 1), 53-bit
    double uniform(double lo, double hi);
    int index(int k);  // [0, k)

    // Independent child stream, for per-run generators in corpus sweeps.
    Rng split(uint64_t salt) const;

  private:
    uint64_t seed_ = 0;
    uint64_t s_[4] = {0, 0, 0, 0};
};

}  // namespace fairdiv

#endif
