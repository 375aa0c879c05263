#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fax/baf.hpp"

namespace fax {

// Evaluation range [lo, hi] split at tau: negative partition [lo, tau),
// positive partition [tau, hi]. The threshold itself is positive.
struct EvaluationRange {
    double lo = 0.0;
    double hi = 1.0;
    double tau = 0.5;

    EvaluationRange() = default;
    EvaluationRange(double lo_, double hi_, double tau_);

    bool contains(double v) const { return v >= lo && v <= hi; }
};

enum class StanceSign { Negative, Positive };

// Strength map over a BAF's argument set.
struct StrengthAssignment {
    std::map<std::string, double> values;

    double at(const std::string& id) const;
};

nlohmann::ordered_json to_json(const StrengthAssignment& s);

// Parameters of the clamped additive aggregation semantics.
struct AggregationParams {
    double base = 0.5;
    double weight = 0.25;
    EvaluationRange range{0.0, 1.0, 0.5};
};

// σ(a) = clamp(base + weight * (Σ supporters − Σ attackers), lo, hi),
// computed in topological order; leaves get base. Requires an acyclic
// framework.
StrengthAssignment evaluate_weighted(const Baf& baf,
                                     const AggregationParams& params = {});

StanceSign stance_of(const EvaluationRange& range, double strength);

using SemanticsFn = std::function<StrengthAssignment(const Baf&)>;

struct MonotonicityWitness {
    std::string target;
    double before = 0.0;
    double after = 0.0;
};

// Adds a fresh argument plus one edge to baf and checks the first
// dialectical-monotonicity bullet: an attack must not raise, a support
// must not lower, the target's strength. Returns a witness on failure.
std::optional<MonotonicityWitness> check_monotonicity_add(
    const SemanticsFn& semantics, const Baf& baf, const Argument& fresh,
    const RelationPair& edge, Polarity polarity);

enum class StrengthenStatus { Pass, Witness, Inapplicable };

struct StrengthenResult {
    StrengthenStatus status = StrengthenStatus::Inapplicable;
    std::optional<MonotonicityWitness> witness;
};

// Second bullet: across (before, after), focal's attacker/supporter sets
// are identical, exactly the named neighbor strictly increased and all
// other neighbors are unchanged; then a strengthened attacker must not
// raise, a strengthened supporter must not lower, focal's strength.
// Violated preconditions yield Inapplicable.
StrengthenResult check_monotonicity_strengthen(const SemanticsFn& semantics,
                                               const Baf& before,
                                               const Baf& after,
                                               const std::string& focal,
                                               const std::string& moved);

}  // namespace fax
