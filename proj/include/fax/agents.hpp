#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "fax/baf.hpp"
#include "fax/semantics.hpp"

namespace fax {

// Evaluator: strength of one argument in a given framework.
using Evaluator = std::function<double(const Baf&, const std::string&)>;

struct Stance {
    StanceSign sign = StanceSign::Positive;

    int as_scalar() const { return sign == StanceSign::Positive ? +1 : -1; }
    friend bool operator==(const Stance&, const Stance&) = default;
};

// An agent: private evaluation range, private BAF and private evaluation
// method. Immutable snapshot; the exchange produces new snapshots per
// timestep.
struct PrivateTriple {
    int agent_index = 1;
    EvaluationRange range;
    Baf private_baf;
    Evaluator evaluator;

    PrivateTriple with_baf(Baf next) const {
        PrivateTriple out = *this;
        out.private_baf = std::move(next);
        return out;
    }
};

// Wraps the weighted-aggregation semantics as an Evaluator.
Evaluator weighted_evaluator(const AggregationParams& params = {});

Stance agent_stance(const PrivateTriple& agent, const std::string& arg);

bool in_conflict(const std::vector<PrivateTriple>& agents,
                 const std::string& e);

// Midpoint threshold realizing Corollary-1-style conflict: for v1 != v2
// in [0,1], returns tau with min(v1,v2) < tau <= max(v1,v2) so exactly
// one of the two values lands in the positive partition. Equal inputs
// yield nullopt.
std::optional<double> conflict_threshold(double v1, double v2);

}  // namespace fax
