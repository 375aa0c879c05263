#include "fax/agents.hpp"

#include <cmath>

namespace fax {

Evaluator weighted_evaluator(const AggregationParams& params) {
    return [params](const Baf& baf, const std::string& arg) {
        return evaluate_weighted(baf, params).at(arg);
    };
}

Stance agent_stance(const PrivateTriple& agent, const std::string& arg) {
    agent.private_baf.argument(arg);
    double strength = agent.evaluator(agent.private_baf, arg);
    return Stance{stance_of(agent.range, strength)};
}

bool in_conflict(const std::vector<PrivateTriple>& agents,
                 const std::string& e) {
    if (agents.size() < 2) {
        throw ArityError("conflict requires at least two agents");
    }
    Stance first = agent_stance(agents.front(), e);
    for (std::size_t i = 1; i < agents.size(); ++i) {
        if (!(agent_stance(agents[i], e) == first)) return true;
    }
    return false;
}

std::optional<double> conflict_threshold(double v1, double v2) {
    if (v1 < 0.0 || v1 > 1.0 || v2 < 0.0 || v2 > 1.0) {
        throw RangeError("conflict_threshold inputs must lie in [0,1]");
    }
    if (v1 == v2) return std::nullopt;
    double lo = std::min(v1, v2);
    double hi = std::max(v1, v2);
    double tau = lo + (hi - lo) / 2.0;
    // The positive partition is [tau, 1], so tau must strictly exceed
    // the lower value while not exceeding the higher one.
    if (tau <= lo) tau = std::nextafter(lo, 1.0);
    if (tau > hi) tau = hi;
    return tau;
}

}  // namespace fax
