#include "fax/semantics.hpp"

#include <algorithm>
#include <deque>

namespace fax {

EvaluationRange::EvaluationRange(double lo_, double hi_, double tau_)
    : lo(lo_), hi(hi_), tau(tau_) {
    if (!(lo <= tau && tau <= hi)) {
        throw RangeError("evaluation range requires lo <= tau <= hi");
    }
}

double StrengthAssignment::at(const std::string& id) const {
    auto it = values.find(id);
    if (it == values.end()) throw ArgumentNotFound(id);
    return it->second;
}

nlohmann::ordered_json to_json(const StrengthAssignment& s) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [id, v] : s.values) j[id] = v;
    return j;
}

StrengthAssignment evaluate_weighted(const Baf& baf,
                                     const AggregationParams& params) {
    // Kahn topological order over attack ∪ support, sources first.
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> out_edges;
    for (const auto& [id, a] : baf.arguments()) indegree[id] = 0;
    auto add_edges = [&](const std::set<RelationPair>& rel) {
        for (const auto& [src, tgt] : rel) {
            out_edges[src].push_back(tgt);
            ++indegree[tgt];
        }
    };
    add_edges(baf.attacks());
    add_edges(baf.supports());

    std::deque<std::string> ready;
    for (const auto& [id, deg] : indegree) {
        if (deg == 0) ready.push_back(id);
    }

    StrengthAssignment result;
    const auto& range = params.range;
    std::size_t processed = 0;
    while (!ready.empty()) {
        auto id = ready.front();
        ready.pop_front();
        ++processed;

        double acc = 0.0;
        for (const auto& s : baf.supporters(id)) acc += result.at(s);
        for (const auto& a : baf.attackers(id)) acc -= result.at(a);
        double v = params.base + params.weight * acc;
        result.values[id] = std::clamp(v, range.lo, range.hi);

        for (const auto& next : out_edges[id]) {
            if (--indegree[next] == 0) ready.push_back(next);
        }
    }
    if (processed != baf.arguments().size()) {
        throw CyclicBaf("evaluate_weighted requires an acyclic framework");
    }
    return result;
}

StanceSign stance_of(const EvaluationRange& range, double strength) {
    if (!range.contains(strength)) {
        throw RangeError("strength outside evaluation range");
    }
    return strength >= range.tau ? StanceSign::Positive : StanceSign::Negative;
}

std::optional<MonotonicityWitness> check_monotonicity_add(
    const SemanticsFn& semantics, const Baf& baf, const Argument& fresh,
    const RelationPair& edge, Polarity polarity) {
    if (baf.has_argument(fresh.id)) {
        throw InvalidBaf("monotonicity delta requires a fresh argument");
    }
    if (edge.first != fresh.id || !baf.has_argument(edge.second)) {
        throw InvalidBaf("edge must run from the fresh argument to an existing one");
    }
    Baf grown = baf.with_argument(fresh).with_relation(edge, polarity);
    double before = semantics(baf).at(edge.second);
    double after = semantics(grown).at(edge.second);
    bool ok = polarity == Polarity::Attack ? after <= before : after >= before;
    if (ok) return std::nullopt;
    return MonotonicityWitness{edge.second, before, after};
}

StrengthenResult check_monotonicity_strengthen(const SemanticsFn& semantics,
                                               const Baf& before,
                                               const Baf& after,
                                               const std::string& focal,
                                               const std::string& moved) {
    if (!before.has_argument(focal) || !after.has_argument(focal)) {
        throw ArgumentNotFound(focal);
    }
    auto att_before = before.attackers(focal);
    auto att_after = after.attackers(focal);
    auto sup_before = before.supporters(focal);
    auto sup_after = after.supporters(focal);
    if (att_before != att_after || sup_before != sup_after) {
        return {StrengthenStatus::Inapplicable, std::nullopt};
    }
    bool moved_is_attacker = att_before.contains(moved);
    if (!moved_is_attacker && !sup_before.contains(moved)) {
        return {StrengthenStatus::Inapplicable, std::nullopt};
    }

    auto sa_before = semantics(before);
    auto sa_after = semantics(after);
    if (!(sa_after.at(moved) > sa_before.at(moved))) {
        return {StrengthenStatus::Inapplicable, std::nullopt};
    }
    for (const auto& nb : att_before) {
        if (nb != moved && sa_after.at(nb) != sa_before.at(nb)) {
            return {StrengthenStatus::Inapplicable, std::nullopt};
        }
    }
    for (const auto& nb : sup_before) {
        if (nb != moved && sa_after.at(nb) != sa_before.at(nb)) {
            return {StrengthenStatus::Inapplicable, std::nullopt};
        }
    }

    double f_before = sa_before.at(focal);
    double f_after = sa_after.at(focal);
    bool ok = moved_is_attacker ? f_after <= f_before : f_after >= f_before;
    if (ok) return {StrengthenStatus::Pass, std::nullopt};
    return {StrengthenStatus::Witness,
            MonotonicityWitness{focal, f_before, f_after}};
}

}  // namespace fax
