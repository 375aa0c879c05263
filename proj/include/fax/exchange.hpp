#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fax/agents.hpp"
#include "fax/baf.hpp"

namespace fax {

struct Contribution {
    RelationPair pair;
    Polarity polarity = Polarity::Support;
    int contributor = 1;
};

struct MappingEntry {
    int contributor = 1;
    int timestep = 1;
    Polarity polarity = Polarity::Support;

    friend bool operator==(const MappingEntry&, const MappingEntry&) = default;
};

// Injective record of which agent contributed each exchanged pair, when,
// and under which polarity.
using ContributorMapping = std::map<RelationPair, MappingEntry>;

// The FAX: per-timestep exchange BAFs, agent snapshots and the
// contributor mapping. Values are immutable; step() returns a new state.
struct ExchangeState {
    std::string explanandum;
    std::vector<Baf> exchange_bafs;                      // B⋄0..B⋄t
    std::vector<std::vector<PrivateTriple>> snapshots;   // agents at 0..t
    ContributorMapping mapping;
    bool initial_conflict = false;

    int timestep() const { return static_cast<int>(exchange_bafs.size()) - 1; }
    const Baf& current_baf() const { return exchange_bafs.back(); }
    const std::vector<PrivateTriple>& current_agents() const {
        return snapshots.back();
    }
};

// Timestep-0 state: exchange BAF {e} with no relations. Exactly two
// agents; a missing initial conflict is recorded, not rejected.
ExchangeState init_fax(const std::string& e,
                       std::vector<PrivateTriple> agents);

// One protocol step: the contributed pair (taken from the contributor's
// private BAF under the stated polarity) joins the exchange BAF, and
// every other agent learns it under its own interpretation.
ExchangeState step(const ExchangeState& state, const Contribution& contribution,
                   const std::map<int, Polarity>& interpretations);

struct InterleavingReport {
    bool interleaved = false;
    bool equal_opportunity = false;
    std::string violation;
};

InterleavingReport check_strict_interleaving(const ExchangeState& state);

struct ResolutionStatus {
    std::optional<int> resolved_at;  // earliest non-conflicting timestep >= 1
    bool resolved = false;           // non-conflicting at the final timestep
    bool unresolved = false;         // conflicting at every timestep in ]n]
};

ResolutionStatus resolution_status(const ExchangeState& state);

bool has_effective_lingua_franca(const ExchangeState& state);

struct TranscriptStep {
    int t = 1;
    int contributor = 1;
    RelationPair pair;
    Polarity polarity_contributed = Polarity::Support;
    std::map<int, Polarity> interpretations;
    std::map<int, double> strengths;  // σ^i(e) after the step
    std::map<int, StanceSign> stances;
};

struct DebateTranscript {
    std::string explanandum;
    std::vector<TranscriptStep> steps;
    std::optional<int> resolved_at;
    bool lingua_franca = true;

    // Pipeline metadata (absent for bare protocol runs).
    std::optional<int> input_id;
    std::optional<int> ground_truth;
    std::optional<int> teacher_prediction;
    std::optional<int> proponent_class;
    std::optional<int> opponent_class;
    std::optional<int> initial_pro_class;            // q1(h1_0)
    std::map<int, int> final_hidden_class;           // q^i(h^i_n)
    std::map<int, std::vector<int>> final_argument_rows;  // class -> codebook rows
    std::map<int, std::vector<int>> assigned_rows;   // class -> row per latent
    // Union of the agents' final argument multisets: one (class, row)
    // entry per multiplicity unit.
    std::vector<std::pair<int, int>> union_assignment;
    double tau = 0.5;
};

nlohmann::ordered_json to_json(const DebateTranscript& t);
DebateTranscript transcript_from_json(const nlohmann::json& j);

// DOT of the final exchange BAF; edges the agents interpret differently
// are annotated with each agent's reading.
std::string exchange_dot(const ExchangeState& state);
std::string transcript_dot(const DebateTranscript& t);

}  // namespace fax
