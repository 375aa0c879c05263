#include "fax/exchange.hpp"

#include <algorithm>
#include <sstream>

namespace fax {

namespace {

std::string pair_str(const RelationPair& p) {
    return "(" + p.first + "," + p.second + ")";
}

std::string polarity_str(Polarity p) {
    return p == Polarity::Attack ? "attack" : "support";
}

Polarity polarity_from(const std::string& s) {
    if (s == "attack") return Polarity::Attack;
    if (s == "support") return Polarity::Support;
    throw ParameterError("unknown polarity: " + s);
}

std::optional<Polarity> polarity_in(const Baf& baf, const RelationPair& pair) {
    if (baf.attacks().contains(pair)) return Polarity::Attack;
    if (baf.supports().contains(pair)) return Polarity::Support;
    return std::nullopt;
}

}  // namespace

ExchangeState init_fax(const std::string& e,
                       std::vector<PrivateTriple> agents) {
    if (agents.size() != 2) {
        throw ArityError("this artifact implements two-agent exchanges only");
    }
    for (const auto& agent : agents) {
        if (!agent.private_baf.has_argument(e)) {
            throw ArgumentNotFound(e);
        }
        auto report = validate_for_explanandum(agent.private_baf, e);
        if (!report.ok()) {
            throw InvalidBaf("agent " + std::to_string(agent.agent_index) +
                             " private BAF is not a BAF for the explanandum");
        }
    }
    ExchangeState state;
    state.explanandum = e;
    state.exchange_bafs.push_back(
        Baf({agents.front().private_baf.argument(e)}, {}, {}));
    state.initial_conflict = in_conflict(agents, e);
    state.snapshots.push_back(std::move(agents));
    return state;
}

ExchangeState step(const ExchangeState& state, const Contribution& contribution,
                   const std::map<int, Polarity>& interpretations) {
    const auto& pair = contribution.pair;
    if (state.mapping.contains(pair)) {
        throw ProtocolError("already contributed: " + pair_str(pair));
    }
    const auto& agents = state.current_agents();
    auto it = std::find_if(agents.begin(), agents.end(), [&](const auto& a) {
        return a.agent_index == contribution.contributor;
    });
    if (it == agents.end()) {
        throw ProtocolError("unknown contributor index " +
                            std::to_string(contribution.contributor));
    }
    const PrivateTriple& contributor = *it;
    if (polarity_in(contributor.private_baf, pair) != contribution.polarity) {
        throw ProtocolError("illegal contribution: " + pair_str(pair) +
                            " is not a " + polarity_str(contribution.polarity) +
                            " in the contributor's private BAF");
    }
    for (const auto& agent : agents) {
        if (agent.agent_index != contribution.contributor &&
            !interpretations.contains(agent.agent_index)) {
            throw ProtocolError("incomplete interpretations: missing agent " +
                                std::to_string(agent.agent_index));
        }
    }

    const Argument& source = contributor.private_baf.argument(pair.first);

    ExchangeState next = state;
    int t = state.timestep() + 1;
    next.exchange_bafs.push_back(state.current_baf()
                                     .with_argument(source)
                                     .with_relation(pair, contribution.polarity));
    auto report = validate_for_explanandum(next.exchange_bafs.back(),
                                           state.explanandum);
    if (!report.ok()) {
        throw InvalidBaf("contribution would break exchange-BAF validity: " +
                         pair_str(pair));
    }

    std::vector<PrivateTriple> grown;
    grown.reserve(agents.size());
    for (const auto& agent : agents) {
        if (agent.agent_index == contribution.contributor) {
            grown.push_back(agent);
            continue;
        }
        Baf priv = agent.private_baf.with_argument(source);
        if (!polarity_in(priv, pair)) {
            priv = priv.with_relation(pair,
                                      interpretations.at(agent.agent_index));
        }
        grown.push_back(agent.with_baf(std::move(priv)));
    }
    next.snapshots.push_back(std::move(grown));
    next.mapping[pair] = MappingEntry{contribution.contributor, t,
                                      contribution.polarity};
    return next;
}

InterleavingReport check_strict_interleaving(const ExchangeState& state) {
    InterleavingReport report;
    int n = state.timestep();
    std::map<int, std::vector<const MappingEntry*>> by_step;
    for (const auto& [pair, entry] : state.mapping) {
        by_step[entry.timestep].push_back(&entry);
    }
    for (int t = 1; t <= n; ++t) {
        auto it = by_step.find(t);
        std::size_t count = it == by_step.end() ? 0 : it->second.size();
        if (count != 1) {
            report.violation = "timestep " + std::to_string(t) + " has " +
                               std::to_string(count) + " contributions";
            return report;
        }
        int expected = (t % 2 == 1) ? 1 : 2;
        if (it->second.front()->contributor != expected) {
            report.violation = "timestep " + std::to_string(t) +
                               " contributed by agent " +
                               std::to_string(it->second.front()->contributor);
            return report;
        }
    }
    report.interleaved = true;
    report.equal_opportunity = n % 2 == 0;
    return report;
}

ResolutionStatus resolution_status(const ExchangeState& state) {
    ResolutionStatus status;
    int n = state.timestep();
    if (n == 0) return status;  // Def. quantifies over ]n]; vacuous at n=0

    bool all_conflicting = true;
    for (int t = 1; t <= n; ++t) {
        bool conflicting = in_conflict(state.snapshots[t], state.explanandum);
        if (!conflicting) {
            all_conflicting = false;
            if (!status.resolved_at) status.resolved_at = t;
            if (t == n) status.resolved = true;
        }
    }
    status.unresolved = all_conflicting;
    return status;
}

bool has_effective_lingua_franca(const ExchangeState& state) {
    std::set<RelationPair> all_attacks, all_supports;
    for (const auto& agent : state.current_agents()) {
        const auto& baf = agent.private_baf;
        all_attacks.insert(baf.attacks().begin(), baf.attacks().end());
        all_supports.insert(baf.supports().begin(), baf.supports().end());
    }
    return std::none_of(all_attacks.begin(), all_attacks.end(),
                        [&](const auto& p) { return all_supports.contains(p); });
}

nlohmann::ordered_json to_json(const DebateTranscript& t) {
    nlohmann::ordered_json j;
    j["explanandum"] = t.explanandum;
    j["steps"] = nlohmann::ordered_json::array();
    for (const auto& s : t.steps) {
        nlohmann::ordered_json js;
        js["t"] = s.t;
        js["contributor"] = s.contributor;
        js["pair"] = {s.pair.first, s.pair.second};
        js["polarity_contributed"] = polarity_str(s.polarity_contributed);
        js["interpretations"] = nlohmann::ordered_json::object();
        for (const auto& [agent, pol] : s.interpretations) {
            js["interpretations"][std::to_string(agent)] = polarity_str(pol);
        }
        js["strengths"] = nlohmann::ordered_json::object();
        for (const auto& [agent, v] : s.strengths) {
            js["strengths"][std::to_string(agent)] = v;
        }
        js["stances"] = nlohmann::ordered_json::object();
        for (const auto& [agent, sign] : s.stances) {
            js["stances"][std::to_string(agent)] =
                sign == StanceSign::Positive ? "+" : "-";
        }
        j["steps"].push_back(std::move(js));
    }
    if (t.resolved_at) {
        j["resolved_at"] = *t.resolved_at;
    } else {
        j["resolved_at"] = nullptr;
    }
    j["lingua_franca"] = t.lingua_franca;
    j["tau"] = t.tau;
    if (t.input_id) j["input_id"] = *t.input_id;
    if (t.ground_truth) j["ground_truth"] = *t.ground_truth;
    if (t.teacher_prediction) j["teacher_prediction"] = *t.teacher_prediction;
    if (t.proponent_class) j["proponent_class"] = *t.proponent_class;
    if (t.opponent_class) j["opponent_class"] = *t.opponent_class;
    if (t.initial_pro_class) j["initial_pro_class"] = *t.initial_pro_class;
    if (!t.final_hidden_class.empty()) {
        j["final_hidden_class"] = nlohmann::ordered_json::object();
        for (const auto& [agent, cls] : t.final_hidden_class) {
            j["final_hidden_class"][std::to_string(agent)] = cls;
        }
    }
    if (!t.final_argument_rows.empty()) {
        j["final_argument_rows"] = nlohmann::ordered_json::object();
        for (const auto& [cls, rows] : t.final_argument_rows) {
            j["final_argument_rows"][std::to_string(cls)] = rows;
        }
    }
    if (!t.assigned_rows.empty()) {
        j["assigned_rows"] = nlohmann::ordered_json::object();
        for (const auto& [cls, rows] : t.assigned_rows) {
            j["assigned_rows"][std::to_string(cls)] = rows;
        }
    }
    if (!t.union_assignment.empty()) {
        j["union_assignment"] = nlohmann::ordered_json::array();
        for (const auto& [cls, row] : t.union_assignment) {
            j["union_assignment"].push_back({cls, row});
        }
    }
    return j;
}

DebateTranscript transcript_from_json(const nlohmann::json& j) {
    DebateTranscript t;
    t.explanandum = j.at("explanandum").get<std::string>();
    for (const auto& js : j.at("steps")) {
        TranscriptStep s;
        s.t = js.at("t").get<int>();
        s.contributor = js.at("contributor").get<int>();
        s.pair = {js.at("pair").at(0).get<std::string>(),
                  js.at("pair").at(1).get<std::string>()};
        s.polarity_contributed =
            polarity_from(js.at("polarity_contributed").get<std::string>());
        for (const auto& [key, val] : js.at("interpretations").items()) {
            s.interpretations[std::stoi(key)] =
                polarity_from(val.get<std::string>());
        }
        for (const auto& [key, val] : js.at("strengths").items()) {
            s.strengths[std::stoi(key)] = val.get<double>();
        }
        for (const auto& [key, val] : js.at("stances").items()) {
            s.stances[std::stoi(key)] = val.get<std::string>() == "+"
                                            ? StanceSign::Positive
                                            : StanceSign::Negative;
        }
        t.steps.push_back(std::move(s));
    }
    if (j.contains("resolved_at") && !j["resolved_at"].is_null()) {
        t.resolved_at = j["resolved_at"].get<int>();
    }
    t.lingua_franca = j.at("lingua_franca").get<bool>();
    if (j.contains("tau")) t.tau = j["tau"].get<double>();
    if (j.contains("input_id")) t.input_id = j["input_id"].get<int>();
    if (j.contains("ground_truth")) t.ground_truth = j["ground_truth"].get<int>();
    if (j.contains("teacher_prediction")) {
        t.teacher_prediction = j["teacher_prediction"].get<int>();
    }
    if (j.contains("proponent_class")) {
        t.proponent_class = j["proponent_class"].get<int>();
    }
    if (j.contains("opponent_class")) {
        t.opponent_class = j["opponent_class"].get<int>();
    }
    if (j.contains("initial_pro_class")) {
        t.initial_pro_class = j["initial_pro_class"].get<int>();
    }
    if (j.contains("final_hidden_class")) {
        for (const auto& [key, val] : j["final_hidden_class"].items()) {
            t.final_hidden_class[std::stoi(key)] = val.get<int>();
        }
    }
    if (j.contains("final_argument_rows")) {
        for (const auto& [key, val] : j["final_argument_rows"].items()) {
            t.final_argument_rows[std::stoi(key)] = val.get<std::vector<int>>();
        }
    }
    if (j.contains("assigned_rows")) {
        for (const auto& [key, val] : j["assigned_rows"].items()) {
            t.assigned_rows[std::stoi(key)] = val.get<std::vector<int>>();
        }
    }
    if (j.contains("union_assignment")) {
        for (const auto& entry : j["union_assignment"]) {
            t.union_assignment.emplace_back(entry.at(0).get<int>(),
                                            entry.at(1).get<int>());
        }
    }
    return t;
}

std::string exchange_dot(const ExchangeState& state) {
    const auto& final_baf = state.current_baf();
    std::ostringstream os;
    os << "digraph exchange {\n";
    for (const auto& [id, a] : final_baf.arguments()) {
        os << "  \"" << id << "\" [label=\""
           << (a.label.empty() ? id : a.label) << "\"";
        if (a.kind == ArgKind::Explanandum) os << ", shape=doubleoctagon";
        os << "];\n";
    }
    auto edge = [&](const RelationPair& p, Polarity contributed) {
        // Annotate edges the agents read differently.
        std::string note;
        for (const auto& agent : state.current_agents()) {
            auto pol = polarity_in(agent.private_baf, p);
            if (pol && *pol != contributed) {
                note += " A" + std::to_string(agent.agent_index) + ":" +
                        (*pol == Polarity::Attack ? "-" : "+");
            }
        }
        bool attack = contributed == Polarity::Attack;
        os << "  \"" << p.first << "\" -> \"" << p.second << "\" [color="
           << (attack ? "red" : "green") << ", label=\""
           << (attack ? "-" : "+") << note << "\"];\n";
    };
    for (const auto& p : final_baf.attacks()) edge(p, Polarity::Attack);
    for (const auto& p : final_baf.supports()) edge(p, Polarity::Support);
    os << "}\n";
    return os.str();
}

std::string transcript_dot(const DebateTranscript& t) {
    std::ostringstream os;
    os << "digraph exchange {\n";
    os << "  \"" << t.explanandum
       << "\" [shape=doubleoctagon];\n";
    for (const auto& s : t.steps) {
        os << "  \"" << s.pair.first << "\" [label=\"" << s.pair.first
           << " (A" << s.contributor << ", t=" << s.t << ")\"];\n";
        std::string note;
        for (const auto& [agent, pol] : s.interpretations) {
            if (pol != s.polarity_contributed) {
                note += " A" + std::to_string(agent) + ":" +
                        (pol == Polarity::Attack ? "-" : "+");
            }
        }
        bool attack = s.polarity_contributed == Polarity::Attack;
        os << "  \"" << s.pair.first << "\" -> \"" << s.pair.second
           << "\" [color=" << (attack ? "red" : "green") << ", label=\""
           << (attack ? "-" : "+") << note << "\"];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace fax
