#include "fax/baf.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace fax {

namespace {

std::string pair_str(const RelationPair& p) {
    return "(" + p.first + "," + p.second + ")";
}

}  // namespace

Baf::Baf(std::vector<Argument> arguments, std::vector<RelationPair> attacks,
         std::vector<RelationPair> supports) {
    for (auto& a : arguments) {
        std::string id = a.id;
        if (!args_.emplace(id, std::move(a)).second) {
            throw InvalidBaf("duplicate argument id: " + id);
        }
    }
    for (const auto& p : attacks) {
        if (!attacks_.insert(p).second) {
            throw InvalidBaf("duplicate attack " + pair_str(p));
        }
    }
    for (const auto& p : supports) {
        if (!supports_.insert(p).second) {
            throw InvalidBaf("duplicate support " + pair_str(p));
        }
    }
    check_invariants();
}

void Baf::check_invariants() const {
    for (const auto& p : attacks_) {
        if (supports_.contains(p)) {
            throw InvalidBaf("pair is both attack and support: " + pair_str(p));
        }
    }
    auto check_endpoints = [&](const std::set<RelationPair>& rel) {
        for (const auto& [src, tgt] : rel) {
            if (!args_.contains(src) || !args_.contains(tgt)) {
                throw InvalidBaf("relation endpoint not in arguments: " +
                                 pair_str({src, tgt}));
            }
        }
    };
    check_endpoints(attacks_);
    check_endpoints(supports_);
}

const Argument& Baf::argument(const std::string& id) const {
    auto it = args_.find(id);
    if (it == args_.end()) throw ArgumentNotFound(id);
    return it->second;
}

std::set<std::string> Baf::attackers(const std::string& id) const {
    argument(id);
    std::set<std::string> out;
    for (const auto& [src, tgt] : attacks_) {
        if (tgt == id) out.insert(src);
    }
    return out;
}

std::set<std::string> Baf::supporters(const std::string& id) const {
    argument(id);
    std::set<std::string> out;
    for (const auto& [src, tgt] : supports_) {
        if (tgt == id) out.insert(src);
    }
    return out;
}

Baf Baf::with_argument(const Argument& a) const {
    if (args_.contains(a.id)) return *this;
    Baf next = *this;
    next.args_.emplace(a.id, a);
    return next;
}

Baf Baf::with_relation(const RelationPair& pair, Polarity polarity) const {
    if (!args_.contains(pair.first) || !args_.contains(pair.second)) {
        throw InvalidBaf("relation endpoint not in arguments: " +
                         pair_str(pair));
    }
    if (attacks_.contains(pair) || supports_.contains(pair)) {
        throw InvalidBaf("pair already related: " + pair_str(pair));
    }
    Baf next = *this;
    (polarity == Polarity::Attack ? next.attacks_ : next.supports_)
        .insert(pair);
    return next;
}

bool sub_baf_leq(const Baf& b, const Baf& b2) {
    for (const auto& [id, arg] : b.arguments()) {
        if (!b2.has_argument(id)) return false;
    }
    return std::includes(b2.attacks().begin(), b2.attacks().end(),
                         b.attacks().begin(), b.attacks().end()) &&
           std::includes(b2.supports().begin(), b2.supports().end(),
                         b.supports().begin(), b.supports().end());
}

BafDelta baf_difference(const Baf& b2, const Baf& b) {
    BafDelta delta;
    for (const auto& [id, arg] : b2.arguments()) {
        if (!b.has_argument(id)) delta.arguments.push_back(arg);
    }
    std::set_difference(b2.attacks().begin(), b2.attacks().end(),
                        b.attacks().begin(), b.attacks().end(),
                        std::inserter(delta.attacks, delta.attacks.end()));
    std::set_difference(b2.supports().begin(), b2.supports().end(),
                        b.supports().begin(), b.supports().end(),
                        std::inserter(delta.supports, delta.supports.end()));
    return delta;
}

Baf apply_delta(const Baf& base, const BafDelta& delta) {
    std::vector<Argument> args;
    for (const auto& [id, a] : base.arguments()) args.push_back(a);
    args.insert(args.end(), delta.arguments.begin(), delta.arguments.end());
    std::vector<RelationPair> attacks(base.attacks().begin(),
                                      base.attacks().end());
    attacks.insert(attacks.end(), delta.attacks.begin(), delta.attacks.end());
    std::vector<RelationPair> supports(base.supports().begin(),
                                       base.supports().end());
    supports.insert(supports.end(), delta.supports.begin(),
                    delta.supports.end());
    return Baf(std::move(args), std::move(attacks), std::move(supports));
}

std::vector<Path> paths(const Baf& baf, const std::string& a,
                        const std::string& b) {
    baf.argument(a);
    baf.argument(b);

    std::map<std::string, std::vector<std::string>> out_edges;
    for (const auto& [src, tgt] : baf.attacks()) out_edges[src].push_back(tgt);
    for (const auto& [src, tgt] : baf.supports()) out_edges[src].push_back(tgt);
    for (auto& [src, tgts] : out_edges) std::sort(tgts.begin(), tgts.end());

    std::vector<Path> result;
    std::vector<RelationPair> stack;
    std::set<std::string> visited;

    std::function<void(const std::string&)> dfs = [&](const std::string& node) {
        auto it = out_edges.find(node);
        if (it == out_edges.end()) return;
        for (const auto& next : it->second) {
            if (next == b) {
                stack.push_back({node, next});
                result.push_back(Path{stack});
                stack.pop_back();
                continue;
            }
            if (visited.contains(next) || next == a) continue;
            visited.insert(next);
            stack.push_back({node, next});
            dfs(next);
            stack.pop_back();
            visited.erase(next);
        }
    };
    dfs(a);
    return result;
}

bool ValidationReport::violates(int condition) const {
    return std::any_of(issues.begin(), issues.end(), [&](const auto& i) {
        return i.condition == condition;
    });
}

ValidationReport validate_for_explanandum(const Baf& baf,
                                          const std::string& e) {
    baf.argument(e);
    ValidationReport report;

    // (i) no outgoing attack or support from e.
    for (const auto& rel : {std::cref(baf.attacks()), std::cref(baf.supports())}) {
        for (const auto& p : rel.get()) {
            if (p.first == e) {
                report.issues.push_back({1, pair_str(p)});
            }
        }
    }

    std::map<std::string, std::vector<std::string>> in_edges, out_edges;
    for (const auto& [src, tgt] : baf.attacks()) {
        in_edges[tgt].push_back(src);
        out_edges[src].push_back(tgt);
    }
    for (const auto& [src, tgt] : baf.supports()) {
        in_edges[tgt].push_back(src);
        out_edges[src].push_back(tgt);
    }

    // (ii) every other argument has a path to e: reverse reachability.
    std::set<std::string> reaches_e{e};
    std::vector<std::string> frontier{e};
    while (!frontier.empty()) {
        auto node = frontier.back();
        frontier.pop_back();
        for (const auto& src : in_edges[node]) {
            if (reaches_e.insert(src).second) frontier.push_back(src);
        }
    }
    for (const auto& [id, arg] : baf.arguments()) {
        if (!reaches_e.contains(id)) {
            report.issues.push_back({2, id});
        }
    }

    // (iii) no cycles: DFS coloring.
    std::map<std::string, int> color;  // 0 white, 1 gray, 2 black
    std::optional<std::string> cycle_witness;
    std::function<bool(const std::string&)> has_cycle =
        [&](const std::string& node) {
            color[node] = 1;
            for (const auto& next : out_edges[node]) {
                if (color[next] == 1) {
                    cycle_witness = next;
                    return true;
                }
                if (color[next] == 0 && has_cycle(next)) return true;
            }
            color[node] = 2;
            return false;
        };
    for (const auto& [id, arg] : baf.arguments()) {
        if (color[id] == 0 && has_cycle(id)) break;
    }
    if (cycle_witness) {
        report.issues.push_back({3, *cycle_witness});
    }
    return report;
}

nlohmann::ordered_json to_json(const Baf& baf) {
    nlohmann::ordered_json j;
    j["arguments"] = nlohmann::ordered_json::array();
    for (const auto& [id, a] : baf.arguments()) {
        nlohmann::ordered_json ja;
        ja["id"] = a.id;
        ja["kind"] = a.kind == ArgKind::Explanandum ? "explanandum" : "feature";
        if (a.class_index) ja["class_index"] = *a.class_index;
        if (a.feature_ref) ja["feature_ref"] = *a.feature_ref;
        ja["label"] = a.label;
        j["arguments"].push_back(std::move(ja));
    }
    j["attacks"] = nlohmann::ordered_json::array();
    for (const auto& [src, tgt] : baf.attacks()) {
        j["attacks"].push_back({src, tgt});
    }
    j["supports"] = nlohmann::ordered_json::array();
    for (const auto& [src, tgt] : baf.supports()) {
        j["supports"].push_back({src, tgt});
    }
    return j;
}

Baf baf_from_json(const nlohmann::json& j) {
    std::vector<Argument> args;
    for (const auto& ja : j.at("arguments")) {
        Argument a;
        a.id = ja.at("id").get<std::string>();
        a.kind = ja.at("kind").get<std::string>() == "explanandum"
                     ? ArgKind::Explanandum
                     : ArgKind::Feature;
        if (ja.contains("class_index")) a.class_index = ja["class_index"].get<int>();
        if (ja.contains("feature_ref")) a.feature_ref = ja["feature_ref"].get<int>();
        if (ja.contains("label")) a.label = ja["label"].get<std::string>();
        args.push_back(std::move(a));
    }
    auto pairs = [](const nlohmann::json& arr) {
        std::vector<RelationPair> out;
        for (const auto& p : arr) {
            out.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
        }
        return out;
    };
    return Baf(std::move(args), pairs(j.at("attacks")), pairs(j.at("supports")));
}

std::string to_dot(const Baf& baf, const std::string& graph_name) {
    std::ostringstream os;
    os << "digraph " << graph_name << " {\n";
    for (const auto& [id, a] : baf.arguments()) {
        os << "  \"" << id << "\" [label=\""
           << (a.label.empty() ? id : a.label) << "\"";
        if (a.kind == ArgKind::Explanandum) os << ", shape=doubleoctagon";
        os << "];\n";
    }
    for (const auto& [src, tgt] : baf.attacks()) {
        os << "  \"" << src << "\" -> \"" << tgt
           << "\" [color=red, label=\"-\"];\n";
    }
    for (const auto& [src, tgt] : baf.supports()) {
        os << "  \"" << src << "\" -> \"" << tgt
           << "\" [color=green, label=\"+\"];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace fax
