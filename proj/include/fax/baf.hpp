#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fax/errors.hpp"

namespace fax {

enum class ArgKind { Explanandum, Feature };

enum class Polarity { Attack, Support };

// An argument node. Identity is by id only; label, class_index and
// feature_ref are metadata and take no part in equality.
struct Argument {
    std::string id;
    ArgKind kind = ArgKind::Feature;
    std::optional<int> class_index;
    std::optional<int> feature_ref;
    std::string label;

    friend bool operator==(const Argument& a, const Argument& b) {
        return a.id == b.id;
    }
    friend auto operator<=>(const Argument& a, const Argument& b) {
        return a.id <=> b.id;
    }
};

using RelationPair = std::pair<std::string, std::string>;

struct Relation {
    std::string source;
    std::string target;
    Polarity polarity = Polarity::Support;
};

// Componentwise difference of two BAFs. A delta may legally reference
// endpoints that are absent from the delta itself, so it is a distinct
// type from Baf and carries no closure invariant.
struct BafDelta {
    std::vector<Argument> arguments;
    std::set<RelationPair> attacks;
    std::set<RelationPair> supports;

    bool empty() const {
        return arguments.empty() && attacks.empty() && supports.empty();
    }
};

// Immutable bipolar argumentation framework <X, A, S> with A and S
// disjoint and every relation endpoint present in X. Growth is modeled
// by producing new values (with_argument / with_relation).
class Baf {
public:
    Baf() = default;
    Baf(std::vector<Argument> arguments,
        std::vector<RelationPair> attacks,
        std::vector<RelationPair> supports);

    bool has_argument(const std::string& id) const {
        return args_.contains(id);
    }
    const Argument& argument(const std::string& id) const;

    const std::map<std::string, Argument>& arguments() const { return args_; }
    const std::set<RelationPair>& attacks() const { return attacks_; }
    const std::set<RelationPair>& supports() const { return supports_; }

    std::set<std::string> attackers(const std::string& id) const;
    std::set<std::string> supporters(const std::string& id) const;

    // New value with one more argument; adding an id that already
    // exists returns the same framework unchanged.
    Baf with_argument(const Argument& a) const;

    // New value with one more relation; both endpoints must exist and
    // the pair must not yet be related under either polarity.
    Baf with_relation(const RelationPair& pair, Polarity polarity) const;

    friend bool operator==(const Baf& a, const Baf& b) {
        return a.args_ == b.args_ && a.attacks_ == b.attacks_ &&
               a.supports_ == b.supports_;
    }

private:
    void check_invariants() const;

    std::map<std::string, Argument> args_;
    std::set<RelationPair> attacks_;
    std::set<RelationPair> supports_;
};

// B <= B' componentwise (the paper's ⊑).
bool sub_baf_leq(const Baf& b, const Baf& b2);

// Componentwise set difference b2 \ b.
BafDelta baf_difference(const Baf& b2, const Baf& b);

// Applies a delta on top of a base framework (inverse of baf_difference
// whenever base ⊑ result).
Baf apply_delta(const Baf& base, const BafDelta& delta);

struct Path {
    std::vector<RelationPair> edges;

    std::size_t length() const { return edges.size(); }
    std::set<RelationPair> as_pair_set() const {
        return {edges.begin(), edges.end()};
    }
    friend bool operator==(const Path&, const Path&) = default;
};

// All simple paths from a to b through attacks ∪ supports. a == b yields
// simple cycles through a (empty on any framework valid for an
// explanandum).
std::vector<Path> paths(const Baf& baf, const std::string& a,
                        const std::string& b);

struct ValidationIssue {
    // 1: explanandum has an outgoing relation; 2: some argument has no
    // path to the explanandum; 3: the graph has a cycle.
    int condition = 0;
    std::string witness;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }
    bool violates(int condition) const;
};

// Checks that baf is a BAF for explanandum e: no outgoing relation from
// e, every other argument reaches e, and the graph is acyclic.
ValidationReport validate_for_explanandum(const Baf& baf,
                                          const std::string& e);

nlohmann::ordered_json to_json(const Baf& baf);
Baf baf_from_json(const nlohmann::json& j);

// DOT rendering: attacks as red "-" edges, supports as green "+" edges.
std::string to_dot(const Baf& baf, const std::string& graph_name = "baf");

}  // namespace fax
