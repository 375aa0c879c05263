#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fax/agents.hpp"

using namespace fax;
using doctest::Approx;

namespace {

Argument arg(const std::string& id) {
    Argument a;
    a.id = id;
    return a;
}

PrivateTriple triple(int index, Baf baf, double tau) {
    PrivateTriple t;
    t.agent_index = index;
    t.range = EvaluationRange(0.0, 1.0, tau);
    t.private_baf = std::move(baf);
    t.evaluator = weighted_evaluator();
    return t;
}

}  // namespace

TEST_CASE("weighted_evaluator matches evaluate_weighted") {
    Baf b({arg("a"), arg("b"), arg("c")}, {{"b", "a"}}, {{"c", "a"}});
    Evaluator ev = weighted_evaluator();
    StrengthAssignment s = evaluate_weighted(b);
    CHECK(ev(b, "a") == Approx(s.at("a")));
    CHECK(ev(b, "b") == Approx(s.at("b")));
}

TEST_CASE("agent_stance applies the agent's own range") {
    Baf sup({arg("a"), arg("b")}, {}, {{"b", "a"}});  // sigma(a) = 0.625
    CHECK(agent_stance(triple(1, sup, 0.6), "a").sign == StanceSign::Positive);
    CHECK(agent_stance(triple(1, sup, 0.7), "a").sign == StanceSign::Negative);
}

TEST_CASE("in_conflict needs two differing stances") {
    Baf sup({arg("a"), arg("b")}, {}, {{"b", "a"}});   // 0.625
    Baf att({arg("a"), arg("c")}, {{"c", "a"}}, {});   // 0.375
    PrivateTriple hi = triple(1, sup, 0.5);
    PrivateTriple lo = triple(2, att, 0.5);
    CHECK(in_conflict({hi, lo}, "a"));
    CHECK_FALSE(in_conflict({hi, hi}, "a"));
    CHECK_THROWS_AS(in_conflict({lo}, "a"), ArityError);
    CHECK(in_conflict({hi, hi, lo}, "a"));
}

TEST_CASE("conflict_threshold splits any unequal pair") {
    auto tau = conflict_threshold(0.3, 0.8);
    REQUIRE(tau.has_value());
    CHECK(*tau > 0.3);
    CHECK(*tau <= 0.8);
    // exactly one side lands positive
    EvaluationRange r(0.0, 1.0, *tau);
    CHECK(stance_of(r, 0.3) != stance_of(r, 0.8));
}

TEST_CASE("conflict_threshold on ties yields nothing") {
    CHECK_FALSE(conflict_threshold(0.4, 0.4).has_value());
    CHECK_FALSE(conflict_threshold(0.0, 0.0).has_value());
    CHECK_FALSE(conflict_threshold(1.0, 1.0).has_value());
}

TEST_CASE("corollary realized constructively over random pairs") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        double v1 = unit(rng), v2 = unit(rng);
        if (v1 == v2) continue;
        auto tau = conflict_threshold(v1, v2);
        REQUIRE(tau.has_value());
        EvaluationRange r(0.0, 1.0, *tau);
        CHECK(stance_of(r, v1) != stance_of(r, v2));
        ++checked;
    }
    CHECK(checked > 990);
}

TEST_CASE("adjacent values still split") {
    double v1 = 0.5;
    double v2 = std::nextafter(v1, 1.0);
    auto tau = conflict_threshold(v1, v2);
    REQUIRE(tau.has_value());
    EvaluationRange r(0.0, 1.0, *tau);
    CHECK(stance_of(r, v1) == StanceSign::Negative);
    CHECK(stance_of(r, v2) == StanceSign::Positive);
}

TEST_CASE("adding a supporter never flips a positive stance negative... "
          "under the dialectically monotonic evaluator") {
    std::mt19937_64 rng(11);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Argument> args{arg("e")};
        std::vector<RelationPair> attacks, supports;
        for (int i = 0; i < 4; ++i) {
            std::string id = "x" + std::to_string(i);
            args.push_back(arg(id));
            (coin(rng) ? attacks : supports).push_back({id, "e"});
        }
        PrivateTriple agent = triple(1, Baf(args, attacks, supports), 0.5);
        if (agent_stance(agent, "e").sign != StanceSign::Positive) continue;
        Baf grown = agent.private_baf.with_argument(arg("fresh"))
                        .with_relation({"fresh", "e"}, Polarity::Support);
        CHECK(agent_stance(agent.with_baf(grown), "e").sign ==
              StanceSign::Positive);
    }
}
