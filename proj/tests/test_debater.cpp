#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fax/debater.hpp"
#include "fax/pipeline.hpp"

using namespace fax;
using doctest::Approx;

namespace {

AgentNet random_net(int dim, int hidden, int n_rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return AgentNet::init(dim, hidden, n_rows, rng);
}

double scalar_of_h(const Eigen::VectorXd& v, const Eigen::VectorXd& h) {
    return v.dot(h);
}

}  // namespace

TEST_CASE("gru backward matches central differences") {
    const int n = 5;
    std::mt19937_64 rng(41);
    std::normal_distribution<double> dist(0.0, 0.4);
    AgentNet net = random_net(n, n, 3, 41);
    Eigen::VectorXd h0 = Eigen::VectorXd::NullaryExpr(n, [&]() { return dist(rng); });
    Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(n, [&]() { return dist(rng); });
    Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(n, [&]() { return dist(rng); });

    GruCache cache = gru_forward(net.gru, h0, x);
    GruGrads g = gru_backward(net.gru, cache, v);

    const double h = 1e-6;
    auto fd = [&](double* param) {
        double orig = *param;
        *param = orig + h;
        double up = scalar_of_h(v, gru_forward(net.gru, h0, x).h);
        *param = orig - h;
        double dn = scalar_of_h(v, gru_forward(net.gru, h0, x).h);
        *param = orig;
        return (up - dn) / (2 * h);
    };

    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int probe = 0; probe < 60; ++probe) {
        int i = pick(rng), j = pick(rng);
        switch (probe % 6) {
            case 0: CHECK(g.Wz(i, j) == Approx(fd(&net.gru.Wz(i, j))).epsilon(1e-4)); break;
            case 1: CHECK(g.Uz(i, j) == Approx(fd(&net.gru.Uz(i, j))).epsilon(1e-4)); break;
            case 2: CHECK(g.Wr(i, j) == Approx(fd(&net.gru.Wr(i, j))).epsilon(1e-4)); break;
            case 3: CHECK(g.Wh(i, j) == Approx(fd(&net.gru.Wh(i, j))).epsilon(1e-4)); break;
            case 4: CHECK(g.bh(i) == Approx(fd(&net.gru.bh(i))).epsilon(1e-4)); break;
            case 5: CHECK(g.bz(i) == Approx(fd(&net.gru.bz(i))).epsilon(1e-4)); break;
        }
    }

    // input and previous-state gradients
    for (int probe = 0; probe < 10; ++probe) {
        int i = pick(rng);
        double orig = x(i);
        x(i) = orig + h;
        double up = scalar_of_h(v, gru_forward(net.gru, h0, x).h);
        x(i) = orig - h;
        double dn = scalar_of_h(v, gru_forward(net.gru, h0, x).h);
        x(i) = orig;
        CHECK(g.dx(i) == Approx((up - dn) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("modulator and head are the documented maps") {
    AgentNet net = random_net(3, 4, 2, 5);
    Eigen::VectorXd pooled(3);
    pooled << 0.2, -0.1, 0.4;
    ModulatorCache mod = modulator_forward(net, pooled);
    Eigen::VectorXd expect = (net.Wm * pooled + net.bm).array().tanh();
    CHECK(mod.m.isApprox(expect, 1e-12));

    Eigen::VectorXd h(4);
    h << 0.1, 0.2, -0.3, 0.0;
    double conf = head_confidence(net, h);
    double pre = (net.wq * h)(0) + net.bq;
    CHECK(conf == Approx(1.0 / (1.0 + std::exp(-pre))));

    CHECK(hidden_update(net, Eigen::VectorXd::Zero(4), pooled)
              .isApprox(gru_forward(net.gru, Eigen::VectorXd::Zero(4), mod.m).h,
                        1e-12));
}

TEST_CASE("stance loss is binary cross entropy toward the own class") {
    CHECK(stance_loss(0.5) == Approx(std::log(2.0)));
    CHECK(stance_loss(1.0) == Approx(0.0));
    CHECK(stance_loss(0.25) > stance_loss(0.75));
    CHECK(total_loss({1.0, 0.25, 0.5}) == Approx(1.75));
}

TEST_CASE("fax loss: hand-computed REINFORCE objective") {
    RewardTrace trace;
    trace.steps.push_back({0.8, 0.5, -0.7});    // acted
    trace.steps.push_back({0.6, 0.65, std::nullopt});  // opponent's turn
    trace.steps.push_back({0.9, 0.7, -1.2});    // acted
    // -sum log_prob * (r - b) = 0.7*0.3 + 1.2*0.2 = 0.45
    CHECK(fax_loss(trace) == Approx(0.45));
    CHECK(fax_loss(RewardTrace{}) == Approx(0.0));
}

TEST_CASE("argument selection masks to the candidate set") {
    AgentNet net = random_net(3, 4, 6, 13);
    Eigen::VectorXd h = Eigen::VectorXd::Constant(4, 0.1);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        SelectedArgument a =
            select_argument(net, h, {1, 4}, SelectMode::Sample, rng);
        CHECK((a.row == 1 || a.row == 4));
        CHECK(a.log_prob <= 0.0);
    }
    CHECK_THROWS_AS(select_argument(net, h, {}, SelectMode::Sample, rng),
                    ProtocolError);
}

TEST_CASE("a forced move has log-probability zero") {
    AgentNet net = random_net(3, 4, 6, 13);
    Eigen::VectorXd h = Eigen::VectorXd::Constant(4, -0.2);
    std::mt19937_64 rng(3);
    SelectedArgument a = select_argument(net, h, {2}, SelectMode::Argmax, rng);
    CHECK(a.row == 2);
    CHECK(a.log_prob == Approx(0.0));
}

TEST_CASE("argmax selection picks the highest policy logit") {
    AgentNet net = random_net(3, 4, 6, 17);
    Eigen::VectorXd h(4);
    h << 0.3, -0.2, 0.5, 0.1;
    std::mt19937_64 rng(3);
    Eigen::VectorXd logits = net.Wp * h + net.bp;
    std::vector<int> cands{0, 2, 5};
    int best = cands[0];
    for (int r : cands) {
        if (logits(r) > logits(best)) best = r;
    }
    SelectedArgument a = select_argument(net, h, cands, SelectMode::Argmax, rng);
    CHECK(a.row == best);
}

TEST_CASE("policy log-probability gradient matches central differences") {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> dist(0.0, 0.4);
    const double step = 1e-6;
    std::mt19937_64 dummy(1);
    for (int probe = 0; probe < 60; ++probe) {
        AgentNet net = random_net(3, 4, 5, 100 + static_cast<std::uint64_t>(probe));
        Eigen::VectorXd h =
            Eigen::VectorXd::NullaryExpr(4, [&]() { return dist(rng); });
        std::vector<int> cands{0, 1, 3};
        SelectedArgument chosen =
            select_argument(net, h, cands, SelectMode::Argmax, dummy);

        // analytic: d log p(chosen) / d Wp(r, j) = (1{r=chosen} - p_r) h_j
        Eigen::VectorXd logits = net.Wp * h + net.bp;
        double mx = std::max({logits(0), logits(1), logits(3)});
        double z = 0.0;
        std::map<int, double> p;
        for (int r : cands) {
            p[r] = std::exp(logits(r) - mx);
            z += p[r];
        }
        for (auto& [r, v] : p) v /= z;

        std::uniform_int_distribution<int> pr(0, 2), pc(0, 3);
        int r = cands[static_cast<std::size_t>(pr(rng))];
        int j = pc(rng);
        double analytic = ((r == chosen.row ? 1.0 : 0.0) - p[r]) * h(j);

        double orig = net.Wp(r, j);
        net.Wp(r, j) = orig + step;
        double up = select_argument(net, h, cands, SelectMode::Argmax, dummy)
                        .log_prob;
        net.Wp(r, j) = orig - step;
        double dn = select_argument(net, h, cands, SelectMode::Argmax, dummy)
                        .log_prob;
        net.Wp(r, j) = orig;
        CHECK(analytic == Approx((up - dn) / (2 * step)).epsilon(1e-4));
    }
}

TEST_CASE("termination check is mean cosine dissimilarity below eps") {
    Eigen::VectorXd a(2), b(2), zero(2);
    a << 1.0, 0.0;
    b << 0.0, 1.0;
    zero << 0.0, 0.0;
    CHECK_FALSE(termination_check({}, a, 0.5));       // nothing yet
    CHECK(termination_check({a}, a, 0.05));           // repeat: dissim 0
    CHECK_FALSE(termination_check({a}, b, 0.5));      // orthogonal: 1
    CHECK_FALSE(termination_check({zero}, a, 0.5));   // zero-norm counts as 1
    CHECK_FALSE(termination_check({a}, zero, 0.5));
    // mean over both: (0 + 1) / 2 = 0.5, not below 0.6? It is below.
    CHECK(termination_check({a, b}, a, 0.6));
    CHECK_FALSE(termination_check({a, b}, a, 0.5));
}

TEST_CASE("image agent: assignment seeds the private BAF by role") {
    Eigen::MatrixXd book(4, 3);
    book << 0.0, 0.0, 0.0,
            1.0, 0.0, 0.0,
            0.0, 1.0, 0.0,
            0.0, 0.0, 1.0;
    AgentNet net = random_net(3, 4, 4, 19);
    ImageAgent pro = build_image_agent(1, 2, "e", {1, 1, 3}, book, net, 0.5);
    CHECK(pro.proponent());
    CHECK(pro.own_args.size() == 2);  // distinct rows 1 and 3
    CHECK(pro.private_baf.supporters("e").size() == 2);
    CHECK(pro.private_baf.attackers("e").empty());
    CHECK(pro.feature_counts->at(feature_arg_id(2, 1)) == 2);
    CHECK(pro.feature_counts->at(feature_arg_id(2, 3)) == 1);

    ImageAgent opp = build_image_agent(2, 0, "e", {0, 2}, book, net, 0.5);
    CHECK_FALSE(opp.proponent());
    CHECK(opp.private_baf.attackers("e").size() == 2);
    CHECK(opp.private_baf.supporters("e").empty());

    // sigma of the explanandum is the private classifier on the own pool
    std::vector<Eigen::VectorXd> feats;
    for (const auto& id : pro.own_args) feats.push_back(pro.features->at(id));
    // q_of_set pools with multiplicity, so feed the multiset
    std::vector<Eigen::VectorXd> multiset{book.row(1).transpose(),
                                          book.row(1).transpose(),
                                          book.row(3).transpose()};
    CHECK(pro.sigma_current("e") == Approx(pro.q_of_set(multiset)));
}

TEST_CASE("relation learning follows the marginal sign") {
    Eigen::MatrixXd book(3, 3);
    book << 0.2, 0.0, 0.1,
            0.9, 0.8, 0.7,
            0.0, 0.4, 0.3;
    AgentNet net = random_net(3, 4, 3, 23);
    ImageAgent agent = build_image_agent(1, 0, "e", {0, 2}, book, net, 0.5);
    double before = agent.sigma_current("e");

    Eigen::VectorXd incoming(3);
    incoming << 0.5, 0.5, 0.5;
    RelationJudgement j = classify_relation(agent, "new", incoming, "e");
    std::vector<Eigen::VectorXd> with{book.row(0).transpose(),
                                      book.row(2).transpose(), incoming};
    double after = agent.q_of_set(with);
    CHECK(j.new_sigma_e == Approx(after));
    CHECK(j.strength == Approx(std::abs(after - before)));
    CHECK((j.polarity == Polarity::Support) == (after - before >= 0.0));

    // multiplicity: count 2 pools the feature twice
    RelationJudgement j2 = classify_relation(agent, "new", incoming, "e", 2);
    std::vector<Eigen::VectorXd> with2 = with;
    with2.push_back(incoming);
    CHECK(j2.new_sigma_e == Approx(agent.q_of_set(with2)));

    CHECK_THROWS_AS(classify_relation(agent, "new", incoming, "e", 0),
                    ParameterError);
}

TEST_CASE("reward is the initial stance sign times sigma") {
    Eigen::MatrixXd book(2, 3);
    book << 0.1, 0.2, 0.3,
            0.7, 0.8, 0.9;
    AgentNet net = random_net(3, 4, 2, 29);
    ImageAgent pro = build_image_agent(1, 0, "e", {0}, book, net, 0.5);
    ImageAgent opp = build_image_agent(2, 1, "e", {1}, book, net, 0.5);
    CHECK(reward(pro, "e") == Approx(pro.sigma_current("e")));
    CHECK(reward(opp, "e") == Approx(-opp.sigma_current("e")));
}

TEST_CASE("greedy baseline picks the largest marginal effect") {
    Eigen::MatrixXd book(3, 3);
    book << 0.1, 0.1, 0.1,
            0.9, 0.9, 0.9,
            0.5, 0.2, 0.8;
    AgentNet net = random_net(3, 4, 3, 31);
    ImageAgent agent = build_image_agent(1, 0, "e", {0, 1, 2}, book, net, 0.5);
    std::vector<Eigen::VectorXd> exchanged{book.row(0).transpose()};
    int row = greedy_select(agent, {0, 1, 2}, exchanged);
    double base = agent.q_of_set(exchanged);
    double best = -1.0;
    int expect = 0;
    for (int r = 0; r < 3; ++r) {
        auto with = exchanged;
        with.push_back(book.row(r).transpose());
        double gain = std::abs(agent.q_of_set(with) - base);
        if (gain > best) {
            best = gain;
            expect = r;
        }
    }
    CHECK(row == expect);
}

TEST_CASE("end-to-end debates respect the protocol") {
    SynthConfig cfg;
    cfg.n_samples = 60;
    cfg.seed = 12;
    auto data = generate_dataset(cfg);
    PipelineHyper hyper;
    hyper.quantize.epochs = 6;
    hyper.agents.epochs = 1;
    hyper.agents.calib_epochs = 10;
    Artifact art = train_pipeline(data, TeacherSetting::Fair, 12, hyper);

    DebateConfig dc;
    dc.seed = 99;
    for (int i = 0; i < 10; ++i) {
        DebateOutcome out = run_debate(data[static_cast<std::size_t>(i)],
                                       art.teacher, art.codebooks, art.nets,
                                       dc);
        const DebateTranscript& t = out.transcript;
        REQUIRE(t.proponent_class.has_value());
        REQUIRE(t.opponent_class.has_value());
        CHECK(*t.proponent_class != *t.opponent_class);
        CHECK(*t.proponent_class == *t.teacher_prediction);
        // strict interleaving: odd steps by agent 1, even by agent 2
        for (std::size_t k = 0; k < t.steps.size(); ++k) {
            CHECK(t.steps[k].t == static_cast<int>(k) + 1);
            CHECK(t.steps[k].contributor == (t.steps[k].t % 2 == 1 ? 1 : 2));
        }
        CHECK(t.steps.size() % 2 == 0);  // equal opportunity
        if (out.final_state) {
            CHECK(check_strict_interleaving(*out.final_state).interleaved);
            // mapping injectivity: one entry per exchanged pair
            const auto& baf = out.final_state->current_baf();
            CHECK(out.final_state->mapping.size() ==
                  baf.attacks().size() + baf.supports().size());
        }
        // per-agent traces cover every step
        CHECK(out.traces[0].steps.size() == t.steps.size());
        CHECK(out.traces[1].steps.size() == t.steps.size());
    }
}

TEST_CASE("debates are deterministic given the seed") {
    SynthConfig cfg;
    cfg.n_samples = 40;
    cfg.seed = 14;
    auto data = generate_dataset(cfg);
    PipelineHyper hyper;
    hyper.quantize.epochs = 4;
    hyper.agents.epochs = 0;
    hyper.agents.calib_epochs = 5;
    Artifact art = train_pipeline(data, TeacherSetting::Fair, 14, hyper);
    DebateConfig dc;
    dc.seed = 7;
    dc.mode = SelectMode::Sample;
    auto t1 = run_debate(data[0], art.teacher, art.codebooks, art.nets, dc)
                  .transcript;
    auto t2 = run_debate(data[0], art.teacher, art.codebooks, art.nets, dc)
                  .transcript;
    CHECK(to_json(t1).dump() == to_json(t2).dump());
}

TEST_CASE("agent training runs and reports finite losses") {
    SynthConfig cfg;
    cfg.n_samples = 40;
    cfg.seed = 15;
    auto data = generate_dataset(cfg);
    PipelineHyper hyper;
    Teacher teacher = train_teacher(data, 4, TeacherSetting::Fair,
                                    hyper.teacher);
    std::vector<TrainSample> samples;
    for (const auto& img : data) {
        TrainSample s;
        s.latents = teacher.extract(img.pixels);
        s.teacher_class = teacher.predict_latents(s.latents);
        samples.push_back(std::move(s));
    }
    QuantizeHyper qh;
    qh.epochs = 4;
    QuantizeResult qr = train_quantization(samples, 4, qh);

    AgentTrainHyper ah;
    ah.epochs = 2;
    ah.calib_epochs = 5;
    DebateConfig dc;
    AgentTrainResult r =
        train_agents(data, teacher, qr.codebooks, qr.classifier, ah, dc);
    CHECK(r.nets.size() == 4);
    REQUIRE(r.epoch_loss.size() == 2);
    for (double l : r.epoch_loss) CHECK(std::isfinite(l));
}

TEST_CASE("agent net json round-trip") {
    AgentNet net = random_net(3, 4, 5, 37);
    AgentNet back = agent_net_from_json(to_json(net));
    CHECK(back.Wm.isApprox(net.Wm));
    CHECK(back.bm.isApprox(net.bm));
    CHECK(back.Wp.isApprox(net.Wp));
    CHECK(back.bp.isApprox(net.bp));
    CHECK(back.wq.isApprox(net.wq));
    CHECK(back.bq == Approx(net.bq));
    CHECK(back.gru.Wz.isApprox(net.gru.Wz));
    CHECK(back.gru.Uh.isApprox(net.gru.Uh));
    CHECK(back.gru.br.isApprox(net.gru.br));
}
