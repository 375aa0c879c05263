#include "fax/debater.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include "fax/rng.hpp"

namespace fax {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& v) {
    return v.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

double sigmoid1(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd random_matrix(int rows, int cols, double scale,
                              std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    return Eigen::MatrixXd::NullaryExpr(rows, cols,
                                        [&]() { return gauss(rng) * scale; });
}

}  // namespace

GruCache gru_forward(const GruParams& p, const Eigen::VectorXd& h_prev,
                     const Eigen::VectorXd& x) {
    GruCache c;
    c.x = x;
    c.h_prev = h_prev;
    c.z = sigmoid(p.Wz * x + p.Uz * h_prev + p.bz);
    c.r = sigmoid(p.Wr * x + p.Ur * h_prev + p.br);
    c.hh = (p.Wh * x + p.Uh * (c.r.cwiseProduct(h_prev)) + p.bh)
               .array()
               .tanh();
    c.h = (Eigen::VectorXd::Ones(c.z.size()) - c.z).cwiseProduct(h_prev) +
          c.z.cwiseProduct(c.hh);
    return c;
}

GruGrads gru_backward(const GruParams& p, const GruCache& c,
                      const Eigen::VectorXd& dh) {
    GruGrads g;
    Eigen::VectorXd dz = dh.cwiseProduct(c.hh - c.h_prev);
    Eigen::VectorXd dhh = dh.cwiseProduct(c.z);
    Eigen::VectorXd dh_prev =
        dh.cwiseProduct(Eigen::VectorXd::Ones(c.z.size()) - c.z);

    Eigen::VectorXd dah =
        dhh.cwiseProduct(Eigen::VectorXd::Ones(c.hh.size()) -
                         c.hh.cwiseProduct(c.hh));
    g.Wh = dah * c.x.transpose();
    g.Uh = dah * c.r.cwiseProduct(c.h_prev).transpose();
    g.bh = dah;

    Eigen::VectorXd dr_gate = (p.Uh.transpose() * dah).cwiseProduct(c.h_prev);
    dh_prev += (p.Uh.transpose() * dah).cwiseProduct(c.r);

    Eigen::VectorXd daz = dz.cwiseProduct(c.z).cwiseProduct(
        Eigen::VectorXd::Ones(c.z.size()) - c.z);
    Eigen::VectorXd dar = dr_gate.cwiseProduct(c.r).cwiseProduct(
        Eigen::VectorXd::Ones(c.r.size()) - c.r);

    g.Wz = daz * c.x.transpose();
    g.Uz = daz * c.h_prev.transpose();
    g.bz = daz;
    g.Wr = dar * c.x.transpose();
    g.Ur = dar * c.h_prev.transpose();
    g.br = dar;

    g.dx = p.Wz.transpose() * daz + p.Wr.transpose() * dar +
           p.Wh.transpose() * dah;
    g.dh_prev = dh_prev + p.Uz.transpose() * daz + p.Ur.transpose() * dar;
    return g;
}

AgentNet AgentNet::init(int dim, int hidden, int n_rows,
                        std::mt19937_64& rng) {
    AgentNet net;
    const double s = 0.2;
    net.Wm = random_matrix(hidden, dim, s, rng);
    net.bm = Eigen::VectorXd::Zero(hidden);
    net.gru.Wz = random_matrix(hidden, hidden, s, rng);
    net.gru.Uz = random_matrix(hidden, hidden, s, rng);
    net.gru.bz = Eigen::VectorXd::Zero(hidden);
    net.gru.Wr = random_matrix(hidden, hidden, s, rng);
    net.gru.Ur = random_matrix(hidden, hidden, s, rng);
    net.gru.br = Eigen::VectorXd::Zero(hidden);
    net.gru.Wh = random_matrix(hidden, hidden, s, rng);
    net.gru.Uh = random_matrix(hidden, hidden, s, rng);
    net.gru.bh = Eigen::VectorXd::Zero(hidden);
    net.Wp = random_matrix(n_rows, hidden, s, rng);
    net.bp = Eigen::VectorXd::Zero(n_rows);
    net.wq = random_matrix(1, hidden, s, rng).row(0);
    net.bq = 0.0;
    return net;
}

ModulatorCache modulator_forward(const AgentNet& net,
                                 const Eigen::VectorXd& pooled) {
    ModulatorCache c;
    c.pooled = pooled;
    c.m = (net.Wm * pooled + net.bm).array().tanh();
    return c;
}

Eigen::VectorXd hidden_update(const AgentNet& net, const Eigen::VectorXd& h,
                              const Eigen::VectorXd& pooled_args) {
    return gru_forward(net.gru, h, modulator_forward(net, pooled_args).m).h;
}

double head_confidence(const AgentNet& net, const Eigen::VectorXd& h) {
    return sigmoid1(net.wq.dot(h) + net.bq);
}

namespace {

// Own-class confidence of a feature set through the shared network path:
// head(GRU(0, modulator(mean(features)))). An empty set pools to zero.
double set_confidence(const AgentNet& net,
                      const std::vector<Eigen::VectorXd>& feats) {
    Eigen::VectorXd pooled =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.Wm.cols()));
    for (const auto& f : feats) pooled += f;
    if (!feats.empty()) pooled /= static_cast<double>(feats.size());
    Eigen::VectorXd h0 = Eigen::VectorXd::Zero(net.hidden_dim());
    return head_confidence(net, hidden_update(net, h0, pooled));
}

std::vector<Eigen::VectorXd> relation_set_features(
    const Baf& baf, const std::string& e,
    const std::map<std::string, Eigen::VectorXd>& features,
    const std::map<std::string, int>* counts = nullptr) {
    std::vector<Eigen::VectorXd> feats;
    std::set<std::string> related = baf.attackers(e);
    related.merge(baf.supporters(e));
    for (const auto& id : related) {
        auto it = features.find(id);
        if (it == features.end()) {
            throw ArgumentNotFound("no feature vector for " + id);
        }
        int n = 1;
        if (counts != nullptr) {
            if (auto cit = counts->find(id); cit != counts->end()) {
                n = cit->second;
            }
        }
        for (int k = 0; k < n; ++k) feats.push_back(it->second);
    }
    return feats;
}

}  // namespace

double ImageAgent::q_of_set(const std::vector<Eigen::VectorXd>& feats) const {
    return set_confidence(*net, feats);
}

double ImageAgent::sigma_explanandum(const Baf& baf,
                                     const std::string& e) const {
    return q_of_set(
        relation_set_features(baf, e, *features, feature_counts.get()));
}

PrivateTriple ImageAgent::as_triple() const {
    PrivateTriple triple;
    triple.agent_index = agent_index;
    triple.range = range;
    triple.private_baf = private_baf;
    auto feats = features;
    auto strengths = feature_strengths;
    auto counts = feature_counts;
    const AgentNet* n = net;
    triple.evaluator = [feats, strengths, counts, n](const Baf& baf,
                                                     const std::string& id) {
        if (baf.argument(id).kind == ArgKind::Explanandum) {
            return set_confidence(
                *n, relation_set_features(baf, id, *feats, counts.get()));
        }
        if (auto it = strengths->find(id); it != strengths->end()) {
            return it->second;  // frozen at learn time
        }
        // Own initial argument: private classifier on the singleton.
        auto fit = feats->find(id);
        if (fit == feats->end()) {
            throw ArgumentNotFound("no feature vector for " + id);
        }
        return set_confidence(*n, {fit->second});
    };
    return triple;
}

std::string feature_arg_id(int class_index, int row) {
    return "c" + std::to_string(class_index) + "_r" + std::to_string(row);
}

ImageAgent build_image_agent(int agent_index, int class_index,
                             const std::string& explanandum_id,
                             const std::vector<int>& assigned_rows,
                             const Eigen::MatrixXd& book, const AgentNet& net,
                             double tau) {
    if (agent_index != 1 && agent_index != 2) {
        throw ParameterError("agent_index must be 1 or 2");
    }
    ImageAgent agent;
    agent.agent_index = agent_index;
    agent.class_index = class_index;
    agent.range = EvaluationRange(0.0, 1.0, tau);
    agent.net = &net;
    agent.features = std::make_shared<std::map<std::string, Eigen::VectorXd>>();
    agent.feature_strengths = std::make_shared<std::map<std::string, double>>();
    agent.feature_counts = std::make_shared<std::map<std::string, int>>();

    Argument e{explanandum_id, ArgKind::Explanandum, std::nullopt,
               std::nullopt, ""};
    std::vector<Argument> args{e};
    std::vector<RelationPair> attacks, supports;

    std::map<int, int> multiplicity;
    for (int row : assigned_rows) {
        if (row < 0 || row >= book.rows()) {
            throw RangeError("assigned row out of codebook range");
        }
        ++multiplicity[row];
    }
    for (const auto& [row, count] : multiplicity) {
        std::string id = feature_arg_id(class_index, row);
        args.push_back(Argument{id, ArgKind::Feature, class_index, row, ""});
        (agent.proponent() ? supports : attacks).push_back({id, explanandum_id});
        (*agent.features)[id] = book.row(row).transpose();
        (*agent.feature_counts)[id] = count;
        agent.own_args.push_back(id);
        agent.own_row[id] = row;
    }
    agent.private_baf = Baf(std::move(args), std::move(attacks),
                            std::move(supports));
    agent.hidden = Eigen::VectorXd::Zero(net.hidden_dim());
    return agent;
}

SelectedArgument select_argument(const AgentNet& net, const Eigen::VectorXd& h,
                                 const std::vector<int>& candidate_rows,
                                 SelectMode mode, std::mt19937_64& rng) {
    if (candidate_rows.empty()) {
        throw ProtocolError("no candidate arguments left to contribute");
    }
    Eigen::VectorXd logits = net.Wp * h + net.bp;
    double mx = -std::numeric_limits<double>::infinity();
    for (int r : candidate_rows) mx = std::max(mx, logits(r));
    double z = 0.0;
    std::vector<double> probs(candidate_rows.size());
    for (std::size_t i = 0; i < candidate_rows.size(); ++i) {
        probs[i] = std::exp(logits(candidate_rows[i]) - mx);
        z += probs[i];
    }
    for (double& p : probs) p /= z;

    std::size_t pick = 0;
    if (mode == SelectMode::Sample) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double u = unif(rng), acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u <= acc) { pick = i; break; }
            pick = i;
        }
    } else {
        for (std::size_t i = 1; i < probs.size(); ++i) {
            if (probs[i] > probs[pick]) pick = i;  // ties keep the lowest row
        }
    }
    return SelectedArgument{candidate_rows[pick], std::log(probs[pick])};
}

int greedy_select(const ImageAgent& agent,
                  const std::vector<int>& candidate_rows,
                  const std::vector<Eigen::VectorXd>& exchanged_features) {
    if (candidate_rows.empty()) {
        throw ProtocolError("no candidate arguments left to contribute");
    }
    double base = agent.q_of_set(exchanged_features);
    int best = candidate_rows.front();
    double best_gain = -1.0;
    for (int row : candidate_rows) {
        auto it = agent.features->find(
            feature_arg_id(agent.class_index, row));
        if (it == agent.features->end()) {
            throw ArgumentNotFound("candidate row has no feature vector");
        }
        std::vector<Eigen::VectorXd> with = exchanged_features;
        with.push_back(it->second);
        double gain = std::abs(agent.q_of_set(with) - base);
        if (gain > best_gain) {  // ties keep the lowest row
            best_gain = gain;
            best = row;
        }
    }
    return best;
}

RelationJudgement classify_relation(const ImageAgent& agent,
                                    const std::string& arg_id,
                                    const Eigen::VectorXd& feature,
                                    const std::string& explanandum_id,
                                    int count) {
    const Baf& baf = agent.private_baf;
    if (baf.attackers(explanandum_id).contains(arg_id) ||
        baf.supporters(explanandum_id).contains(arg_id)) {
        throw ProtocolError("argument already learned: " + arg_id);
    }
    if (count < 1) throw ParameterError("argument multiplicity must be >= 1");
    auto feats = relation_set_features(baf, explanandum_id, *agent.features,
                                       agent.feature_counts.get());
    double before = agent.q_of_set(feats);
    for (int k = 0; k < count; ++k) feats.push_back(feature);
    double after = agent.q_of_set(feats);
    RelationJudgement out;
    out.polarity = (after - before >= 0.0) ? Polarity::Support
                                           : Polarity::Attack;
    out.new_sigma_e = after;
    out.strength = std::abs(after - before);
    return out;
}

double reward(const ImageAgent& agent, const std::string& explanandum_id) {
    double s = agent.sigma_current(explanandum_id);
    return agent.proponent() ? s : -s;
}

double fax_loss(const RewardTrace& trace) {
    double loss = 0.0;
    for (const auto& s : trace.steps) {
        if (s.log_prob) loss -= *s.log_prob * (s.reward - s.baseline);
    }
    return loss;
}

double stance_loss(double own_class_confidence) {
    const double eps = 1e-12;
    return -std::log(std::max(own_class_confidence, eps));
}

double total_loss(const std::vector<double>& components) {
    return std::accumulate(components.begin(), components.end(), 0.0);
}

bool termination_check(const std::vector<Eigen::VectorXd>& previous,
                       const Eigen::VectorXd& next, double eps) {
    if (previous.empty()) return false;
    double total = 0.0;
    double nn = next.norm();
    for (const auto& prev : previous) {
        double pn = prev.norm();
        if (pn == 0.0 || nn == 0.0) {
            total += 1.0;
        } else {
            total += 1.0 - prev.dot(next) / (pn * nn);
        }
    }
    return total / static_cast<double>(previous.size()) < eps;
}

namespace {

Eigen::VectorXd pooled_private_features(const ImageAgent& agent) {
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(
        static_cast<Eigen::Index>(agent.net->Wm.cols()));
    int count = 0;
    for (const auto& [id, arg] : agent.private_baf.arguments()) {
        if (arg.kind != ArgKind::Feature) continue;
        int n = 1;
        if (auto it = agent.feature_counts->find(id);
            it != agent.feature_counts->end()) {
            n = it->second;
        }
        pooled += static_cast<double>(n) * agent.features->at(id);
        count += n;
    }
    if (count > 0) pooled /= static_cast<double>(count);
    return pooled;
}

AgentStepCache update_hidden_with_cache(ImageAgent& agent) {
    AgentStepCache cache;
    cache.mod = modulator_forward(*agent.net, pooled_private_features(agent));
    cache.gru = gru_forward(agent.net->gru, agent.hidden, cache.mod.m);
    agent.hidden = cache.gru.h;
    cache.head_conf = head_confidence(*agent.net, agent.hidden);
    return cache;
}

}  // namespace

DebateOutcome run_debate(const SynthImage& input, const Teacher& teacher,
                         const Codebooks& codebooks,
                         const std::vector<AgentNet>& nets,
                         const DebateConfig& config) {
    if (static_cast<int>(nets.size()) != codebooks.num_classes()) {
        throw ShapeError("one debating network per class is required");
    }
    auto rng = make_rng(config.seed, "debate");

    Eigen::MatrixXd z = teacher.extract(input.pixels);
    std::vector<int> order = teacher.ranking(z);
    const int y1 = order.at(0), y2 = order.at(1);
    const std::string e = "e";

    std::vector<int> rows1 = assign(codebooks.for_class(y1), z);
    std::vector<int> rows2 = assign(codebooks.for_class(y2), z);

    std::array<ImageAgent, 2> agents{
        build_image_agent(1, y1, e, rows1, codebooks.for_class(y1),
                          nets[static_cast<std::size_t>(y1)],
                          config.tau_default),
        build_image_agent(2, y2, e, rows2, codebooks.for_class(y2),
                          nets[static_cast<std::size_t>(y2)],
                          config.tau_default)};

    // Threshold from the agents' initial assessments; equal values fall
    // back to the default.
    double v1 = agents[0].sigma_current(e);
    double v2 = agents[1].sigma_current(e);
    double tau = conflict_threshold(v1, v2).value_or(config.tau_default);
    agents[0].range = EvaluationRange(0.0, 1.0, tau);
    agents[1].range = EvaluationRange(0.0, 1.0, tau);

    DebateOutcome out;
    out.class_of_agent = {y1, y2};
    out.transcript.explanandum = e;
    out.transcript.input_id = input.id;
    out.transcript.ground_truth = input.label;
    out.transcript.teacher_prediction = teacher.predict_latents(z);
    out.transcript.proponent_class = y1;
    out.transcript.opponent_class = y2;
    out.transcript.tau = tau;
    out.transcript.initial_pro_class =
        stance_of(agents[0].range, v1) == StanceSign::Positive ? y1 : y2;
    out.transcript.assigned_rows[y1] = rows1;
    out.transcript.assigned_rows[y2] = rows2;

    ExchangeState state =
        init_fax(e, {agents[0].as_triple(), agents[1].as_triple()});

    // Hidden state at t=0 encodes the initial private argument sets.
    std::array<double, 2> ema{0.0, 0.0};
    for (int i = 0; i < 2; ++i) {
        out.caches[i].push_back(update_hidden_with_cache(agents[i]));
    }

    std::vector<Eigen::VectorXd> contributed_features;
    ExchangeState prev_state = state;
    bool stop = false;
    std::optional<int> resolved_at;

    for (int t = 1; t <= config.max_steps && !stop; ++t) {
        ImageAgent& actor = agents[static_cast<std::size_t>((t + 1) % 2)];
        ImageAgent& receiver = agents[static_cast<std::size_t>(t % 2)];

        std::vector<int> candidates;
        for (const auto& id : actor.own_args) {
            if (!state.mapping.contains({id, e})) {
                candidates.push_back(actor.own_row.at(id));
            }
        }
        if (candidates.empty()) break;  // exhausted: nothing left to say

        AgentStepCache action_ctx;
        int row;
        double log_prob = 0.0;
        if (config.learned_policy) {
            auto picked = select_argument(*actor.net, actor.hidden, candidates,
                                          config.mode, rng);
            row = picked.row;
            log_prob = picked.log_prob;
        } else {
            row = greedy_select(actor, candidates, contributed_features);
        }
        const std::string arg_id = feature_arg_id(actor.class_index, row);
        const Eigen::VectorXd feature = actor.features->at(arg_id);
        Eigen::VectorXd policy_h = actor.hidden;
        AgentStepCache policy_src = out.caches[actor.agent_index - 1].back();

        Contribution contribution;
        contribution.pair = {arg_id, e};
        contribution.contributor = actor.agent_index;
        contribution.polarity = actor.private_baf.supporters(e).contains(arg_id)
                                    ? Polarity::Support
                                    : Polarity::Attack;

        int arg_count = 1;
        if (auto cit = actor.feature_counts->find(arg_id);
            cit != actor.feature_counts->end()) {
            arg_count = cit->second;
        }
        RelationJudgement judged =
            classify_relation(receiver, arg_id, feature, e, arg_count);
        // Write-once shared state so earlier snapshots replay identically.
        receiver.features->emplace(arg_id, feature);
        receiver.feature_strengths->emplace(arg_id, judged.strength);
        receiver.feature_counts->emplace(arg_id, arg_count);

        prev_state = state;
        state = step(state, contribution,
                     {{receiver.agent_index, judged.polarity}});
        for (int i = 0; i < 2; ++i) {
            agents[i].private_baf =
                state.current_agents()[static_cast<std::size_t>(i)].private_baf;
        }

        TranscriptStep ts;
        ts.t = t;
        ts.contributor = actor.agent_index;
        ts.pair = contribution.pair;
        ts.polarity_contributed = contribution.polarity;
        ts.interpretations[actor.agent_index] = contribution.polarity;
        ts.interpretations[receiver.agent_index] = judged.polarity;

        for (int i = 0; i < 2; ++i) {
            AgentStepCache cache = update_hidden_with_cache(agents[i]);
            if (agents[i].agent_index == actor.agent_index &&
                config.learned_policy) {
                cache.policy_h = policy_h;
                cache.policy_gru = policy_src.gru;
                cache.policy_mod = policy_src.mod;
                cache.candidate_rows = candidates;
                cache.chosen_row = row;
            }
            out.caches[i].push_back(std::move(cache));

            double sigma = agents[i].sigma_current(e);
            ts.strengths[agents[i].agent_index] = sigma;
            ts.stances[agents[i].agent_index] =
                stance_of(agents[i].range, sigma);

            RewardStep rs;
            rs.reward = reward(agents[i], e);
            rs.baseline = ema[i];
            ema[i] = config.baseline_decay * ema[i] +
                     (1.0 - config.baseline_decay) * rs.reward;
            if (agents[i].agent_index == actor.agent_index &&
                config.learned_policy) {
                rs.log_prob = log_prob;
            }
            out.traces[i].steps.push_back(rs);
        }
        out.transcript.steps.push_back(ts);

        if (ts.stances.at(1) == ts.stances.at(2)) {
            if (!resolved_at) resolved_at = t;
            stop = true;  // agreement reached, nothing left to settle
        }
        if (!stop && termination_check(contributed_features, feature,
                                       config.eps)) {
            stop = true;
        }
        contributed_features.push_back(feature);
    }

    // Equal opportunity: a debate ending on the proponent's move drops
    // that last step.
    if (out.transcript.steps.size() % 2 == 1) {
        out.transcript.steps.pop_back();
        for (int i = 0; i < 2; ++i) {
            out.traces[i].steps.pop_back();
            out.caches[i].pop_back();
            agents[i].private_baf =
                prev_state.current_agents()[static_cast<std::size_t>(i)]
                    .private_baf;
            agents[i].hidden = out.caches[i].back().gru.h;
        }
        state = prev_state;
        out.truncated_last_step = true;
        resolved_at.reset();
        for (const auto& s : out.transcript.steps) {
            if (s.stances.at(1) == s.stances.at(2)) {
                resolved_at = s.t;
                break;
            }
        }
    }

    out.transcript.resolved_at = resolved_at;
    out.transcript.lingua_franca = has_effective_lingua_franca(state);
    for (int i = 0; i < 2; ++i) {
        double sigma = agents[i].sigma_current(e);
        out.transcript.final_hidden_class[agents[i].agent_index] =
            stance_of(agents[i].range, sigma) == StanceSign::Positive ? y1 : y2;
    }
    // Union of the agents' final argument multisets: each argument once,
    // repeated by its assignment multiplicity (the debate's content as a
    // codebook-feature multiset).
    std::map<int, std::set<int>> union_rows;
    std::map<std::string, std::tuple<int, int, int>> union_args;  // cls,row,n
    for (const auto& agent : agents) {
        for (const auto& [id, arg] : agent.private_baf.arguments()) {
            if (arg.kind != ArgKind::Feature || !arg.class_index ||
                !arg.feature_ref) {
                continue;
            }
            union_rows[*arg.class_index].insert(*arg.feature_ref);
            int n = 1;
            if (auto it = agent.feature_counts->find(id);
                it != agent.feature_counts->end()) {
                n = it->second;
            }
            union_args.emplace(id,
                               std::tuple{*arg.class_index, *arg.feature_ref, n});
        }
    }
    for (const auto& [cls, rows] : union_rows) {
        out.transcript.final_argument_rows[cls] =
            std::vector<int>(rows.begin(), rows.end());
    }
    for (const auto& [id, entry] : union_args) {
        auto [cls, row, n] = entry;
        for (int k = 0; k < n; ++k) {
            out.transcript.union_assignment.push_back({cls, row});
        }
    }
    out.final_state = std::move(state);
    return out;
}

namespace {

struct NetGrads {
    Eigen::MatrixXd Wm, Wp;
    Eigen::VectorXd bm, bp;
    GruGrads gru;  // parameter fields only
    Eigen::RowVectorXd wq;
    double bq = 0.0;

    explicit NetGrads(const AgentNet& net) {
        Wm = Eigen::MatrixXd::Zero(net.Wm.rows(), net.Wm.cols());
        bm = Eigen::VectorXd::Zero(net.bm.size());
        Wp = Eigen::MatrixXd::Zero(net.Wp.rows(), net.Wp.cols());
        bp = Eigen::VectorXd::Zero(net.bp.size());
        wq = Eigen::RowVectorXd::Zero(net.wq.size());
        int h = net.hidden_dim();
        gru.Wz = Eigen::MatrixXd::Zero(h, h);
        gru.Uz = Eigen::MatrixXd::Zero(h, h);
        gru.Wr = Eigen::MatrixXd::Zero(h, h);
        gru.Ur = Eigen::MatrixXd::Zero(h, h);
        gru.Wh = Eigen::MatrixXd::Zero(h, h);
        gru.Uh = Eigen::MatrixXd::Zero(h, h);
        gru.bz = Eigen::VectorXd::Zero(h);
        gru.br = Eigen::VectorXd::Zero(h);
        gru.bh = Eigen::VectorXd::Zero(h);
    }
};

// REINFORCE gradient of one action: into the policy layer and, through
// the one GRU step that produced the policy input, into the modulator.
void accumulate_fax_grads(const AgentNet& net, const AgentStepCache& cache,
                          double advantage, NetGrads& grads) {
    const Eigen::VectorXd& h = *cache.policy_h;
    Eigen::VectorXd logits = net.Wp * h + net.bp;
    double mx = -std::numeric_limits<double>::infinity();
    for (int r : cache.candidate_rows) mx = std::max(mx, logits(r));
    double z = 0.0;
    std::vector<double> probs(cache.candidate_rows.size());
    for (std::size_t i = 0; i < cache.candidate_rows.size(); ++i) {
        probs[i] = std::exp(logits(cache.candidate_rows[i]) - mx);
        z += probs[i];
    }
    Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(logits.size());
    for (std::size_t i = 0; i < cache.candidate_rows.size(); ++i) {
        int r = cache.candidate_rows[i];
        double p = probs[i] / z;
        dlogits(r) = -advantage * ((r == cache.chosen_row ? 1.0 : 0.0) - p);
    }
    grads.Wp += dlogits * h.transpose();
    grads.bp += dlogits;

    Eigen::VectorXd dh = net.Wp.transpose() * dlogits;
    GruGrads g = gru_backward(net.gru, *cache.policy_gru, dh);
    Eigen::VectorXd da = g.dx.cwiseProduct(
        Eigen::VectorXd::Ones(cache.policy_mod->m.size()) -
        cache.policy_mod->m.cwiseProduct(cache.policy_mod->m));
    grads.Wm += da * cache.policy_mod->pooled.transpose();
    grads.bm += da;
}

// Stance cross-entropy gradient: into the head and, one step back, the
// recurrent parameters.
void accumulate_stance_grads(const AgentNet& net, const AgentStepCache& cache,
                             double weight, NetGrads& grads) {
    double dpre = weight * (cache.head_conf - 1.0);  // target: own class
    grads.wq += dpre * cache.gru.h.transpose();
    grads.bq += dpre;
    Eigen::VectorXd dh = dpre * net.wq.transpose();
    GruGrads g = gru_backward(net.gru, cache.gru, dh);
    grads.gru.Wz += g.Wz; grads.gru.Uz += g.Uz; grads.gru.bz += g.bz;
    grads.gru.Wr += g.Wr; grads.gru.Ur += g.Ur; grads.gru.br += g.br;
    grads.gru.Wh += g.Wh; grads.gru.Uh += g.Uh; grads.gru.bh += g.bh;
}

// One binary-CE step of the whole set-classifier path (modulator, GRU,
// head) on a pooled feature set.
void calibration_step(AgentNet& net, const Eigen::VectorXd& pooled,
                      double target, double lr) {
    ModulatorCache mod = modulator_forward(net, pooled);
    GruCache gru =
        gru_forward(net.gru, Eigen::VectorXd::Zero(net.hidden_dim()), mod.m);
    double conf = head_confidence(net, gru.h);
    double dpre = conf - target;

    Eigen::VectorXd dh = dpre * net.wq.transpose();
    GruGrads g = gru_backward(net.gru, gru, dh);
    Eigen::VectorXd da = g.dx.cwiseProduct(
        Eigen::VectorXd::Ones(mod.m.size()) - mod.m.cwiseProduct(mod.m));

    net.wq -= lr * dpre * gru.h.transpose();
    net.bq -= lr * dpre;
    net.gru.Wz -= lr * g.Wz; net.gru.Uz -= lr * g.Uz; net.gru.bz -= lr * g.bz;
    net.gru.Wr -= lr * g.Wr; net.gru.Ur -= lr * g.Ur; net.gru.br -= lr * g.br;
    net.gru.Wh -= lr * g.Wh; net.gru.Uh -= lr * g.Uh; net.gru.bh -= lr * g.bh;
    net.Wm -= lr * da * pooled.transpose();
    net.bm -= lr * da;
}

void apply_grads(AgentNet& net, const NetGrads& g, double lr) {
    net.Wm -= lr * g.Wm; net.bm -= lr * g.bm;
    net.Wp -= lr * g.Wp; net.bp -= lr * g.bp;
    net.wq -= lr * g.wq; net.bq -= lr * g.bq;
    net.gru.Wz -= lr * g.gru.Wz; net.gru.Uz -= lr * g.gru.Uz;
    net.gru.bz -= lr * g.gru.bz;
    net.gru.Wr -= lr * g.gru.Wr; net.gru.Ur -= lr * g.gru.Ur;
    net.gru.br -= lr * g.gru.br;
    net.gru.Wh -= lr * g.gru.Wh; net.gru.Uh -= lr * g.gru.Uh;
    net.gru.bh -= lr * g.gru.bh;
}

}  // namespace

AgentTrainResult train_agents(const std::vector<SynthImage>& dataset,
                              const Teacher& teacher,
                              const Codebooks& codebooks,
                              const QuantizedClassifier& /*q*/,
                              const AgentTrainHyper& hyper,
                              const DebateConfig& base_config) {
    if (dataset.empty()) throw ParameterError("train_agents: empty dataset");

    AgentTrainResult result;
    auto init_rng = make_rng(hyper.seed, "agent-init");
    for (int c = 0; c < codebooks.num_classes(); ++c) {
        result.nets.push_back(AgentNet::init(codebooks.dim(), hyper.hidden,
                                             codebooks.rows(), init_rng));
    }

    // Calibration: each net becomes an own-class-vs-rest detector on the
    // multiplicity-pooled assigned rows (the same pooling debates use
    // for initial relation sets).
    struct CalibSample {
        Eigen::VectorXd pooled;
        double target;
    };
    std::vector<std::vector<CalibSample>> calib(
        static_cast<std::size_t>(codebooks.num_classes()));
    for (const auto& img : dataset) {
        Eigen::MatrixXd z = teacher.extract(img.pixels);
        std::vector<int> order = teacher.ranking(z);
        int predicted = order[0];
        int runner_up = order[1];
        // A debate over this input walks each agent's pool from its own
        // assigned multiset toward the union of both, one argument (with
        // its multiplicity) at a time; the two debating nets calibrate
        // on the pure pools, each first-argument-learned pool, and the
        // union pool.
        const int m = static_cast<int>(z.rows());
        std::array<int, 2> pair{predicted, runner_up};
        std::array<Eigen::VectorXd, 2> pool;
        std::array<std::map<int, int>, 2> counts;
        for (int k = 0; k < 2; ++k) {
            pool[k] = pooled_assigned(codebooks, pair[k], z);
            for (int r : assign(codebooks.for_class(pair[k]), z)) {
                ++counts[k][r];
            }
        }
        for (int c = 0; c < codebooks.num_classes(); ++c) {
            double target = predicted == c ? hyper.calib_target
                                           : 1.0 - hyper.calib_target;
            auto& bucket = calib[static_cast<std::size_t>(c)];
            bucket.push_back({pooled_assigned(codebooks, c, z), target});
            if (c != predicted && c != runner_up) continue;
            int self = c == predicted ? 0 : 1;
            int other = 1 - self;
            const auto& obook = codebooks.for_class(pair[other]);
            for (const auto& [row, count] : counts[other]) {
                Eigen::VectorXd with_arg =
                    (m * pool[self] + count * obook.row(row).transpose()) /
                    static_cast<double>(m + count);
                bucket.push_back({with_arg, target});
            }
            bucket.push_back({0.5 * (pool[0] + pool[1]), target});
        }
    }
    auto calib_rng = make_rng(hyper.seed, "agent-calib");
    for (int c = 0; c < codebooks.num_classes(); ++c) {
        auto& samples = calib[static_cast<std::size_t>(c)];
        std::vector<std::size_t> idx(samples.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (int epoch = 0; epoch < hyper.calib_epochs; ++epoch) {
            std::shuffle(idx.begin(), idx.end(), calib_rng);
            for (std::size_t i : idx) {
                calibration_step(result.nets[static_cast<std::size_t>(c)],
                                 samples[i].pooled, samples[i].target,
                                 hyper.calib_lr);
            }
        }
    }

    auto order_rng = make_rng(hyper.seed, "agent-order");
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    std::uint64_t debate_counter = 0;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double epoch_total = 0.0;
        for (std::size_t idx : order) {
            DebateConfig cfg = base_config;
            cfg.learned_policy = true;
            cfg.mode = SelectMode::Sample;
            cfg.seed = split_seed(hyper.seed,
                                  "debate-" + std::to_string(debate_counter++));
            DebateOutcome out =
                run_debate(dataset[idx], teacher, codebooks, result.nets, cfg);

            std::vector<double> losses;
            for (int i = 0; i < 2; ++i) {
                AgentNet& net = result.nets[static_cast<std::size_t>(
                    out.class_of_agent[static_cast<std::size_t>(i)])];
                NetGrads grads(net);
                const auto& trace = out.traces[static_cast<std::size_t>(i)];
                const auto& caches = out.caches[static_cast<std::size_t>(i)];
                double stance_total = 0.0;
                for (std::size_t t = 0; t < trace.steps.size(); ++t) {
                    const auto& cache = caches[t + 1];  // caches[0] is t=0
                    const auto& rs = trace.steps[t];
                    if (rs.log_prob && cache.policy_h) {
                        accumulate_fax_grads(net, cache,
                                             rs.reward - rs.baseline, grads);
                    }
                    accumulate_stance_grads(net, cache, hyper.stance_weight,
                                            grads);
                    stance_total += stance_loss(cache.head_conf);
                }
                apply_grads(net, grads, hyper.lr);
                losses.push_back(fax_loss(trace));
                losses.push_back(stance_total);
            }
            epoch_total += total_loss(losses);
        }
        result.epoch_loss.push_back(epoch_total /
                                    static_cast<double>(dataset.size()));
    }
    return result;
}

namespace {

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
    const int r = static_cast<int>(rows.size());
    const int c = static_cast<int>(rows.at(0).size());
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
    }
    return m;
}

std::vector<double> vector_to_std(const Eigen::VectorXd& v) {
    return {v.begin(), v.end()};
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = arr[i].get<double>();
    return v;
}

}  // namespace

nlohmann::ordered_json to_json(const AgentNet& net) {
    nlohmann::ordered_json j;
    j["Wm"] = matrix_to_json(net.Wm);
    j["bm"] = vector_to_std(net.bm);
    j["gru"]["Wz"] = matrix_to_json(net.gru.Wz);
    j["gru"]["Uz"] = matrix_to_json(net.gru.Uz);
    j["gru"]["bz"] = vector_to_std(net.gru.bz);
    j["gru"]["Wr"] = matrix_to_json(net.gru.Wr);
    j["gru"]["Ur"] = matrix_to_json(net.gru.Ur);
    j["gru"]["br"] = vector_to_std(net.gru.br);
    j["gru"]["Wh"] = matrix_to_json(net.gru.Wh);
    j["gru"]["Uh"] = matrix_to_json(net.gru.Uh);
    j["gru"]["bh"] = vector_to_std(net.gru.bh);
    j["Wp"] = matrix_to_json(net.Wp);
    j["bp"] = vector_to_std(net.bp);
    j["wq"] = vector_to_std(net.wq.transpose());
    j["bq"] = net.bq;
    return j;
}

AgentNet agent_net_from_json(const nlohmann::json& j) {
    AgentNet net;
    net.Wm = matrix_from_json(j.at("Wm"));
    net.bm = vector_from_json(j.at("bm"));
    const auto& g = j.at("gru");
    net.gru.Wz = matrix_from_json(g.at("Wz"));
    net.gru.Uz = matrix_from_json(g.at("Uz"));
    net.gru.bz = vector_from_json(g.at("bz"));
    net.gru.Wr = matrix_from_json(g.at("Wr"));
    net.gru.Ur = matrix_from_json(g.at("Ur"));
    net.gru.br = vector_from_json(g.at("br"));
    net.gru.Wh = matrix_from_json(g.at("Wh"));
    net.gru.Uh = matrix_from_json(g.at("Uh"));
    net.gru.bh = vector_from_json(g.at("bh"));
    net.Wp = matrix_from_json(j.at("Wp"));
    net.bp = vector_from_json(j.at("bp"));
    net.wq = vector_from_json(j.at("wq")).transpose();
    net.bq = j.at("bq").get<double>();
    return net;
}

}  // namespace fax
