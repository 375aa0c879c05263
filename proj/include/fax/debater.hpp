#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fax/exchange.hpp"
#include "fax/quantize.hpp"
#include "fax/synth.hpp"

namespace fax {

struct GruParams {
    Eigen::MatrixXd Wz, Uz, Wr, Ur, Wh, Uh;
    Eigen::VectorXd bz, br, bh;
};

struct GruCache {
    Eigen::VectorXd x, h_prev, z, r, hh, h;
};

struct GruGrads {
    Eigen::MatrixXd Wz, Uz, Wr, Ur, Wh, Uh;
    Eigen::VectorXd bz, br, bh;
    Eigen::VectorXd dx, dh_prev;
};

GruCache gru_forward(const GruParams& p, const Eigen::VectorXd& h_prev,
                     const Eigen::VectorXd& x);
GruGrads gru_backward(const GruParams& p, const GruCache& cache,
                      const Eigen::VectorXd& dh);

// Per-class debating network: modulator (argument features -> hidden
// space), gated recurrent update, policy scorer over the class's
// codebook rows, and a scalar class-confidence head.
struct AgentNet {
    Eigen::MatrixXd Wm;       // hidden x dim
    Eigen::VectorXd bm;
    GruParams gru;            // input = modulator output (hidden-sized)
    Eigen::MatrixXd Wp;       // n_rows x hidden
    Eigen::VectorXd bp;
    Eigen::RowVectorXd wq;    // 1 x hidden
    double bq = 0.0;

    int hidden_dim() const { return static_cast<int>(bm.size()); }
    int n_rows() const { return static_cast<int>(bp.size()); }

    static AgentNet init(int dim, int hidden, int n_rows,
                         std::mt19937_64& rng);
};

struct ModulatorCache {
    Eigen::VectorXd pooled;
    Eigen::VectorXd m;
};

ModulatorCache modulator_forward(const AgentNet& net,
                                 const Eigen::VectorXd& pooled);

// Eq-4 style hidden update: h' = GRU(h, modulator(pooled arguments)).
Eigen::VectorXd hidden_update(const AgentNet& net, const Eigen::VectorXd& h,
                              const Eigen::VectorXd& pooled_args);

// Sigmoid class-confidence of the net's own class from a hidden state.
double head_confidence(const AgentNet& net, const Eigen::VectorXd& h);

// A debating agent: Def-5 private triple plus network state. σ of the
// explanandum is the private classifier (an own-class confidence) on
// its relation set; for the proponent that confidence concerns the
// explanandum's class directly, for the opponent its rival class, so a
// well-calibrated opponent scores e low.
struct ImageAgent {
    int agent_index = 1;  // 1 = proponent, 2 = opponent
    int class_index = 0;
    EvaluationRange range;
    Baf private_baf;
    const AgentNet* net = nullptr;
    // Shared across snapshots: feature vectors, frozen strengths and
    // assignment multiplicities are write-once per argument id.
    std::shared_ptr<std::map<std::string, Eigen::VectorXd>> features;
    std::shared_ptr<std::map<std::string, double>> feature_strengths;
    // Arguments pool with the number of latents assigned to them
    // (Eq.-1 multiset); learned arguments inherit the contributor's
    // multiplicity.
    std::shared_ptr<std::map<std::string, int>> feature_counts;
    std::vector<std::string> own_args;        // ordered by codebook row
    std::map<std::string, int> own_row;
    Eigen::VectorXd hidden;

    bool proponent() const { return agent_index == 1; }
    // σ^i(B, e) for any framework sharing this agent's feature space.
    double sigma_explanandum(const Baf& baf, const std::string& e) const;
    double sigma_current(const std::string& e) const {
        return sigma_explanandum(private_baf, e);
    }
    // Private-classifier value of a feature set (own-class confidence).
    double q_of_set(const std::vector<Eigen::VectorXd>& feats) const;

    PrivateTriple as_triple() const;
};

std::string feature_arg_id(int class_index, int row);

// Seeds the Def-5 private BAF with the agent's class-specific arguments
// assigned from the input's latents: supporters of the explanandum for
// the proponent, attackers for the opponent.
ImageAgent build_image_agent(int agent_index, int class_index,
                             const std::string& explanandum_id,
                             const std::vector<int>& assigned_rows,
                             const Eigen::MatrixXd& book, const AgentNet& net,
                             double tau);

struct SelectedArgument {
    int row = 0;
    double log_prob = 0.0;
};

enum class SelectMode { Sample, Argmax };

// Policy draw over the agent's not-yet-contributed private arguments;
// everything else is masked out.
SelectedArgument select_argument(const AgentNet& net, const Eigen::VectorXd& h,
                                 const std::vector<int>& candidate_rows,
                                 SelectMode mode, std::mt19937_64& rng);

// Learning-free baseline: the candidate with the largest absolute
// marginal effect of the private classifier on the exchanged relation
// set; ties break to the lowest row.
int greedy_select(const ImageAgent& agent, const std::vector<int>& candidate_rows,
                  const std::vector<Eigen::VectorXd>& exchanged_features);

struct RelationJudgement {
    Polarity polarity = Polarity::Support;
    double new_sigma_e = 0.0;   // σ^i(e) once the argument is learned
    double strength = 0.0;      // |Δ|, frozen strength of the new argument
};

// Def-7 dialectically monotonic learning rule: support iff the marginal
// change of the private classifier is >= 0. count is the argument's
// assignment multiplicity in the contributor's quantization.
RelationJudgement classify_relation(const ImageAgent& agent,
                                    const std::string& arg_id,
                                    const Eigen::VectorXd& feature,
                                    const std::string& explanandum_id,
                                    int count = 1);

// Def-8 reward: initial stance sign (+ proponent, - opponent) times the
// current σ^i(e).
double reward(const ImageAgent& agent, const std::string& explanandum_id);

struct RewardStep {
    double reward = 0.0;
    double baseline = 0.0;
    std::optional<double> log_prob;  // present when this agent acted
};

struct RewardTrace {
    std::vector<RewardStep> steps;
};

// REINFORCE objective with baseline over the agent's action steps.
double fax_loss(const RewardTrace& trace);

// Cross-entropy pushing the head's own-class confidence up.
double stance_loss(double own_class_confidence);

double total_loss(const std::vector<double>& components);

// Mean cosine dissimilarity of the new argument against all previous
// contributed arguments; below eps means the exchange has stopped adding
// information. Zero-norm vectors count as maximally dissimilar.
bool termination_check(const std::vector<Eigen::VectorXd>& previous,
                       const Eigen::VectorXd& next, double eps);

struct DebateConfig {
    double eps = 0.05;
    int max_steps = 20;
    double tau_default = 0.5;
    bool learned_policy = true;  // false = greedy baseline
    SelectMode mode = SelectMode::Argmax;
    double baseline_decay = 0.9;
    std::uint64_t seed = 0;
};

// Everything training needs from one debate, besides the transcript.
struct AgentStepCache {
    GruCache gru;
    ModulatorCache mod;
    double head_conf = 0.0;
    // Policy context, present when this agent acted at the step.
    std::optional<Eigen::VectorXd> policy_h;
    std::optional<GruCache> policy_gru;         // step that produced policy_h
    std::optional<ModulatorCache> policy_mod;
    std::vector<int> candidate_rows;
    int chosen_row = -1;
};

struct DebateOutcome {
    DebateTranscript transcript;
    std::optional<ExchangeState> final_state;
    std::array<RewardTrace, 2> traces;                   // per agent
    std::array<std::vector<AgentStepCache>, 2> caches;   // per agent, per t
    std::array<int, 2> class_of_agent{0, 0};
    bool truncated_last_step = false;
};

// One full equal-opportunity strictly-interleaved debate over the top-2
// predicted classes of the teacher.
DebateOutcome run_debate(const SynthImage& input, const Teacher& teacher,
                         const Codebooks& codebooks,
                         const std::vector<AgentNet>& nets,
                         const DebateConfig& config);

struct AgentTrainHyper {
    int hidden = 48;
    int epochs = 3;
    double lr = 0.02;
    // Private-classifier calibration: before any debating, each class
    // net is fit as an own-class-vs-rest detector on pooled codebook
    // features (the stance loss alone has no negative examples). Soft
    // targets keep the head's sigmoid responsive to learned arguments.
    int calib_epochs = 120;
    double calib_lr = 0.1;
    double calib_target = 0.85;
    // Scale of the stance gradient during debate training; small so it
    // does not saturate the calibrated head.
    double stance_weight = 0.05;
    std::uint64_t seed = 0;
};

struct AgentTrainResult {
    std::vector<AgentNet> nets;
    std::vector<double> epoch_loss;  // mean total loss per epoch
};

// REINFORCE + stance training of all class nets over the training set.
AgentTrainResult train_agents(const std::vector<SynthImage>& dataset,
                              const Teacher& teacher,
                              const Codebooks& codebooks,
                              const QuantizedClassifier& q,
                              const AgentTrainHyper& hyper,
                              const DebateConfig& base_config);

nlohmann::ordered_json to_json(const AgentNet& net);
AgentNet agent_net_from_json(const nlohmann::json& j);

}  // namespace fax
