#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fax/errors.hpp"

namespace fax {

// Per-class discrete features: N matrices of shape n_rows x dim, all
// classes sharing n_rows and dim.
struct Codebooks {
    std::vector<Eigen::MatrixXd> books;

    int num_classes() const { return static_cast<int>(books.size()); }
    int rows() const { return books.empty() ? 0 : static_cast<int>(books[0].rows()); }
    int dim() const { return books.empty() ? 0 : static_cast<int>(books[0].cols()); }
    const Eigen::MatrixXd& for_class(int c) const;
};

// Nearest codebook row per latent row under squared Euclidean distance;
// ties break to the lowest row index.
std::vector<int> assign(const Eigen::MatrixXd& book, const Eigen::MatrixXd& z);

// Pairwise similarity logits (negated squared distances), m x n_rows.
Eigen::MatrixXd similarity_logits(const Eigen::MatrixXd& book,
                                  const Eigen::MatrixXd& z);

// Relaxed assignment: row-wise softmax((logits + noise) / temperature).
// noise == nullptr means zero noise, under which temperature -> 0
// recovers the hard assignment's argmax.
Eigen::MatrixXd gumbel_relax(const Eigen::MatrixXd& z,
                             const Eigen::MatrixXd& book, double temperature,
                             const Eigen::MatrixXd* noise = nullptr);

Eigen::MatrixXd sample_gumbel(int rows, int cols, std::mt19937_64& rng);

// Sum over rows of the assignment entropy -sum_j p_j log p_j with
// p = softmax(row); minimized (at zero) by confident assignments.
double quantization_loss(const Eigen::MatrixXd& logits);
Eigen::MatrixXd quantization_loss_grad(const Eigen::MatrixXd& logits);

// Small linear-softmax scorer over pooled codebook features.
struct QuantizedClassifier {
    Eigen::MatrixXd W;  // num_classes x dim
    Eigen::VectorXd b;  // num_classes

    Eigen::VectorXd probs(const Eigen::VectorXd& pooled) const;
    int predict(const Eigen::VectorXd& pooled) const;
};

double cross_entropy(const Eigen::VectorXd& probs, int label);

// Eq-style distillation objective: quantization loss plus cross-entropy
// of the scorer against the teacher's top class.
double distillation_loss(const QuantizedClassifier& q,
                         const Eigen::MatrixXd& logits,
                         const Eigen::VectorXd& pooled, int teacher_class);

struct QuantizeHyper {
    int n_rows = 16;     // features per class codebook
    int dim = 16;        // feature length
    int epochs = 30;
    double lr = 0.05;
    double temperature = 0.5;
    double gumbel_scale = 0.0;   // train-time noise amplitude, 0 = off
    double weight_decay = 0.01;  // L2 on the classifier weights
    std::uint64_t seed = 0;
};

struct TrainSample {
    Eigen::MatrixXd latents;  // m x dim
    int teacher_class = 0;
    // Teacher's second-ranked class; when >= 0 the scorer also trains on
    // the two-codebook pool a debate between the top classes produces.
    int runner_up = -1;
};

struct QuantizeResult {
    Codebooks codebooks;
    QuantizedClassifier classifier;
    std::vector<double> epoch_loss;
};

// Simultaneous gradient descent on codebooks and classifier against the
// distillation loss, with per-class k-means initialization.
QuantizeResult train_quantization(const std::vector<TrainSample>& dataset,
                                  int num_classes, const QuantizeHyper& hyper);

// Mean of the hard-assigned codebook rows for latents z under the
// class-c codebook.
Eigen::VectorXd pooled_assigned(const Codebooks& cb, int c,
                                const Eigen::MatrixXd& z);

nlohmann::ordered_json to_json(const Codebooks& cb);
Codebooks codebooks_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const QuantizedClassifier& q);
QuantizedClassifier classifier_from_json(const nlohmann::json& j);

}  // namespace fax
