#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fax/errors.hpp"

namespace fax {

// One synthetic sample: a single-channel grid with values in [0,1],
// built from class-signature patches plus noise.
struct SynthImage {
    int id = 0;
    Eigen::MatrixXd pixels;  // h x w
    int label = 0;
};

struct SynthConfig {
    int n_samples = 600;
    int n_classes = 4;
    int height = 16;
    int width = 16;
    double noise = 0.15;
    std::uint64_t seed = 0;
};

// Seeded, reproducible dataset: each class carries six signature 4x4
// patch patterns at class-consistent locations; labels are assigned
// round-robin so class counts are balanced within one.
std::vector<SynthImage> generate_dataset(const SynthConfig& config);

enum class TeacherSetting { Fair, Biased, Random };

TeacherSetting setting_from_string(const std::string& s);
std::string to_string(TeacherSetting s);

// Frozen feature extractor plus linear classifier head. f pools 4x4
// patches and projects each through a fixed seeded matrix; g is a
// softmax head on the mean-pooled latent. A biased teacher additionally
// memorizes its flipped training samples: their pooled latents override
// the head, the way an overparameterized classifier fits label noise.
struct Teacher {
    Eigen::MatrixXd projection;  // dim x patch_size
    Eigen::MatrixXd Wg;          // n_classes x dim
    Eigen::VectorXd bg;          // n_classes
    Eigen::MatrixXd override_pooled;  // n_overrides x dim (0 x 0 when none)
    std::vector<int> override_class;
    TeacherSetting setting = TeacherSetting::Fair;
    int patch = 4;

    Eigen::MatrixXd extract(const Eigen::MatrixXd& pixels) const;  // m x dim
    Eigen::VectorXd class_scores(const Eigen::MatrixXd& latents) const;
    // Index of the memorized sample matching the pooled latent, if any.
    std::optional<int> override_hit(const Eigen::MatrixXd& latents) const;
    int predict_latents(const Eigen::MatrixXd& latents) const;
    int predict(const Eigen::MatrixXd& pixels) const;
    // Class indices sorted by descending score; a memorized sample's
    // class ranks first.
    std::vector<int> ranking(const Eigen::MatrixXd& latents) const;
};

struct TeacherHyper {
    int dim = 16;
    int epochs = 40;
    double lr = 0.1;
    std::uint64_t seed = 0;
};

// fair: softmax regression on true labels; biased: exactly
// floor(0.1*|D|) labels flipped (seeded, always to a different class)
// before training; random: seeded random weights, no training.
Teacher train_teacher(const std::vector<SynthImage>& dataset, int n_classes,
                      TeacherSetting setting, const TeacherHyper& hyper);

double teacher_accuracy(const Teacher& teacher,
                        const std::vector<SynthImage>& dataset);

nlohmann::ordered_json to_json(const Teacher& t);
Teacher teacher_from_json(const nlohmann::json& j);

nlohmann::ordered_json sample_to_json(const SynthImage& img);
SynthImage sample_from_json(const nlohmann::json& j);

void write_jsonl(const std::vector<SynthImage>& dataset,
                 const std::string& path);
std::vector<SynthImage> read_jsonl(const std::string& path);

}  // namespace fax
