#include "fax/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fax/rng.hpp"

namespace fax {

namespace {

// Fixed 4x4 signature patterns; class k owns patterns 2k and 2k+1,
// placed at class-consistent patch slots.
Eigen::MatrixXd signature_pattern(int index) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 4);
    switch (index % 8) {
        case 0: p.row(0).setOnes(); p.row(3).setOnes(); break;
        case 1: p.col(0).setOnes(); p.col(3).setOnes(); break;
        case 2: p.diagonal().setOnes(); p(0, 3) = p(3, 0) = 1.0; break;
        case 3: p.block(1, 1, 2, 2).setOnes(); break;
        case 4: p.row(1).setOnes(); p.col(2).setOnes(); break;
        case 5: p(0, 0) = p(0, 3) = p(3, 0) = p(3, 3) = 1.0;
                p(1, 1) = p(2, 2) = 1.0; break;
        case 6: p.col(1).setOnes(); p.row(2).setOnes(); break;
        default: p.block(0, 0, 2, 2).setOnes();
                 p.block(2, 2, 2, 2).setOnes(); break;
    }
    return p;
}

}  // namespace

std::vector<SynthImage> generate_dataset(const SynthConfig& config) {
    if (config.n_classes < 2) {
        throw ParameterError("generate_dataset requires at least 2 classes");
    }
    if (config.height % 4 != 0 || config.width % 4 != 0 ||
        config.n_samples <= 0) {
        throw ParameterError("invalid dataset dimensions");
    }
    auto rng = make_rng(config.seed, "synth-data");
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const int patches_x = config.width / 4;
    const int patches_y = config.height / 4;
    const int n_slots = patches_x * patches_y;

    std::vector<SynthImage> dataset;
    dataset.reserve(static_cast<std::size_t>(config.n_samples));
    for (int i = 0; i < config.n_samples; ++i) {
        SynthImage img;
        img.id = i;
        img.label = i % config.n_classes;  // round-robin, balanced
        img.pixels = Eigen::MatrixXd::Zero(config.height, config.width);

        // Six signature patches at class-consistent slots, alternating
        // between the class's two private patterns; one flipped pixel per
        // slot makes each slot a distinct latent.
        for (int s = 0; s < 6; ++s) {
            int slot = (img.label * 3 + s * 5) % n_slots;
            int py = (slot / patches_x) * 4;
            int px = (slot % patches_x) * 4;
            Eigen::MatrixXd p = signature_pattern(img.label * 2 + s % 2);
            p(s / 2, 3) = 1.0 - p(s / 2, 3);
            img.pixels.block(py, px, 4, 4) = p;
        }

        for (int r = 0; r < config.height; ++r) {
            for (int c = 0; c < config.width; ++c) {
                img.pixels(r, c) += config.noise * unif(rng);
            }
        }
        img.pixels = img.pixels.cwiseMin(1.0).cwiseMax(0.0);
        dataset.push_back(std::move(img));
    }
    return dataset;
}

TeacherSetting setting_from_string(const std::string& s) {
    if (s == "fair") return TeacherSetting::Fair;
    if (s == "biased") return TeacherSetting::Biased;
    if (s == "random") return TeacherSetting::Random;
    throw ParameterError("unknown setting: " + s);
}

std::string to_string(TeacherSetting s) {
    switch (s) {
        case TeacherSetting::Fair: return "fair";
        case TeacherSetting::Biased: return "biased";
        default: return "random";
    }
}

Eigen::MatrixXd Teacher::extract(const Eigen::MatrixXd& pixels) const {
    const int py = static_cast<int>(pixels.rows()) / patch;
    const int px = static_cast<int>(pixels.cols()) / patch;
    Eigen::MatrixXd latents(py * px, projection.rows());
    int row = 0;
    for (int i = 0; i < py; ++i) {
        for (int j = 0; j < px; ++j) {
            Eigen::MatrixXd block = pixels.block(i * patch, j * patch, patch, patch);
            Eigen::VectorXd flat =
                Eigen::Map<Eigen::VectorXd>(block.data(), patch * patch);
            latents.row(row++) = (projection * flat).transpose();
        }
    }
    return latents;
}

Eigen::VectorXd Teacher::class_scores(const Eigen::MatrixXd& latents) const {
    Eigen::VectorXd pooled = latents.colwise().mean().transpose();
    return Wg * pooled + bg;
}

std::optional<int> Teacher::override_hit(const Eigen::MatrixXd& latents) const {
    if (override_pooled.rows() == 0) return std::nullopt;
    Eigen::RowVectorXd pooled = latents.colwise().mean();
    for (Eigen::Index i = 0; i < override_pooled.rows(); ++i) {
        if ((override_pooled.row(i) - pooled).squaredNorm() < 1e-16) {
            return static_cast<int>(i);
        }
    }
    return std::nullopt;
}

int Teacher::predict_latents(const Eigen::MatrixXd& latents) const {
    if (auto hit = override_hit(latents)) {
        return override_class[static_cast<std::size_t>(*hit)];
    }
    Eigen::Index idx = 0;
    class_scores(latents).maxCoeff(&idx);
    return static_cast<int>(idx);
}

int Teacher::predict(const Eigen::MatrixXd& pixels) const {
    return predict_latents(extract(pixels));
}

std::vector<int> Teacher::ranking(const Eigen::MatrixXd& latents) const {
    Eigen::VectorXd scores = class_scores(latents);
    std::vector<int> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scores(a) > scores(b);
    });
    if (auto hit = override_hit(latents)) {
        int c = override_class[static_cast<std::size_t>(*hit)];
        std::stable_partition(order.begin(), order.end(),
                              [c](int k) { return k == c; });
    }
    return order;
}

Teacher train_teacher(const std::vector<SynthImage>& dataset, int n_classes,
                      TeacherSetting setting, const TeacherHyper& hyper) {
    if (dataset.empty()) {
        throw ParameterError("train_teacher: empty dataset");
    }
    auto rng = make_rng(hyper.seed, "teacher");
    std::normal_distribution<double> gauss(0.0, 1.0);

    Teacher teacher;
    teacher.setting = setting;
    const int patch_size = teacher.patch * teacher.patch;
    teacher.projection = Eigen::MatrixXd::NullaryExpr(
        hyper.dim, patch_size, [&]() { return gauss(rng) / std::sqrt(patch_size); });
    teacher.Wg = Eigen::MatrixXd::NullaryExpr(
        n_classes, hyper.dim, [&]() { return gauss(rng) * 0.5; });
    teacher.bg = Eigen::VectorXd::Zero(n_classes);

    if (setting == TeacherSetting::Random) {
        return teacher;  // keep the random initialization untrained
    }

    std::vector<int> labels;
    labels.reserve(dataset.size());
    for (const auto& img : dataset) labels.push_back(img.label);

    std::vector<Eigen::VectorXd> pooled;
    pooled.reserve(dataset.size());
    for (const auto& img : dataset) {
        pooled.push_back(teacher.extract(img.pixels).colwise().mean().transpose());
    }

    if (setting == TeacherSetting::Biased) {
        // Randomly switch exactly floor(0.1 * |D|) labels, each to a
        // different class than its own. The linear head cannot fit the
        // flips on separable data, so the teacher memorizes them
        // outright.
        std::size_t n_flips = dataset.size() / 10;
        std::uniform_int_distribution<int> pick_shift(1, n_classes - 1);
        std::vector<std::size_t> candidates(dataset.size());
        std::iota(candidates.begin(), candidates.end(), 0);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        std::size_t n = std::min(n_flips, candidates.size());
        teacher.override_pooled.resize(static_cast<Eigen::Index>(n),
                                       hyper.dim);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t idx = candidates[i];
            int flipped = (labels[idx] + pick_shift(rng)) % n_classes;
            labels[idx] = flipped;
            teacher.override_pooled.row(static_cast<Eigen::Index>(i)) =
                pooled[idx].transpose();
            teacher.override_class.push_back(flipped);
        }
    }

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t idx : order) {
            Eigen::VectorXd scores = teacher.Wg * pooled[idx] + teacher.bg;
            Eigen::VectorXd shifted = scores.array() - scores.maxCoeff();
            Eigen::VectorXd p = shifted.array().exp();
            p /= p.sum();
            p(labels[idx]) -= 1.0;
            teacher.Wg -= hyper.lr * p * pooled[idx].transpose();
            teacher.bg -= hyper.lr * p;
        }
    }
    return teacher;
}

double teacher_accuracy(const Teacher& teacher,
                        const std::vector<SynthImage>& dataset) {
    if (dataset.empty()) return 0.0;
    int hits = 0;
    for (const auto& img : dataset) {
        if (teacher.predict(img.pixels) == img.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
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

}  // namespace

nlohmann::ordered_json to_json(const Teacher& t) {
    nlohmann::ordered_json j;
    j["setting"] = to_string(t.setting);
    j["patch"] = t.patch;
    j["projection"] = matrix_to_json(t.projection);
    j["Wg"] = matrix_to_json(t.Wg);
    j["bg"] = std::vector<double>(t.bg.begin(), t.bg.end());
    j["override_pooled"] = matrix_to_json(t.override_pooled);
    j["override_class"] = t.override_class;
    return j;
}

Teacher teacher_from_json(const nlohmann::json& j) {
    Teacher t;
    t.setting = setting_from_string(j.at("setting").get<std::string>());
    t.patch = j.at("patch").get<int>();
    t.projection = matrix_from_json(j.at("projection"));
    t.Wg = matrix_from_json(j.at("Wg"));
    const auto& bj = j.at("bg");
    t.bg.resize(static_cast<Eigen::Index>(bj.size()));
    for (Eigen::Index i = 0; i < t.bg.size(); ++i) t.bg(i) = bj[i].get<double>();
    if (j.contains("override_class")) {
        t.override_class = j.at("override_class").get<std::vector<int>>();
        const auto& op = j.at("override_pooled");
        if (!op.empty()) t.override_pooled = matrix_from_json(op);
    }
    return t;
}

nlohmann::ordered_json sample_to_json(const SynthImage& img) {
    nlohmann::ordered_json j;
    j["id"] = img.id;
    j["label"] = img.label;
    j["height"] = static_cast<int>(img.pixels.rows());
    j["width"] = static_cast<int>(img.pixels.cols());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(img.pixels.size()));
    for (Eigen::Index r = 0; r < img.pixels.rows(); ++r) {
        for (Eigen::Index c = 0; c < img.pixels.cols(); ++c) {
            flat.push_back(img.pixels(r, c));
        }
    }
    j["pixels"] = std::move(flat);
    return j;
}

SynthImage sample_from_json(const nlohmann::json& j) {
    SynthImage img;
    img.id = j.at("id").get<int>();
    img.label = j.at("label").get<int>();
    int h = j.at("height").get<int>();
    int w = j.at("width").get<int>();
    img.pixels.resize(h, w);
    const auto& flat = j.at("pixels");
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            img.pixels(r, c) = flat[static_cast<std::size_t>(r) * w + c].get<double>();
        }
    }
    return img;
}

void write_jsonl(const std::vector<SynthImage>& dataset,
                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& img : dataset) {
        out << sample_to_json(img).dump() << "\n";
    }
}

std::vector<SynthImage> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::vector<SynthImage> dataset;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        dataset.push_back(sample_from_json(nlohmann::json::parse(line)));
    }
    return dataset;
}

}  // namespace fax
