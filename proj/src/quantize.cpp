#include "fax/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fax/rng.hpp"

namespace fax {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
    Eigen::VectorXd shifted = v.array() - v.maxCoeff();
    Eigen::VectorXd e = shifted.array().exp();
    return e / e.sum();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out.row(i) = softmax(m.row(i).transpose()).transpose();
    }
    return out;
}

// Lloyd k-means over the rows of data; returns k x dim centers.
Eigen::MatrixXd kmeans_rows(const Eigen::MatrixXd& data, int k,
                            std::mt19937_64& rng) {
    const int n = static_cast<int>(data.rows());
    const int d = static_cast<int>(data.cols());
    Eigen::MatrixXd centers(k, d);
    if (n == 0) {
        std::normal_distribution<double> gauss(0.0, 0.1);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < d; ++j) centers(i, j) = gauss(rng);
        }
        return centers;
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::normal_distribution<double> jitter(0.0, 1e-3);
    for (int i = 0; i < k; ++i) {
        centers.row(i) = data.row(order[i % n]);
        if (i >= n) {
            for (int j = 0; j < d; ++j) centers(i, j) += jitter(rng);
        }
    }
    std::vector<int> labels(n, 0);
    for (int iter = 0; iter < 20; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_dist = (data.row(i) - centers.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                double dist = (data.row(i) - centers.row(c)).squaredNorm();
                if (dist < best_dist) {
                    best_dist = dist;
                    best = c;
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        for (int c = 0; c < k; ++c) {
            Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d);
            int count = 0;
            for (int i = 0; i < n; ++i) {
                if (labels[i] == c) {
                    sum += data.row(i);
                    ++count;
                }
            }
            if (count > 0) centers.row(c) = sum / count;
        }
    }
    return centers;
}

}  // namespace

const Eigen::MatrixXd& Codebooks::for_class(int c) const {
    if (c < 0 || c >= num_classes()) {
        throw ParameterError("class index out of range: " + std::to_string(c));
    }
    return books[static_cast<std::size_t>(c)];
}

std::vector<int> assign(const Eigen::MatrixXd& book, const Eigen::MatrixXd& z) {
    if (book.cols() != z.cols()) {
        throw ShapeError("assign: feature dimension mismatch");
    }
    std::vector<int> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        int best = 0;
        double best_dist = (z.row(i) - book.row(0)).squaredNorm();
        for (Eigen::Index j = 1; j < book.rows(); ++j) {
            double dist = (z.row(i) - book.row(j)).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(j);
            }
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

Eigen::MatrixXd similarity_logits(const Eigen::MatrixXd& book,
                                  const Eigen::MatrixXd& z) {
    if (book.cols() != z.cols()) {
        throw ShapeError("similarity_logits: feature dimension mismatch");
    }
    Eigen::MatrixXd logits(z.rows(), book.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < book.rows(); ++j) {
            logits(i, j) = -(z.row(i) - book.row(j)).squaredNorm();
        }
    }
    return logits;
}

Eigen::MatrixXd gumbel_relax(const Eigen::MatrixXd& z,
                             const Eigen::MatrixXd& book, double temperature,
                             const Eigen::MatrixXd* noise) {
    if (temperature <= 0.0) {
        throw ParameterError("temperature must be positive");
    }
    Eigen::MatrixXd logits = similarity_logits(book, z);
    if (noise != nullptr) {
        if (noise->rows() != logits.rows() || noise->cols() != logits.cols()) {
            throw ShapeError("gumbel noise shape mismatch");
        }
        logits += *noise;
    }
    return softmax_rows(logits / temperature);
}

Eigen::MatrixXd sample_gumbel(int rows, int cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(1e-12, 1.0);
    Eigen::MatrixXd g(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            g(i, j) = -std::log(-std::log(unif(rng)));
        }
    }
    return g;
}

double quantization_loss(const Eigen::MatrixXd& logits) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::VectorXd p = softmax(logits.row(i).transpose());
        total -= (p.array() * p.array().log()).sum();
    }
    return total;
}

Eigen::MatrixXd quantization_loss_grad(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd grad(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::VectorXd p = softmax(logits.row(i).transpose());
        double neg_ent = (p.array() * p.array().log()).sum();
        grad.row(i) =
            (p.array() * (neg_ent - p.array().log())).matrix().transpose();
    }
    return grad;
}

Eigen::VectorXd QuantizedClassifier::probs(const Eigen::VectorXd& pooled) const {
    return softmax(W * pooled + b);
}

int QuantizedClassifier::predict(const Eigen::VectorXd& pooled) const {
    Eigen::Index idx = 0;
    probs(pooled).maxCoeff(&idx);
    return static_cast<int>(idx);
}

double cross_entropy(const Eigen::VectorXd& probs, int label) {
    if (label < 0 || label >= probs.size()) {
        throw ParameterError("cross_entropy label out of range");
    }
    return -std::log(std::max(probs(label), 1e-300));
}

double distillation_loss(const QuantizedClassifier& q,
                         const Eigen::MatrixXd& logits,
                         const Eigen::VectorXd& pooled, int teacher_class) {
    return quantization_loss(logits) +
           cross_entropy(q.probs(pooled), teacher_class);
}

Eigen::VectorXd pooled_assigned(const Codebooks& cb, int c,
                                const Eigen::MatrixXd& z) {
    const auto& book = cb.for_class(c);
    auto rows = assign(book, z);
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(book.cols());
    for (int r : rows) pooled += book.row(r).transpose();
    return pooled / static_cast<double>(rows.size());
}

QuantizeResult train_quantization(const std::vector<TrainSample>& dataset,
                                  int num_classes, const QuantizeHyper& hyper) {
    if (dataset.empty()) {
        throw ParameterError("train_quantization: empty dataset");
    }
    const int d = hyper.dim;
    for (const auto& s : dataset) {
        if (s.latents.cols() != d) {
            throw ShapeError("train_quantization: latent dimension mismatch");
        }
        if (s.teacher_class < 0 || s.teacher_class >= num_classes) {
            throw ParameterError("teacher class out of range");
        }
    }

    auto rng = make_rng(hyper.seed, "quantize");

    QuantizeResult result;
    result.codebooks.books.reserve(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        std::vector<Eigen::MatrixXd> blocks;
        Eigen::Index total = 0;
        for (const auto& s : dataset) {
            if (s.teacher_class == c) {
                blocks.push_back(s.latents);
                total += s.latents.rows();
            }
        }
        Eigen::MatrixXd stacked(total, d);
        Eigen::Index at = 0;
        for (const auto& b : blocks) {
            stacked.middleRows(at, b.rows()) = b;
            at += b.rows();
        }
        result.codebooks.books.push_back(
            kmeans_rows(stacked, hyper.n_rows, rng));
    }

    std::normal_distribution<double> init(0.0, 0.05);
    result.classifier.W = Eigen::MatrixXd::NullaryExpr(
        num_classes, d, [&]() { return init(rng); });
    result.classifier.b = Eigen::VectorXd::Zero(num_classes);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    const double inv_t = 1.0 / hyper.temperature;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const auto& sample = dataset[idx];
            const int c = sample.teacher_class;
            Eigen::MatrixXd& book = result.codebooks.books[static_cast<std::size_t>(c)];
            const Eigen::MatrixXd& z = sample.latents;
            const int m = static_cast<int>(z.rows());

            Eigen::MatrixXd logits = similarity_logits(book, z);
            if (hyper.gumbel_scale > 0.0) {
                logits += hyper.gumbel_scale *
                          sample_gumbel(m, hyper.n_rows, rng);
            }
            Eigen::MatrixXd scaled = logits * inv_t;
            Eigen::MatrixXd p = softmax_rows(scaled);

            double l_quant = quantization_loss(scaled);
            Eigen::VectorXd pooled =
                (p * book).colwise().mean().transpose();
            Eigen::VectorXd class_probs = result.classifier.probs(pooled);
            double l_ce = cross_entropy(class_probs, c);
            epoch_loss += l_quant + l_ce;

            // Cross-entropy trains the classifier only; codebook rows see
            // a stopped gradient there and move under the entropy term,
            // keeping their content anchored to the latent clusters.
            Eigen::VectorXd gq = class_probs;
            gq(c) -= 1.0;
            Eigen::MatrixXd gW =
                gq * pooled.transpose() + hyper.weight_decay * result.classifier.W;

            Eigen::MatrixXd dlogits = quantization_loss_grad(scaled) * inv_t;
            Eigen::MatrixXd gbook = Eigen::MatrixXd::Zero(hyper.n_rows, d);
            for (int j = 0; j < hyper.n_rows; ++j) {
                Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
                for (int i = 0; i < m; ++i) {
                    acc += dlogits(i, j) * 2.0 * (z.row(i) - book.row(j));
                }
                gbook.row(j) += acc;
            }

            book -= hyper.lr * gbook;
            result.classifier.W -= hyper.lr * gW;
            result.classifier.b -= hyper.lr * gq;

            // Debates pool the union of both agents' assigned rows, so
            // the scorer also sees the mixed top-2 pool; classifier-only
            // again (hard assignment carries no codebook gradient).
            if (sample.runner_up >= 0 && sample.runner_up != c) {
                Eigen::VectorXd mixed =
                    0.5 * (pooled_assigned(result.codebooks, c, z) +
                           pooled_assigned(result.codebooks, sample.runner_up,
                                           z));
                Eigen::VectorXd mp = result.classifier.probs(mixed);
                epoch_loss += cross_entropy(mp, c);
                Eigen::VectorXd gm = mp;
                gm(c) -= 1.0;
                result.classifier.W -= hyper.lr * (gm * mixed.transpose());
                result.classifier.b -= hyper.lr * gm;
            }
        }
        epoch_loss /= static_cast<double>(dataset.size());
        if (!std::isfinite(epoch_loss)) {
            throw TrainingFailure("distillation loss diverged at epoch " +
                                  std::to_string(epoch));
        }
        result.epoch_loss.push_back(epoch_loss);
    }
    return result;
}

nlohmann::ordered_json to_json(const Codebooks& cb) {
    nlohmann::ordered_json j;
    j["num_classes"] = cb.num_classes();
    j["n_rows"] = cb.rows();
    j["dim"] = cb.dim();
    j["books"] = nlohmann::ordered_json::array();
    for (const auto& book : cb.books) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (Eigen::Index i = 0; i < book.rows(); ++i) {
            std::vector<double> row(book.row(i).begin(), book.row(i).end());
            rows.push_back(row);
        }
        j["books"].push_back(std::move(rows));
    }
    return j;
}

Codebooks codebooks_from_json(const nlohmann::json& j) {
    Codebooks cb;
    int n_rows = j.at("n_rows").get<int>();
    int dim = j.at("dim").get<int>();
    for (const auto& rows : j.at("books")) {
        Eigen::MatrixXd book(n_rows, dim);
        int i = 0;
        for (const auto& row : rows) {
            for (int k = 0; k < dim; ++k) book(i, k) = row.at(k).get<double>();
            ++i;
        }
        cb.books.push_back(std::move(book));
    }
    return cb;
}

nlohmann::ordered_json to_json(const QuantizedClassifier& q) {
    nlohmann::ordered_json j;
    j["W"] = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < q.W.rows(); ++i) {
        std::vector<double> row(q.W.row(i).begin(), q.W.row(i).end());
        j["W"].push_back(row);
    }
    j["b"] = std::vector<double>(q.b.begin(), q.b.end());
    return j;
}

QuantizedClassifier classifier_from_json(const nlohmann::json& j) {
    QuantizedClassifier q;
    const auto& wj = j.at("W");
    int rows = static_cast<int>(wj.size());
    int cols = static_cast<int>(wj.at(0).size());
    q.W.resize(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int k = 0; k < cols; ++k) q.W(i, k) = wj[i][k].get<double>();
    }
    const auto& bj = j.at("b");
    q.b.resize(static_cast<Eigen::Index>(bj.size()));
    for (int i = 0; i < q.b.size(); ++i) q.b(i) = bj[i].get<double>();
    return q;
}

}  // namespace fax
