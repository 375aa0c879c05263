#include "fax/metrics.hpp"

#include <sstream>

namespace fax {

namespace {

double fraction(const std::vector<EvalRecord>& records,
                bool (*pred)(const EvalRecord&)) {
    if (records.empty()) {
        throw ParameterError("metric undefined on an empty record set");
    }
    int hits = 0;
    for (const auto& r : records) {
        if (pred(r)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

}  // namespace

double correctness(const std::vector<EvalRecord>& records) {
    return fraction(records, [](const EvalRecord& r) {
        return r.quantized_prediction == r.ground_truth;
    });
}

double completeness(const std::vector<EvalRecord>& records) {
    return fraction(records, [](const EvalRecord& r) {
        return r.union_prediction == r.teacher_prediction;
    });
}

double consensus(const std::vector<EvalRecord>& records) {
    return fraction(records, [](const EvalRecord& r) {
        return r.final_class_pro == r.final_class_opp;
    });
}

double pro_persuasion_rate(const std::vector<EvalRecord>& records) {
    return fraction(records, [](const EvalRecord& r) {
        return r.final_class_opp == r.initial_pro_class;
    });
}

MetricsReport compute_metrics(const std::vector<EvalRecord>& records) {
    MetricsReport report;
    report.correctness = correctness(records);
    report.completeness = completeness(records);
    report.consensus = consensus(records);
    report.pro_persuasion = pro_persuasion_rate(records);
    report.n_records = static_cast<int>(records.size());
    return report;
}

EvalRecord build_eval_record(const DebateTranscript& t,
                             const Codebooks& codebooks,
                             const QuantizedClassifier& q) {
    if (!t.input_id || !t.ground_truth || !t.teacher_prediction ||
        !t.proponent_class || !t.opponent_class || !t.initial_pro_class) {
        throw ParameterError("transcript lacks pipeline metadata");
    }
    EvalRecord r;
    r.input_id = *t.input_id;
    r.ground_truth = *t.ground_truth;
    r.teacher_prediction = *t.teacher_prediction;
    r.initial_pro_class = *t.initial_pro_class;
    r.final_class_pro = t.final_hidden_class.at(1);
    r.final_class_opp = t.final_hidden_class.at(2);
    r.resolved = t.resolved_at.has_value();

    // Quantized input: mean of the per-latent assigned rows under the
    // predicted class's codebook.
    auto it = t.assigned_rows.find(*t.proponent_class);
    if (it == t.assigned_rows.end() || it->second.empty()) {
        throw ParameterError("transcript lacks assigned rows");
    }
    const Eigen::MatrixXd& book = codebooks.for_class(*t.proponent_class);
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(book.cols());
    for (int row : it->second) pooled += book.row(row).transpose();
    pooled /= static_cast<double>(it->second.size());
    r.quantized_prediction = q.predict(pooled);

    // Debate content quantized per latent against the union of final
    // argument rows, pooled and scored.
    if (t.union_assignment.empty()) {
        throw ParameterError("transcript lacks a union assignment");
    }
    Eigen::VectorXd union_pooled = Eigen::VectorXd::Zero(book.cols());
    for (const auto& [cls, row] : t.union_assignment) {
        union_pooled += codebooks.for_class(cls).row(row).transpose();
    }
    union_pooled /= static_cast<double>(t.union_assignment.size());
    r.union_prediction = q.predict(union_pooled);
    return r;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["correctness"] = r.correctness;
    j["completeness"] = r.completeness;
    j["consensus"] = r.consensus;
    j["pro_persuasion"] = r.pro_persuasion;
    j["n_records"] = r.n_records;
    return j;
}

nlohmann::ordered_json to_json(const EvalRecord& r) {
    nlohmann::ordered_json j;
    j["input_id"] = r.input_id;
    j["ground_truth"] = r.ground_truth;
    j["teacher_prediction"] = r.teacher_prediction;
    j["quantized_prediction"] = r.quantized_prediction;
    j["union_prediction"] = r.union_prediction;
    j["final_class_pro"] = r.final_class_pro;
    j["final_class_opp"] = r.final_class_opp;
    j["initial_pro_class"] = r.initial_pro_class;
    j["resolved"] = r.resolved;
    return j;
}

std::string metrics_csv(const std::vector<EvalRecord>& records,
                        const MetricsReport& report) {
    std::ostringstream os;
    os << "input_id,ground_truth,teacher_prediction,quantized_prediction,"
          "union_prediction,final_class_pro,final_class_opp,"
          "initial_pro_class,resolved\n";
    for (const auto& r : records) {
        os << r.input_id << ',' << r.ground_truth << ','
           << r.teacher_prediction << ',' << r.quantized_prediction << ','
           << r.union_prediction << ',' << r.final_class_pro << ','
           << r.final_class_opp << ',' << r.initial_pro_class << ','
           << (r.resolved ? 1 : 0) << '\n';
    }
    os << "# correctness=" << report.correctness
       << " completeness=" << report.completeness
       << " consensus=" << report.consensus
       << " pro_persuasion=" << report.pro_persuasion << '\n';
    return os.str();
}

}  // namespace fax
