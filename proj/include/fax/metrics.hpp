#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fax/exchange.hpp"
#include "fax/quantize.hpp"

namespace fax {

// Everything the four metrics need from one debated input, with the
// classifier applied up front so metric computation is pure counting.
struct EvalRecord {
    int input_id = 0;
    int ground_truth = 0;
    int teacher_prediction = 0;
    int quantized_prediction = 0;   // scorer on the input's assigned rows
    int union_prediction = 0;       // scorer on the union of final arguments
    int final_class_pro = 0;
    int final_class_opp = 0;
    int initial_pro_class = 0;
    bool resolved = false;
};

// Fraction of records where the scorer on the quantized input recovers
// the ground truth.
double correctness(const std::vector<EvalRecord>& records);

// Fraction where the scorer on the union of the debate's final argument
// features recovers the teacher's prediction.
double completeness(const std::vector<EvalRecord>& records);

// Fraction of debates whose agents end with the same classification.
double consensus(const std::vector<EvalRecord>& records);

// Fraction where the opponent ends on the proponent's initial class.
double pro_persuasion_rate(const std::vector<EvalRecord>& records);

struct MetricsReport {
    double correctness = 0.0;
    double completeness = 0.0;
    double consensus = 0.0;
    double pro_persuasion = 0.0;
    int n_records = 0;
};

MetricsReport compute_metrics(const std::vector<EvalRecord>& records);

EvalRecord build_eval_record(const DebateTranscript& transcript,
                             const Codebooks& codebooks,
                             const QuantizedClassifier& q);

nlohmann::ordered_json to_json(const MetricsReport& r);
nlohmann::ordered_json to_json(const EvalRecord& r);

std::string metrics_csv(const std::vector<EvalRecord>& records,
                        const MetricsReport& report);

}  // namespace fax
