#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "fax/metrics.hpp"

using namespace fax;
using doctest::Approx;

namespace {

EvalRecord rec(int id, int gt, int tp, int qp, int up, int pro, int opp,
               int ipc) {
    EvalRecord r;
    r.input_id = id;
    r.ground_truth = gt;
    r.teacher_prediction = tp;
    r.quantized_prediction = qp;
    r.union_prediction = up;
    r.final_class_pro = pro;
    r.final_class_opp = opp;
    r.initial_pro_class = ipc;
    return r;
}

// Hand-counted: correctness 3/6, completeness 5/6, consensus 2/6,
// pro-persuasion 1/6.
std::vector<EvalRecord> six_records() {
    return {
        rec(1, 0, 0, 0, 0, 0, 0, 0),  // all four hit
        rec(2, 1, 1, 1, 1, 1, 2, 1),  // dissent, opponent unmoved
        rec(3, 2, 2, 0, 2, 2, 2, 0),  // wrong quantization, consensus
        rec(4, 3, 3, 3, 0, 3, 1, 3),  // union misses the teacher
        rec(5, 0, 1, 1, 1, 0, 1, 0),  // teacher wrong, scorer follows it
        rec(6, 1, 1, 2, 1, 1, 0, 1),  // scorer wrong, opponent drifts away
    };
}

}  // namespace

TEST_CASE("the four metrics are the hand-counted fractions") {
    auto records = six_records();
    CHECK(correctness(records) == Approx(3.0 / 6.0));
    CHECK(completeness(records) == Approx(5.0 / 6.0));
    CHECK(consensus(records) == Approx(2.0 / 6.0));
    CHECK(pro_persuasion_rate(records) == Approx(1.0 / 6.0));

    MetricsReport report = compute_metrics(records);
    CHECK(report.correctness == Approx(3.0 / 6.0));
    CHECK(report.completeness == Approx(5.0 / 6.0));
    CHECK(report.consensus == Approx(2.0 / 6.0));
    CHECK(report.pro_persuasion == Approx(1.0 / 6.0));
    CHECK(report.n_records == 6);
}

TEST_CASE("metrics are order-invariant and stable under duplication") {
    auto records = six_records();
    auto shuffled = records;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(compute_metrics(shuffled).correctness ==
          Approx(compute_metrics(records).correctness));

    auto doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());
    MetricsReport r2 = compute_metrics(doubled);
    CHECK(r2.correctness == Approx(3.0 / 6.0));
    CHECK(r2.completeness == Approx(5.0 / 6.0));
    CHECK(r2.consensus == Approx(2.0 / 6.0));
    CHECK(r2.pro_persuasion == Approx(1.0 / 6.0));
}

TEST_CASE("metrics reject an empty record set") {
    CHECK_THROWS_AS(correctness({}), ParameterError);
    CHECK_THROWS_AS(completeness({}), ParameterError);
    CHECK_THROWS_AS(consensus({}), ParameterError);
    CHECK_THROWS_AS(pro_persuasion_rate({}), ParameterError);
    CHECK_THROWS_AS(compute_metrics({}), ParameterError);
}

TEST_CASE("build_eval_record pools assigned and union rows by hand") {
    Codebooks cb;
    Eigen::MatrixXd b0(2, 2), b1(2, 2);
    b0 << 1.0, 0.0,
          0.0, 1.0;
    b1 << 2.0, 0.0,
          0.0, 2.0;
    cb.books = {b0, b1};
    QuantizedClassifier q;
    q.W = Eigen::MatrixXd::Identity(2, 2);
    q.b = Eigen::VectorXd::Zero(2);

    DebateTranscript t;
    t.explanandum = "e";
    t.input_id = 9;
    t.ground_truth = 0;
    t.teacher_prediction = 0;
    t.proponent_class = 0;
    t.opponent_class = 1;
    t.initial_pro_class = 0;
    t.final_hidden_class = {{1, 0}, {2, 1}};
    t.resolved_at = 3;
    // pooled = mean of b0 rows {0, 0, 1} = (2/3, 1/3) -> class 0
    t.assigned_rows = {{0, {0, 0, 1}}};
    // union = mean of b0 row 0 and b1 row 1 = (0.5, 1.0) -> class 1
    t.union_assignment = {{0, 0}, {1, 1}};

    EvalRecord r = build_eval_record(t, cb, q);
    CHECK(r.input_id == 9);
    CHECK(r.ground_truth == 0);
    CHECK(r.teacher_prediction == 0);
    CHECK(r.quantized_prediction == 0);
    CHECK(r.union_prediction == 1);
    CHECK(r.final_class_pro == 0);
    CHECK(r.final_class_opp == 1);
    CHECK(r.initial_pro_class == 0);
    CHECK(r.resolved);

    // metadata and content are mandatory
    DebateTranscript bare;
    bare.explanandum = "e";
    CHECK_THROWS_AS(build_eval_record(bare, cb, q), ParameterError);

    DebateTranscript no_rows = t;
    no_rows.assigned_rows.clear();
    CHECK_THROWS_AS(build_eval_record(no_rows, cb, q), ParameterError);

    DebateTranscript no_union = t;
    no_union.union_assignment.clear();
    CHECK_THROWS_AS(build_eval_record(no_union, cb, q), ParameterError);
}

TEST_CASE("csv lists one line per record plus the summary") {
    auto records = six_records();
    std::string csv = metrics_csv(records, compute_metrics(records));
    CHECK(csv.rfind("input_id,ground_truth,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);  // header + 6 + summary
    CHECK(csv.find("correctness=0.5") != std::string::npos);
}

TEST_CASE("json serialization carries every field") {
    auto records = six_records();
    nlohmann::ordered_json jr = to_json(compute_metrics(records));
    CHECK(jr["correctness"].get<double>() == Approx(0.5));
    CHECK(jr["n_records"] == 6);

    nlohmann::ordered_json je = to_json(records[3]);
    CHECK(je["input_id"] == 4);
    CHECK(je["union_prediction"] == 0);
    CHECK(je["final_class_opp"] == 1);
    CHECK(je["resolved"] == false);
}
