#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "fax/synth.hpp"

using namespace fax;
using doctest::Approx;

namespace {

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig c;
    c.n_samples = 80;
    c.n_classes = 4;
    c.seed = seed;
    return c;
}

TeacherHyper teacher_hyper(std::uint64_t seed) {
    TeacherHyper h;
    h.seed = seed;
    return h;
}

}  // namespace

TEST_CASE("dataset shape, value range and balanced labels") {
    auto data = generate_dataset(small_config(1));
    REQUIRE(data.size() == 80);
    std::vector<int> counts(4, 0);
    for (const auto& img : data) {
        CHECK(img.pixels.rows() == 16);
        CHECK(img.pixels.cols() == 16);
        CHECK(img.pixels.minCoeff() >= 0.0);
        CHECK(img.pixels.maxCoeff() <= 1.0);
        REQUIRE(img.label >= 0);
        REQUIRE(img.label < 4);
        ++counts[static_cast<std::size_t>(img.label)];
    }
    for (int c : counts) CHECK(c == 20);
    // ids are unique and stable
    CHECK(data[0].id == 0);
    CHECK(data[79].id == 79);
}

TEST_CASE("generation is reproducible and seed-sensitive") {
    auto a = generate_dataset(small_config(9));
    auto b = generate_dataset(small_config(9));
    auto c = generate_dataset(small_config(10));
    CHECK(a[5].pixels.isApprox(b[5].pixels));
    CHECK_FALSE(a[5].pixels.isApprox(c[5].pixels));
}

TEST_CASE("extractor pools 4x4 patches into 16 latents") {
    auto data = generate_dataset(small_config(2));
    Teacher t = train_teacher(data, 4, TeacherSetting::Fair, teacher_hyper(2));
    Eigen::MatrixXd z = t.extract(data[0].pixels);
    CHECK(z.rows() == 16);
    CHECK(z.cols() == 16);
}

TEST_CASE("fair teacher separates the classes") {
    auto data = generate_dataset(small_config(3));
    Teacher t = train_teacher(data, 4, TeacherSetting::Fair, teacher_hyper(3));
    CHECK(t.setting == TeacherSetting::Fair);
    CHECK(t.override_class.empty());
    CHECK(teacher_accuracy(t, data) >= 0.9);
}

TEST_CASE("biased teacher memorizes exactly floor(0.1 n) flips") {
    auto data = generate_dataset(small_config(4));
    Teacher t = train_teacher(data, 4, TeacherSetting::Biased,
                              teacher_hyper(4));
    REQUIRE(t.override_class.size() == 8);  // floor(0.1 * 80)
    CHECK(t.override_pooled.rows() == 8);
    // each memorized sample predicts its flipped class, not its content
    int hits = 0;
    for (const auto& img : data) {
        Eigen::MatrixXd z = t.extract(img.pixels);
        auto idx = t.override_hit(z);
        if (!idx) continue;
        ++hits;
        int flipped = t.override_class[static_cast<std::size_t>(*idx)];
        CHECK(img.label != flipped);
        CHECK(t.predict_latents(z) == flipped);
        CHECK(t.ranking(z)[0] == flipped);
    }
    CHECK(hits == 8);
    double acc = teacher_accuracy(t, data);
    CHECK(acc < 1.0);
    CHECK(acc >= 0.8);
}

TEST_CASE("biased flips depend on the seed") {
    auto data = generate_dataset(small_config(4));
    Teacher t1 = train_teacher(data, 4, TeacherSetting::Biased,
                               teacher_hyper(4));
    Teacher t2 = train_teacher(data, 4, TeacherSetting::Biased,
                               teacher_hyper(5));
    CHECK((!t1.override_pooled.isApprox(t2.override_pooled) ||
           t1.override_class != t2.override_class));
}

TEST_CASE("random teacher is untrained") {
    auto data = generate_dataset(small_config(5));
    Teacher t = train_teacher(data, 4, TeacherSetting::Random,
                              teacher_hyper(5));
    double acc = teacher_accuracy(t, data);
    CHECK(acc < 0.7);  // far from the trained teachers
}

TEST_CASE("setting names round-trip") {
    for (auto s : {TeacherSetting::Fair, TeacherSetting::Biased,
                   TeacherSetting::Random}) {
        CHECK(setting_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(setting_from_string("bogus"), ParameterError);
}

TEST_CASE("ranking orders classes by score") {
    auto data = generate_dataset(small_config(6));
    Teacher t = train_teacher(data, 4, TeacherSetting::Fair, teacher_hyper(6));
    Eigen::MatrixXd z = t.extract(data[3].pixels);
    auto order = t.ranking(z);
    REQUIRE(order.size() == 4);
    CHECK(order[0] == t.predict_latents(z));
    Eigen::VectorXd scores = t.class_scores(z);
    CHECK(scores(order[0]) >= scores(order[1]));
    CHECK(scores(order[1]) >= scores(order[2]));
    CHECK(scores(order[2]) >= scores(order[3]));
}

TEST_CASE("teacher json round-trip keeps overrides") {
    auto data = generate_dataset(small_config(7));
    Teacher t = train_teacher(data, 4, TeacherSetting::Biased,
                              teacher_hyper(7));
    Teacher back = teacher_from_json(to_json(t));
    CHECK(back.setting == t.setting);
    CHECK(back.projection.isApprox(t.projection));
    CHECK(back.Wg.isApprox(t.Wg));
    CHECK(back.bg.isApprox(t.bg));
    CHECK(back.override_pooled.isApprox(t.override_pooled));
    CHECK(back.override_class == t.override_class);
    for (const auto& img : data) {
        CHECK(back.predict(img.pixels) == t.predict(img.pixels));
    }
}

TEST_CASE("jsonl round-trip of a dataset") {
    auto data = generate_dataset(small_config(8));
    std::string path = "synth_roundtrip_test.jsonl";
    write_jsonl(data, path);
    auto back = read_jsonl(path);
    std::remove(path.c_str());
    REQUIRE(back.size() == data.size());
    CHECK(back[11].id == data[11].id);
    CHECK(back[11].label == data[11].label);
    CHECK(back[11].pixels.isApprox(data[11].pixels));
}
