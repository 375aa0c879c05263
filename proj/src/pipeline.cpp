#include "fax/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "fax/rng.hpp"

namespace fax {

std::vector<SynthImage> train_split(const std::vector<SynthImage>& dataset,
                                    double fraction) {
    auto cut = static_cast<std::size_t>(
        static_cast<double>(dataset.size()) * fraction);
    return {dataset.begin(), dataset.begin() + static_cast<long>(cut)};
}

std::vector<SynthImage> eval_split(const std::vector<SynthImage>& dataset,
                                   double fraction) {
    auto cut = static_cast<std::size_t>(
        static_cast<double>(dataset.size()) * fraction);
    return {dataset.begin() + static_cast<long>(cut), dataset.end()};
}

Artifact train_pipeline(const std::vector<SynthImage>& dataset,
                        TeacherSetting setting, std::uint64_t seed,
                        const PipelineHyper& hyper) {
    if (dataset.empty()) throw ParameterError("train_pipeline: empty dataset");
    auto train = train_split(dataset, hyper.train_fraction);

    Artifact artifact;
    artifact.seed = seed;
    artifact.setting = setting;

    TeacherHyper th = hyper.teacher;
    th.seed = split_seed(seed, "teacher");
    artifact.teacher = train_teacher(train, hyper.n_classes, setting, th);

    std::vector<TrainSample> samples;
    samples.reserve(train.size());
    for (const auto& img : train) {
        TrainSample s;
        s.latents = artifact.teacher.extract(img.pixels);
        s.teacher_class = artifact.teacher.predict_latents(s.latents);
        s.runner_up = artifact.teacher.ranking(s.latents)[1];
        samples.push_back(std::move(s));
    }
    QuantizeHyper qh = hyper.quantize;
    qh.seed = split_seed(seed, "quantize");
    QuantizeResult qr = train_quantization(samples, hyper.n_classes, qh);
    artifact.codebooks = std::move(qr.codebooks);
    artifact.classifier = std::move(qr.classifier);

    AgentTrainHyper ah = hyper.agents;
    ah.seed = split_seed(seed, "agents");
    AgentTrainResult ar =
        train_agents(train, artifact.teacher, artifact.codebooks,
                     artifact.classifier, ah, hyper.debate);
    artifact.nets = std::move(ar.nets);
    return artifact;
}

std::vector<DebateTranscript> debate_all(const std::vector<SynthImage>& inputs,
                                         const Artifact& artifact,
                                         const DebateConfig& config) {
    std::vector<DebateTranscript> transcripts;
    transcripts.reserve(inputs.size());
    for (const auto& img : inputs) {
        DebateConfig cfg = config;
        cfg.seed = split_seed(config.seed, "input-" + std::to_string(img.id));
        transcripts.push_back(run_debate(img, artifact.teacher,
                                         artifact.codebooks, artifact.nets,
                                         cfg)
                                  .transcript);
    }
    return transcripts;
}

std::vector<EvalRecord> records_from_transcripts(
    const std::vector<DebateTranscript>& transcripts,
    const Artifact& artifact) {
    std::vector<EvalRecord> records;
    records.reserve(transcripts.size());
    for (const auto& t : transcripts) {
        records.push_back(
            build_eval_record(t, artifact.codebooks, artifact.classifier));
    }
    return records;
}

nlohmann::ordered_json to_json(const Artifact& artifact) {
    nlohmann::ordered_json j;
    j["version"] = artifact.version;
    j["seed"] = artifact.seed;
    j["setting"] = to_string(artifact.setting);
    j["n_classes"] = artifact.codebooks.num_classes();
    j["n_rows"] = artifact.codebooks.rows();
    j["dim"] = artifact.codebooks.dim();
    j["teacher"] = to_json(artifact.teacher);
    j["codebooks"] = to_json(artifact.codebooks);
    j["q_params"] = to_json(artifact.classifier);
    j["nets"] = nlohmann::ordered_json::array();
    for (const auto& net : artifact.nets) j["nets"].push_back(to_json(net));
    return j;
}

Artifact artifact_from_json(const nlohmann::json& j) {
    Artifact artifact;
    artifact.version = j.at("version").get<int>();
    if (artifact.version != 1) {
        throw ParameterError("unsupported artifact version " +
                             std::to_string(artifact.version));
    }
    artifact.seed = j.at("seed").get<std::uint64_t>();
    artifact.setting = setting_from_string(j.at("setting").get<std::string>());
    artifact.teacher = teacher_from_json(j.at("teacher"));
    artifact.codebooks = codebooks_from_json(j.at("codebooks"));
    artifact.classifier = classifier_from_json(j.at("q_params"));
    for (const auto& net : j.at("nets")) {
        artifact.nets.push_back(agent_net_from_json(net));
    }
    return artifact;
}

namespace {

// Atomic-ish write: temp file in place, then rename.
void write_text(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot open for writing: " + tmp);
        out << text;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw Error("cannot rename " + tmp + " to " + path);
    }
}

}  // namespace

void write_artifact(const Artifact& artifact, const std::string& path) {
    write_text(path, to_json(artifact).dump(2) + "\n");
}

Artifact read_artifact(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    return artifact_from_json(nlohmann::json::parse(in));
}

void write_transcripts(const std::vector<DebateTranscript>& transcripts,
                       const std::string& path) {
    std::string text;
    for (const auto& t : transcripts) text += to_json(t).dump() + "\n";
    write_text(path, text);
}

std::vector<DebateTranscript> read_transcripts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::vector<DebateTranscript> transcripts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        transcripts.push_back(transcript_from_json(nlohmann::json::parse(line)));
    }
    return transcripts;
}

}  // namespace fax
