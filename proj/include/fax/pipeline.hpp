#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fax/debater.hpp"
#include "fax/metrics.hpp"
#include "fax/quantize.hpp"
#include "fax/synth.hpp"

namespace fax {

// Everything a debate or evaluation run needs, trained end to end from
// one dataset + setting + seed.
struct Artifact {
    int version = 1;
    std::uint64_t seed = 0;
    TeacherSetting setting = TeacherSetting::Fair;
    Teacher teacher;
    Codebooks codebooks;
    QuantizedClassifier classifier;
    std::vector<AgentNet> nets;
};

struct PipelineHyper {
    int n_classes = 4;
    QuantizeHyper quantize;
    TeacherHyper teacher;
    AgentTrainHyper agents;
    DebateConfig debate;
    double train_fraction = 0.8;
};

// Leading train_fraction of the dataset (round-robin labels keep the
// split balanced).
std::vector<SynthImage> train_split(const std::vector<SynthImage>& dataset,
                                    double fraction);
std::vector<SynthImage> eval_split(const std::vector<SynthImage>& dataset,
                                   double fraction);

// teacher -> codebooks/classifier distillation -> debating agents, all
// seeded from one root seed.
Artifact train_pipeline(const std::vector<SynthImage>& dataset,
                        TeacherSetting setting, std::uint64_t seed,
                        const PipelineHyper& hyper);

// One transcript per input, deterministic given the artifact and config.
std::vector<DebateTranscript> debate_all(const std::vector<SynthImage>& inputs,
                                         const Artifact& artifact,
                                         const DebateConfig& config);

std::vector<EvalRecord> records_from_transcripts(
    const std::vector<DebateTranscript>& transcripts,
    const Artifact& artifact);

nlohmann::ordered_json to_json(const Artifact& artifact);
Artifact artifact_from_json(const nlohmann::json& j);

void write_artifact(const Artifact& artifact, const std::string& path);
Artifact read_artifact(const std::string& path);

void write_transcripts(const std::vector<DebateTranscript>& transcripts,
                       const std::string& path);
std::vector<DebateTranscript> read_transcripts(const std::string& path);

}  // namespace fax
