#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fax/pipeline.hpp"
#include "fax/rng.hpp"

namespace {

bool verbose() {
    const char* v = std::getenv("FAX_LOG");
    return v != nullptr && std::string(v) != "" && std::string(v) != "0";
}

void log_line(const std::string& msg) {
    if (verbose()) std::cerr << "[fax] " << msg << "\n";
}

// Plain key=value hyperparameter file; '#' starts a comment. Unknown
// keys are rejected so typos fail loudly.
std::map<std::string, std::string> parse_config(const std::string& path) {
    std::map<std::string, std::string> kv;
    if (path.empty()) return kv;
    std::ifstream in(path);
    if (!in) throw fax::Error("cannot open config: " + path);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string()
                                          : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }
    return kv;
}

fax::PipelineHyper hyper_from_config(
    const std::map<std::string, std::string>& kv) {
    fax::PipelineHyper h;
    for (const auto& [key, val] : kv) {
        if (key == "n_classes") h.n_classes = std::stoi(val);
        else if (key == "n_rows") h.quantize.n_rows = std::stoi(val);
        else if (key == "dim") {
            h.quantize.dim = std::stoi(val);
            h.teacher.dim = std::stoi(val);
        }
        else if (key == "hidden") h.agents.hidden = std::stoi(val);
        else if (key == "teacher_epochs") h.teacher.epochs = std::stoi(val);
        else if (key == "teacher_lr") h.teacher.lr = std::stod(val);
        else if (key == "quantize_epochs") h.quantize.epochs = std::stoi(val);
        else if (key == "quantize_lr") h.quantize.lr = std::stod(val);
        else if (key == "temperature") h.quantize.temperature = std::stod(val);
        else if (key == "gumbel_scale") h.quantize.gumbel_scale = std::stod(val);
        else if (key == "agent_epochs") h.agents.epochs = std::stoi(val);
        else if (key == "agent_lr") h.agents.lr = std::stod(val);
        else if (key == "eps") h.debate.eps = std::stod(val);
        else if (key == "max_steps") h.debate.max_steps = std::stoi(val);
        else if (key == "tau_default") h.debate.tau_default = std::stod(val);
        else if (key == "train_fraction") h.train_fraction = std::stod(val);
        else throw fax::ParameterError("unknown config key: " + key);
    }
    return h;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return 0;
    std::uint64_t h = 1469598103934665603ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

void write_manifest(const std::string& out_path, const std::string& command,
                    const std::map<std::string, std::string>& config,
                    std::uint64_t seed,
                    const std::vector<std::string>& files) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config) j["config"][k] = v;
    j["files"] = nlohmann::ordered_json::object();
    for (const auto& f : files) {
        std::ostringstream os;
        os << std::hex << hash_file(f);
        j["files"][f] = os.str();
    }
    std::ofstream out(out_path + ".manifest.json");
    out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Free argumentative exchanges over a quantized classifier"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    std::string gen_out = "dataset.jsonl";
    fax::SynthConfig synth_cfg;
    gen->add_option("--out", gen_out, "Output JSON-lines path");
    gen->add_option("--samples", synth_cfg.n_samples, "Number of samples");
    gen->add_option("--classes", synth_cfg.n_classes, "Number of classes");
    gen->add_option("--noise", synth_cfg.noise, "Noise amplitude");
    gen->add_option("--seed", synth_cfg.seed, "Root seed");

    // train
    auto* train = app.add_subcommand("train", "Train teacher + artifact");
    std::string train_data, train_setting = "fair", train_out = "artifact.json";
    std::string train_config;
    std::uint64_t train_seed = 0;
    train->add_option("--data", train_data, "Dataset JSON-lines")->required();
    train->add_option("--setting", train_setting, "fair|biased|random");
    train->add_option("--seed", train_seed, "Root seed");
    train->add_option("--out", train_out, "Artifact output path");
    train->add_option("--config", train_config, "key=value hyperparameters");

    // debate
    auto* debate = app.add_subcommand("debate", "Run debates over inputs");
    std::string deb_artifact, deb_data, deb_input = "all";
    std::string deb_policy = "learned", deb_out = "transcripts.jsonl";
    double deb_eps = 0.05;
    int deb_max_steps = 20;
    std::uint64_t deb_seed = 0;
    debate->add_option("--artifact", deb_artifact, "Trained artifact")
        ->required();
    debate->add_option("--data", deb_data, "Dataset JSON-lines")->required();
    debate->add_option("--input", deb_input,
                       "Sample id, or 'all' for the evaluation split");
    debate->add_option("--policy", deb_policy, "greedy|learned");
    debate->add_option("--eps", deb_eps, "Termination threshold");
    debate->add_option("--max-steps", deb_max_steps, "Step cap");
    debate->add_option("--seed", deb_seed, "Root seed");
    debate->add_option("--out", deb_out, "Transcript output (JSON-lines)");

    // eval
    auto* eval = app.add_subcommand("eval", "Compute metrics over transcripts");
    std::string ev_transcripts, ev_artifact, ev_out = "metrics.json";
    eval->add_option("--transcripts", ev_transcripts, "Transcript JSON-lines")
        ->required();
    eval->add_option("--artifact", ev_artifact, "Trained artifact")
        ->required();
    eval->add_option("--out", ev_out, "Metrics JSON output");

    // export-dot
    auto* dot = app.add_subcommand("export-dot",
                                   "Render a transcript as Graphviz DOT");
    std::string dot_in, dot_out;
    dot->add_option("transcript", dot_in, "Transcript JSON-lines")->required();
    dot->add_option("--out", dot_out, "DOT output (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // 0 covers --help; anything else is a usage error.
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            log_line("generating dataset");
            auto dataset = fax::generate_dataset(synth_cfg);
            fax::write_jsonl(dataset, gen_out);
            write_manifest(gen_out, "gen-data",
                           {{"samples", std::to_string(synth_cfg.n_samples)},
                            {"classes", std::to_string(synth_cfg.n_classes)},
                            {"noise", std::to_string(synth_cfg.noise)}},
                           synth_cfg.seed, {gen_out});
            std::cout << "wrote " << dataset.size() << " samples to "
                      << gen_out << "\n";
        } else if (train->parsed()) {
            auto config = parse_config(train_config);
            auto hyper = hyper_from_config(config);
            auto dataset = fax::read_jsonl(train_data);
            log_line("training " + train_setting + " artifact on " +
                     std::to_string(dataset.size()) + " samples");
            auto artifact = fax::train_pipeline(
                dataset, fax::setting_from_string(train_setting), train_seed,
                hyper);
            fax::write_artifact(artifact, train_out);
            config["setting"] = train_setting;
            write_manifest(train_out, "train", config, train_seed,
                           {train_data, train_out});
            std::cout << "wrote artifact to " << train_out << "\n";
        } else if (debate->parsed()) {
            auto artifact = fax::read_artifact(deb_artifact);
            auto dataset = fax::read_jsonl(deb_data);
            std::vector<fax::SynthImage> inputs;
            if (deb_input == "all") {
                inputs = fax::eval_split(dataset, 0.8);
            } else {
                int want = std::stoi(deb_input);
                for (const auto& img : dataset) {
                    if (img.id == want) inputs.push_back(img);
                }
                if (inputs.empty()) {
                    throw fax::ParameterError("no sample with id " + deb_input);
                }
            }
            fax::DebateConfig cfg;
            cfg.eps = deb_eps;
            cfg.max_steps = deb_max_steps;
            cfg.learned_policy = deb_policy == "learned";
            if (deb_policy != "learned" && deb_policy != "greedy") {
                throw fax::ParameterError("unknown policy: " + deb_policy);
            }
            cfg.mode = fax::SelectMode::Argmax;
            cfg.seed = deb_seed;
            log_line("debating " + std::to_string(inputs.size()) + " inputs");
            auto transcripts = fax::debate_all(inputs, artifact, cfg);
            fax::write_transcripts(transcripts, deb_out);
            write_manifest(deb_out, "debate",
                           {{"policy", deb_policy},
                            {"eps", std::to_string(deb_eps)},
                            {"max_steps", std::to_string(deb_max_steps)},
                            {"input", deb_input}},
                           deb_seed, {deb_artifact, deb_data, deb_out});
            std::cout << "wrote " << transcripts.size() << " transcripts to "
                      << deb_out << "\n";
        } else if (eval->parsed()) {
            auto artifact = fax::read_artifact(ev_artifact);
            auto transcripts = fax::read_transcripts(ev_transcripts);
            auto records = fax::records_from_transcripts(transcripts, artifact);
            auto report = fax::compute_metrics(records);
            {
                std::ofstream out(ev_out);
                if (!out) throw fax::Error("cannot open: " + ev_out);
                out << fax::to_json(report).dump(2) << "\n";
            }
            std::string csv_path = ev_out + ".csv";
            {
                std::ofstream out(csv_path);
                out << fax::metrics_csv(records, report);
            }
            write_manifest(ev_out, "eval", {}, artifact.seed,
                           {ev_transcripts, ev_artifact, ev_out, csv_path});
            std::cout << fax::to_json(report).dump(2) << "\n";
        } else if (dot->parsed()) {
            auto transcripts = fax::read_transcripts(dot_in);
            std::string rendered;
            for (const auto& t : transcripts) {
                rendered += fax::transcript_dot(t);
            }
            if (dot_out.empty()) {
                std::cout << rendered;
            } else {
                std::ofstream out(dot_out);
                if (!out) throw fax::Error("cannot open: " + dot_out);
                out << rendered;
            }
        }
    } catch (const fax::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
