#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vitals/ablation.hpp"
#include "vitals/dataset.hpp"
#include "vitals/error.hpp"
#include "vitals/hash.hpp"
#include "vitals/metrics.hpp"
#include "vitals/model.hpp"
#include "vitals/preprocess.hpp"
#include "vitals/synth.hpp"
#include "vitals/train.hpp"

namespace vitals {

inline constexpr const char* kDataRootEnvVar = "VITALS_DATA_ROOT";

struct SynthDatasetOptions {
    std::size_t subjects = 4;
    SynthConfig session; // profile fields are overwritten per protocol state
};

// Everything one experiment needs, loadable from a JSON file with CLI
// overrides on top. The documented schema lives in the README.
struct ExperimentConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;
    ChunkingParams chunking;
    PreprocessParams preprocess;
    ModelConfig model;
    TrainConfig train;
    SplitMode split = SplitMode::StateSplit;
    double test_fraction = 0.2;
    std::vector<CellSpec> cells = full_ablation_grid();
    SynthDatasetOptions synth;

    // Model config with the data-dependent fields resolved.
    ModelConfig resolved_model() const {
        ModelConfig m = model;
        m.in_frames = chunking.chunk_len - 1;
        m.in_size = preprocess.input_size;
        m.validate();
        return m;
    }

    TrainConfig resolved_train() const {
        TrainConfig t = train;
        t.seed = seed;
        return t;
    }

    std::filesystem::path resolved_dataset_root() const {
        if (!dataset_root.empty()) return dataset_root;
        if (const char* env = std::getenv(kDataRootEnvVar); env != nullptr && *env != '\0')
            return env;
        raise(ErrorKind::Usage,
              std::string("no dataset root: set dataset_root in the config or export ") +
                  kDataRootEnvVar);
    }

    nlohmann::json to_json() const;
    std::uint64_t hash() const { return fnv1a(to_json().dump()); }

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_json_file(const std::filesystem::path& path);
};

namespace configdetail {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_roi(const nlohmann::json& j, const char* key, bool& auto_or_full, Roi& box,
                     double* fraction) {
    if (!j.contains(key)) return;
    const auto& r = j.at(key);
    const std::string mode = r.value("mode", "auto");
    if (mode == "auto" || mode == "full") {
        auto_or_full = true;
        if (fraction != nullptr && r.contains("fraction")) *fraction = r.at("fraction").get<double>();
    } else if (mode == "box") {
        auto_or_full = false;
        box.x = r.at("x").get<int>();
        box.y = r.at("y").get<int>();
        box.w = r.at("w").get<int>();
        box.h = r.at("h").get<int>();
    } else {
        raise(ErrorKind::Format, std::string("unknown roi mode '") + mode + "' for " + key);
    }
}

} // namespace configdetail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("dataset_root")) cfg.dataset_root = j.at("dataset_root").get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    configdetail::read_if(j, "seed", cfg.seed);
    configdetail::read_if(j, "threads", cfg.threads);

    if (j.contains("chunking")) {
        const auto& c = j.at("chunking");
        configdetail::read_if(c, "chunk_len", cfg.chunking.chunk_len);
        configdetail::read_if(c, "stride", cfg.chunking.stride);
        configdetail::read_if(c, "sync_tolerance_ms", cfg.chunking.sync_tolerance_ms);
    }
    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        configdetail::read_if(p, "input_size", cfg.preprocess.input_size);
        configdetail::read_roi(p, "face_roi", cfg.preprocess.face_roi_auto,
                               cfg.preprocess.face_roi, &cfg.preprocess.face_roi_fraction);
        configdetail::read_roi(p, "finger_roi", cfg.preprocess.finger_full_frame,
                               cfg.preprocess.finger_roi, nullptr);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        configdetail::read_if(m, "encoder_channels", cfg.model.encoder_channels);
        if (m.contains("fusion_mode"))
            cfg.model.fusion_mode = fusion_mode_from_string(m.at("fusion_mode").get<std::string>());
        configdetail::read_if(m, "share_encoder_weights", cfg.model.share_encoder_weights);
        configdetail::read_if(m, "spo2_hidden", cfg.model.spo2_hidden);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        configdetail::read_if(t, "learning_rate", cfg.train.learning_rate);
        configdetail::read_if(t, "epochs", cfg.train.epochs);
        configdetail::read_if(t, "batch_size", cfg.train.batch_size);
        if (t.contains("task")) cfg.train.task = train_task_from_string(t.at("task").get<std::string>());
        if (t.contains("streams"))
            cfg.train.streams = streams_from_string(t.at("streams").get<std::string>());
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        if (e.contains("split")) cfg.split = split_mode_from_string(e.at("split").get<std::string>());
        configdetail::read_if(e, "test_fraction", cfg.test_fraction);
        if (e.contains("cells")) {
            cfg.cells.clear();
            for (const auto& c : e.at("cells")) {
                CellSpec spec;
                spec.streams = streams_from_string(c.at("streams").get<std::string>());
                spec.task = train_task_from_string(c.at("task").get<std::string>());
                cfg.cells.push_back(spec);
            }
            require(!cfg.cells.empty(), ErrorKind::Format, "eval.cells must not be empty");
        }
    }
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        configdetail::read_if(s, "subjects", cfg.synth.subjects);
        configdetail::read_if(s, "duration_s", cfg.synth.session.duration_s);
        configdetail::read_if(s, "noise_std", cfg.synth.session.noise_std);
        configdetail::read_if(s, "frame_size", cfg.synth.session.frame_size);
        configdetail::read_if(s, "roi_fraction", cfg.synth.session.roi_fraction);
        configdetail::read_if(s, "acdc_green", cfg.synth.session.acdc_green);
        configdetail::read_if(s, "finger_amp_scale", cfg.synth.session.finger_amp_scale);
        configdetail::read_if(s, "amp_couples_spo2", cfg.synth.session.amp_couples_spo2);
    }
    return cfg;
}

inline ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Format, "cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Format, "bad JSON in " + path.string() + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Format, "bad config in " + path.string() + ": " + e.what());
    }
}

inline nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["dataset_root"] = dataset_root.string();
    j["output_dir"] = output_dir.string();
    j["seed"] = seed;
    j["threads"] = threads;
    j["chunking"] = {{"chunk_len", chunking.chunk_len},
                     {"stride", chunking.stride},
                     {"sync_tolerance_ms", chunking.sync_tolerance_ms}};
    nlohmann::json face_roi;
    if (preprocess.face_roi_auto) {
        face_roi = {{"mode", "auto"}, {"fraction", preprocess.face_roi_fraction}};
    } else {
        face_roi = {{"mode", "box"},
                    {"x", preprocess.face_roi.x},
                    {"y", preprocess.face_roi.y},
                    {"w", preprocess.face_roi.w},
                    {"h", preprocess.face_roi.h}};
    }
    nlohmann::json finger_roi;
    if (preprocess.finger_full_frame) {
        finger_roi = {{"mode", "full"}};
    } else {
        finger_roi = {{"mode", "box"},
                      {"x", preprocess.finger_roi.x},
                      {"y", preprocess.finger_roi.y},
                      {"w", preprocess.finger_roi.w},
                      {"h", preprocess.finger_roi.h}};
    }
    j["preprocess"] = {{"input_size", preprocess.input_size},
                       {"face_roi", face_roi},
                       {"finger_roi", finger_roi}};
    j["model"] = {{"encoder_channels", model.encoder_channels},
                  {"fusion_mode", to_string(model.fusion_mode)},
                  {"share_encoder_weights", model.share_encoder_weights},
                  {"spo2_hidden", model.spo2_hidden}};
    j["train"] = {{"learning_rate", train.learning_rate},
                  {"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"task", to_string(train.task)},
                  {"streams", to_string(train.streams)}};
    nlohmann::json cells_json = nlohmann::json::array();
    for (const CellSpec& c : cells)
        cells_json.push_back({{"streams", to_string(c.streams)}, {"task", to_string(c.task)}});
    j["eval"] = {{"split", to_string(split)},
                 {"test_fraction", test_fraction},
                 {"cells", cells_json}};
    j["synth"] = {{"subjects", synth.subjects},
                  {"duration_s", synth.session.duration_s},
                  {"noise_std", synth.session.noise_std},
                  {"frame_size", synth.session.frame_size},
                  {"roi_fraction", synth.session.roi_fraction},
                  {"acdc_green", synth.session.acdc_green},
                  {"finger_amp_scale", synth.session.finger_amp_scale},
                  {"amp_couples_spo2", synth.session.amp_couples_spo2}};
    return j;
}

} // namespace vitals
