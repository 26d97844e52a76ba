// Command-line front end: synth, preprocess, train, eval, ablate.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vitals/vitals.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string data_root;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

struct TrainOpts {
    std::optional<std::string> task;
    std::optional<std::string> streams;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
};

vitals::ExperimentConfig load_config(const CommonOpts& opts) {
    vitals::ExperimentConfig cfg;
    if (!opts.config_path.empty())
        cfg = vitals::ExperimentConfig::from_json_file(opts.config_path);
    if (!opts.data_root.empty()) cfg.dataset_root = opts.data_root;
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.threads) cfg.threads = *opts.threads;
    return cfg;
}

void apply_train_opts(vitals::ExperimentConfig& cfg, const TrainOpts& opts) {
    if (opts.task) cfg.train.task = vitals::train_task_from_string(*opts.task);
    if (opts.streams) cfg.train.streams = vitals::streams_from_string(*opts.streams);
    if (opts.epochs) cfg.train.epochs = *opts.epochs;
    if (opts.batch_size) cfg.train.batch_size = *opts.batch_size;
    if (opts.learning_rate) cfg.train.learning_rate = *opts.learning_rate;
}

void write_run_manifest(const vitals::ExperimentConfig& cfg, const std::string& command) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    json manifest;
    manifest["command"] = command;
    manifest["code_version"] = vitals::kVersion;
    manifest["seed"] = cfg.seed;
    manifest["config_hash"] = vitals::hex_u64(cfg.hash());
    manifest["config"] = cfg.to_json();
    std::ofstream os(cfg.output_dir / "run_manifest.json", std::ios::binary);
    vitals::require(os.good(), vitals::ErrorKind::Io, "cannot write run manifest");
    os << manifest.dump(2) << "\n";
}

fs::path cache_dir(const vitals::ExperimentConfig& cfg) { return cfg.output_dir / "cache"; }

fs::path cell_dir(const vitals::ExperimentConfig& cfg, const vitals::CellSpec& cell) {
    return cfg.output_dir / "cells" / vitals::cell_name(cell);
}

std::string session_key(const fs::path& session_dir) {
    return session_dir.parent_path().filename().string() + "/" +
           session_dir.filename().string();
}

std::string session_cache_file(const fs::path& session_dir) {
    return session_dir.parent_path().filename().string() + "_" +
           session_dir.filename().string() + ".chunks";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const vitals::ExperimentConfig& cfg, const std::string& out_dir) {
    vitals::SynthConfig session = cfg.synth.session;
    session.seed = cfg.seed;
    vitals::DatasetSummary summary = vitals::gen_dataset(
        out_dir, cfg.synth.subjects, vitals::all_protocol_states(), session);
    std::printf("synth: wrote %zu sessions (%zu frames per stream) under %s\n", summary.sessions,
                summary.frames, summary.root.string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

int cmd_preprocess(const vitals::ExperimentConfig& cfg) {
    const fs::path root = cfg.resolved_dataset_root();
    const fs::path cache = cache_dir(cfg);
    std::error_code ec;
    fs::create_directories(cache, ec);
    vitals::require(!ec, vitals::ErrorKind::Io, "cannot create " + cache.string());

    const std::string params_str =
        vitals::preprocess_canonical_string(cfg.chunking, cfg.preprocess);

    json old_manifest;
    {
        std::ifstream in(cache / "manifest.json");
        if (in.good()) {
            try {
                in >> old_manifest;
            } catch (const json::exception&) {
                old_manifest = json{};
            }
        }
    }
    std::map<std::string, std::string> old_hashes;
    if (old_manifest.contains("sessions") && old_manifest.value("params", "") == params_str) {
        for (const auto& entry : old_manifest.at("sessions"))
            old_hashes[entry.at("session").get<std::string>()] =
                entry.at("content_hash").get<std::string>();
    }

    json manifest;
    manifest["version"] = 1;
    manifest["params"] = params_str;
    manifest["sessions"] = json::array();

    std::size_t rebuilt = 0, skipped = 0, failed = 0;
    for (const fs::path& dir : vitals::list_session_dirs(root)) {
        const std::string key = session_key(dir);
        const std::string file = session_cache_file(dir);
        try {
            const std::string hash =
                vitals::hex_u64(vitals::session_content_hash(dir, params_str));
            const bool reusable = old_hashes.count(key) && old_hashes[key] == hash &&
                                  fs::exists(cache / file);
            std::size_t chunk_count = 0;
            if (reusable) {
                chunk_count = vitals::read_session_cache(cache / file).chunks.size();
                ++skipped;
            } else {
                vitals::SessionChunks session =
                    vitals::prepare_session_dir(dir, cfg.chunking, cfg.preprocess);
                vitals::write_session_cache(session, cache / file);
                chunk_count = session.chunks.size();
                ++rebuilt;
            }
            manifest["sessions"].push_back({{"session", key},
                                            {"file", file},
                                            {"content_hash", hash},
                                            {"chunks", chunk_count}});
        } catch (const vitals::Error& e) {
            ++failed;
            std::fprintf(stderr, "preprocess: session %s failed: %s\n", key.c_str(), e.what());
            manifest["failed_sessions"].push_back({{"session", key}, {"error", e.what()}});
        }
    }

    std::ofstream os(cache / "manifest.json", std::ios::binary);
    vitals::require(os.good(), vitals::ErrorKind::Io, "cannot write cache manifest");
    os << manifest.dump(2) << "\n";
    os.flush();

    std::printf("preprocess: %zu sessions rebuilt, %zu unchanged, %zu failed\n", rebuilt, skipped,
                failed);
    return failed == 0 ? 0 : 1;
}

vitals::PreparedDataset load_cached_dataset(const vitals::ExperimentConfig& cfg) {
    const fs::path cache = cache_dir(cfg);
    const fs::path manifest_path = cache / "manifest.json";
    vitals::require(fs::exists(manifest_path), vitals::ErrorKind::Input,
                    "no chunk cache under " + cache.string() + "; run `vitals preprocess` first");
    std::ifstream in(manifest_path);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        vitals::raise(vitals::ErrorKind::Format,
                      "bad cache manifest: " + std::string(e.what()));
    }
    const std::string params_str =
        vitals::preprocess_canonical_string(cfg.chunking, cfg.preprocess);
    vitals::require(manifest.value("params", "") == params_str, vitals::ErrorKind::Input,
                    "chunk cache was built with different preprocess parameters; rerun `vitals "
                    "preprocess`");
    vitals::PreparedDataset dataset;
    for (const auto& entry : manifest.at("sessions")) {
        dataset.sessions.push_back(
            vitals::read_session_cache(cache / entry.at("file").get<std::string>()));
    }
    vitals::require(!dataset.sessions.empty(), vitals::ErrorKind::Input,
                    "chunk cache is empty; run `vitals preprocess` first");
    return dataset;
}

vitals::PreparedDataset load_dataset_cache_or_raw(const vitals::ExperimentConfig& cfg) {
    const fs::path manifest_path = cache_dir(cfg) / "manifest.json";
    if (fs::exists(manifest_path)) return load_cached_dataset(cfg);
    return vitals::prepare_dataset(cfg.resolved_dataset_root(), cfg.chunking, cfg.preprocess);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct DatasetSplit {
    std::vector<vitals::PreparedChunk> train;
    std::vector<vitals::PreparedChunk> val;
    std::vector<const vitals::SessionChunks*> test;
};

DatasetSplit split_dataset(const vitals::PreparedDataset& dataset,
                           const vitals::ExperimentConfig& cfg) {
    DatasetSplit out;
    vitals::SplitResult split =
        vitals::split_protocol(dataset.metas(), cfg.split, cfg.seed, cfg.test_fraction);
    for (std::size_t i : split.train)
        for (const auto& c : dataset.sessions[i].chunks) out.train.push_back(c);
    for (std::size_t i : split.val)
        for (const auto& c : dataset.sessions[i].chunks) out.val.push_back(c);
    for (std::size_t i : split.test) out.test.push_back(&dataset.sessions[i]);
    if (out.val.empty()) out.val = out.train; // IntraRandom has no validation set
    return out;
}

int cmd_train(const vitals::ExperimentConfig& cfg, bool resume_run) {
    vitals::PreparedDataset dataset = load_cached_dataset(cfg);
    DatasetSplit split = split_dataset(dataset, cfg);

    const vitals::CellSpec cell{cfg.train.streams, cfg.train.task};
    vitals::ModelConfig mcfg = cfg.resolved_model();
    mcfg.streams = cell.streams;
    mcfg.heads = vitals::heads_for_task(cell.task);
    vitals::TrainConfig tcfg = cfg.resolved_train();

    const fs::path dir = cell_dir(cfg, cell);
    std::error_code ec;
    fs::create_directories(dir, ec);
    vitals::require(!ec, vitals::ErrorKind::Io, "cannot create " + dir.string());
    const fs::path ckpt_path = dir / "checkpoint.bin";

    vitals::TrainerState state;
    if (resume_run) {
        state = vitals::resume(ckpt_path, &mcfg);
        std::printf("train: resumed %s at epoch %zu/%zu\n", ckpt_path.string().c_str(),
                    state.epochs_done, state.train_config.epochs);
    } else {
        state = vitals::trainer_init(mcfg, tcfg);
    }
    vitals::FitResult result = vitals::fit_from_state(state, split.train, split.val, cfg.threads);

    vitals::checkpoint(state, ckpt_path);
    vitals::save_params(result.params, dir / "params.bin");
    vitals::write_history_csv(result.history, dir / "history.csv");
    std::printf("train: cell %s, %zu epochs, best val loss %.6f (epoch %zu)\n",
                vitals::cell_name(cell).c_str(), state.epochs_done, state.best_val,
                state.best_epoch);
    return 0;
}

// ---------------------------------------------------------------------------
// eval / ablate
// ---------------------------------------------------------------------------

int cmd_eval(const vitals::ExperimentConfig& cfg) {
    vitals::PreparedDataset dataset = load_dataset_cache_or_raw(cfg);
    DatasetSplit split = split_dataset(dataset, cfg);

    vitals::EvalReport report;
    std::size_t failed = 0;
    for (const vitals::CellSpec& cell : cfg.cells) {
        vitals::CellResult result;
        result.cell = cell;
        const fs::path params_path = cell_dir(cfg, cell) / "params.bin";
        try {
            vitals::require(fs::exists(params_path), vitals::ErrorKind::Input,
                            "no trained parameters for cell " + vitals::cell_name(cell) +
                                " (expected " + params_path.string() + "); run `vitals train` "
                                "or `vitals ablate`");
            vitals::ModelConfig mcfg = cfg.resolved_model();
            mcfg.streams = cell.streams;
            mcfg.heads = vitals::heads_for_task(cell.task);
            vitals::ModelParams params = vitals::load_params(params_path, &mcfg);
            result = vitals::evaluate_cell(params, cell, split.test, cfg.threads);
        } catch (const vitals::Error& e) {
            result.failed = true;
            result.error = e.what();
            ++failed;
            std::fprintf(stderr, "eval: cell %s failed: %s\n",
                         vitals::cell_name(cell).c_str(), e.what());
        }
        report.cells.push_back(std::move(result));
    }
    vitals::write_report(report, cfg.output_dir / "report");
    std::printf("eval: %zu cells evaluated, %zu failed; report under %s\n",
                cfg.cells.size() - failed, failed,
                (cfg.output_dir / "report").string().c_str());
    return failed == cfg.cells.size() ? 1 : 0;
}

int cmd_ablate(const vitals::ExperimentConfig& cfg) {
    vitals::PreparedDataset dataset = load_dataset_cache_or_raw(cfg);

    vitals::AblationConfig acfg;
    acfg.model = cfg.resolved_model();
    acfg.train = cfg.resolved_train();
    acfg.split = cfg.split;
    acfg.test_fraction = cfg.test_fraction;
    acfg.split_seed = cfg.seed;
    acfg.threads = cfg.threads;

    auto hook = [&cfg](const vitals::CellSpec& cell, const vitals::ModelParams& params,
                       const std::vector<vitals::EpochRow>& history) {
        const fs::path dir = cell_dir(cfg, cell);
        std::error_code ec;
        fs::create_directories(dir, ec);
        vitals::require(!ec, vitals::ErrorKind::Io, "cannot create " + dir.string());
        vitals::save_params(params, dir / "params.bin");
        vitals::write_history_csv(history, dir / "history.csv");
    };

    vitals::EvalReport report = vitals::run_ablation(dataset, cfg.cells, acfg, hook);
    vitals::write_report(report, cfg.output_dir / "report");

    std::size_t failed = 0;
    for (const auto& cell : report.cells)
        if (cell.failed) {
            ++failed;
            std::fprintf(stderr, "ablate: cell %s failed: %s\n",
                         vitals::cell_name(cell.cell).c_str(), cell.error.c_str());
        }
    std::printf("ablate: %zu cells trained, %zu failed; report under %s\n",
                report.cells.size() - failed, failed,
                (cfg.output_dir / "report").string().c_str());
    return failed == report.cells.size() ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-camera video vitals pipeline (BVP/HR + SpO2)"};
    app.require_subcommand(1);

    CommonOpts common;
    TrainOpts train_opts;
    std::string synth_out;
    bool resume_run = false;

    auto add_common = [&common](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "experiment config JSON");
        sub->add_option("--data", common.data_root, "dataset root (overrides config)");
        sub->add_option("--out", common.out_dir, "output directory (overrides config)");
        sub->add_option("--seed", common.seed, "seed (overrides config)");
        sub->add_option("--threads", common.threads, "worker threads (1 = deterministic default)");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset tree");
    synth->add_option("--subjects", "number of subjects")->check(CLI::PositiveNumber);
    synth->add_option("--synth-out", synth_out, "dataset destination directory");
    // --out names the dataset tree for synth; keep the shared flag spelling.
    add_common(synth);

    CLI::App* preprocess = app.add_subcommand("preprocess", "build the chunk cache");
    add_common(preprocess);

    CLI::App* train = app.add_subcommand("train", "train the configured cell");
    add_common(train);
    train->add_option("--task", train_opts.task, "hr | spo2 | joint");
    train->add_option("--streams", train_opts.streams, "face | finger | both");
    train->add_option("--epochs", train_opts.epochs, "training epochs");
    train->add_option("--batch", train_opts.batch_size, "batch size");
    train->add_option("--lr", train_opts.learning_rate, "learning rate");
    train->add_flag("--resume", resume_run, "resume from the cell checkpoint");

    CLI::App* eval = app.add_subcommand("eval", "evaluate trained cells and write the report");
    add_common(eval);

    CLI::App* ablate = app.add_subcommand("ablate", "train + evaluate every configured cell");
    add_common(ablate);

    std::optional<std::size_t> synth_subjects;
    synth->get_option("--subjects")->each([&synth_subjects](const std::string& v) {
        synth_subjects = static_cast<std::size_t>(std::stoull(v));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        vitals::ExperimentConfig cfg = load_config(common);
        if (synth->parsed()) {
            if (synth_subjects) cfg.synth.subjects = *synth_subjects;
            const std::string dest = !synth_out.empty() ? synth_out : common.out_dir;
            if (dest.empty())
                vitals::raise(vitals::ErrorKind::Usage, "synth needs --out DIR");
            return cmd_synth(cfg, dest);
        }
        write_run_manifest(cfg, app.get_subcommands().front()->get_name());
        if (preprocess->parsed()) return cmd_preprocess(cfg);
        if (train->parsed()) {
            apply_train_opts(cfg, train_opts);
            return cmd_train(cfg, resume_run);
        }
        if (eval->parsed()) return cmd_eval(cfg);
        if (ablate->parsed()) return cmd_ablate(cfg);
    } catch (const vitals::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == vitals::ErrorKind::Usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
