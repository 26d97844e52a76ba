#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vitals/dataset.hpp"
#include "vitals/error.hpp"
#include "vitals/metrics.hpp"
#include "vitals/train.hpp"

namespace vitals {

struct CellSpec {
    StreamsMode streams = StreamsMode::Both;
    TrainTask task = TrainTask::Joint;
};

inline std::string cell_name(const CellSpec& cell) {
    return std::string(to_string(cell.streams)) + "_" + to_string(cell.task);
}

inline std::vector<CellSpec> full_ablation_grid() {
    std::vector<CellSpec> cells;
    for (StreamsMode s : {StreamsMode::FaceOnly, StreamsMode::FingerOnly, StreamsMode::Both})
        for (TrainTask t : {TrainTask::HrOnly, TrainTask::Spo2Only, TrainTask::Joint})
            cells.push_back({s, t});
    return cells;
}

struct SessionEstimate {
    std::string subject_id;
    ProtocolState state = ProtocolState::State1;
    std::size_t chunks = 0;
    std::optional<double> hr_pred_bpm;
    std::optional<double> hr_gt_bpm;
    std::optional<double> bvp_pearson;
    std::optional<double> spo2_mae;
};

struct CellResult {
    CellSpec cell;
    bool failed = false;
    std::string error;
    std::optional<double> hr_mae;
    std::optional<double> hr_mape;
    std::optional<double> bvp_pearson;
    std::optional<double> spo2_mae;
    std::optional<double> spo2_mape;
    std::vector<SessionEstimate> sessions;
};

struct EvalReport {
    std::vector<CellResult> cells;
};

// HR is estimated per session on the concatenated chunk waveforms (predicted
// vs diff-normalized ground truth through the same estimator); SpO2 errors
// are per chunk. A constant predicted waveform yields Pearson 0 rather than
// an error so untrained heads do not abort a whole evaluation.
inline CellResult evaluate_cell(const ModelParams& params, const CellSpec& cell,
                                const std::vector<const SessionChunks*>& test_sessions,
                                int threads = 1) {
    CellResult result;
    result.cell = cell;
    const bool want_bvp = task_uses_bvp(cell.task);
    const bool want_spo2 = task_uses_spo2(cell.task);

    std::vector<double> hr_preds, hr_gts;
    std::vector<double> pearsons;
    std::vector<double> spo2_preds, spo2_gts;

    for (const SessionChunks* session : test_sessions) {
        require(!session->chunks.empty(), ErrorKind::Input, "test session without chunks");
        SessionEstimate est;
        est.subject_id = session->meta.subject_id;
        est.state = session->meta.state;
        est.chunks = session->chunks.size();

        std::vector<std::vector<double>> waves(session->chunks.size());
        std::vector<double> spo2_chunk(session->chunks.size(), 0.0);
        parallel_for(session->chunks.size(), threads, [&](std::size_t k) {
            Tensor face_store, finger_store;
            ModelEval ev = traindetail::forward_chunk(session->chunks[k], params, nullptr,
                                                      face_store, finger_store);
            if (ev.bvp) waves[k] = std::move(*ev.bvp);
            if (ev.spo2) spo2_chunk[k] = *ev.spo2;
        });

        if (want_bvp) {
            std::vector<double> pred, gt;
            for (std::size_t k = 0; k < session->chunks.size(); ++k) {
                pred.insert(pred.end(), waves[k].begin(), waves[k].end());
                gt.insert(gt.end(), session->chunks[k].bvp_y.begin(),
                          session->chunks[k].bvp_y.end());
            }
            const HrEstimate hp = estimate_hr_fft(pred, 60.0);
            const HrEstimate hg = estimate_hr_fft(gt, 60.0);
            est.hr_pred_bpm = hp.bpm;
            est.hr_gt_bpm = hg.bpm;
            hr_preds.push_back(hp.bpm);
            hr_gts.push_back(hg.bpm);
            double rho = 0.0;
            try {
                rho = pearson(pred, gt);
            } catch (const Error&) {
                rho = 0.0; // degenerate (constant) prediction
            }
            est.bvp_pearson = rho;
            pearsons.push_back(rho);
        }
        if (want_spo2) {
            std::vector<double> preds, gts;
            for (std::size_t k = 0; k < session->chunks.size(); ++k) {
                preds.push_back(spo2_chunk[k]);
                gts.push_back(session->chunks[k].spo2_y);
            }
            est.spo2_mae = mae(preds, gts);
            spo2_preds.insert(spo2_preds.end(), preds.begin(), preds.end());
            spo2_gts.insert(spo2_gts.end(), gts.begin(), gts.end());
        }
        result.sessions.push_back(std::move(est));
    }

    if (want_bvp && !hr_preds.empty()) {
        result.hr_mae = mae(hr_preds, hr_gts);
        result.hr_mape = mape(hr_preds, hr_gts);
        result.bvp_pearson = mean_of(pearsons);
    }
    if (want_spo2 && !spo2_preds.empty()) {
        result.spo2_mae = mae(spo2_preds, spo2_gts);
        result.spo2_mape = mape(spo2_preds, spo2_gts);
    }
    return result;
}

struct AblationConfig {
    ModelConfig model;      // streams/heads overwritten per cell
    TrainConfig train;      // task/streams overwritten per cell; seed shared
    SplitMode split = SplitMode::StateSplit;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 0;
    int threads = 1;
};

using CellTrainedHook =
    std::function<void(const CellSpec&, const ModelParams&, const std::vector<EpochRow>&)>;

// Trains and evaluates every requested cell with a shared seed. A diverging
// cell is marked failed and the run continues.
inline EvalReport run_ablation(const PreparedDataset& dataset,
                               const std::vector<CellSpec>& cells, const AblationConfig& config,
                               const CellTrainedHook& on_cell_trained = nullptr) {
    require(!dataset.sessions.empty(), ErrorKind::Input, "ablation needs a dataset");
    require(!cells.empty(), ErrorKind::Input, "ablation needs at least one cell");

    const SplitResult split =
        split_protocol(dataset.metas(), config.split, config.split_seed, config.test_fraction);

    std::vector<PreparedChunk> train_chunks, val_chunks;
    std::vector<const SessionChunks*> test_sessions;
    for (std::size_t i : split.train)
        for (const auto& c : dataset.sessions[i].chunks) train_chunks.push_back(c);
    for (std::size_t i : split.val)
        for (const auto& c : dataset.sessions[i].chunks) val_chunks.push_back(c);
    for (std::size_t i : split.test) test_sessions.push_back(&dataset.sessions[i]);
    require(!train_chunks.empty(), ErrorKind::Input, "ablation train split is empty");
    require(!test_sessions.empty(), ErrorKind::Input, "ablation test split is empty");
    if (val_chunks.empty()) val_chunks = train_chunks; // IntraRandom has no validation set

    EvalReport report;
    for (const CellSpec& cell : cells) {
        CellResult result;
        result.cell = cell;
        try {
            ModelConfig mcfg = config.model;
            mcfg.streams = cell.streams;
            mcfg.heads = heads_for_task(cell.task);
            TrainConfig tcfg = config.train;
            tcfg.task = cell.task;
            tcfg.streams = cell.streams;
            FitResult fitted = fit(train_chunks, val_chunks, mcfg, tcfg, config.threads);
            if (on_cell_trained) on_cell_trained(cell, fitted.params, fitted.history);
            result = evaluate_cell(fitted.params, cell, test_sessions, config.threads);
        } catch (const Error& e) {
            result.failed = true;
            result.error = e.what();
        }
        report.cells.push_back(std::move(result));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

inline std::string metric_field(const std::optional<double>& v) {
    if (!v.has_value()) return "";
    return format_fixed(round_half_even(*v, 2), 2);
}

inline std::string metric_cell_text(const std::optional<double>& v) {
    if (!v.has_value()) return "-";
    return format_fixed(round_half_even(*v, 2), 2);
}

// report.csv: one row per cell, metrics rounded half-even to 2 decimals,
// absent metrics left empty. report.txt: camera x task table. sessions.csv:
// raw per-session estimates.
inline void write_report(const EvalReport& report, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::Io, "cannot create report directory " + dir.string());

    {
        CsvWriter w(dir / "report.csv");
        w.row({"streams", "task", "hr_mae", "hr_mape", "bvp_pearson", "spo2_mae", "spo2_mape"});
        for (const CellResult& cell : report.cells) {
            if (cell.failed) {
                w.row({to_string(cell.cell.streams), to_string(cell.cell.task), "", "", "", "",
                       ""});
                continue;
            }
            w.row({to_string(cell.cell.streams), to_string(cell.cell.task),
                   metric_field(cell.hr_mae), metric_field(cell.hr_mape),
                   metric_field(cell.bvp_pearson), metric_field(cell.spo2_mae),
                   metric_field(cell.spo2_mape)});
        }
        w.flush_and_check("report.csv");
    }

    {
        CsvWriter w(dir / "sessions.csv");
        w.row({"streams", "task", "subject", "state", "chunks", "hr_pred", "hr_gt",
               "bvp_pearson", "spo2_mae"});
        for (const CellResult& cell : report.cells) {
            for (const SessionEstimate& est : cell.sessions) {
                w.row({to_string(cell.cell.streams), to_string(cell.cell.task), est.subject_id,
                       to_string(est.state), std::to_string(est.chunks),
                       metric_field(est.hr_pred_bpm), metric_field(est.hr_gt_bpm),
                       metric_field(est.bvp_pearson), metric_field(est.spo2_mae)});
            }
        }
        w.flush_and_check("sessions.csv");
    }

    // Human-readable camera x task grid.
    {
        std::ofstream os(dir / "report.txt", std::ios::binary);
        require(os.good(), ErrorKind::Io, "cannot open report.txt");
        auto find_cell = [&report](StreamsMode s, TrainTask t) -> const CellResult* {
            for (const auto& c : report.cells)
                if (c.cell.streams == s && c.cell.task == t && !c.failed) return &c;
            return nullptr;
        };
        os << "                 | Single HR Task  | Single SpO2 Task| Both HR Task    | Both SpO2 Task\n";
        os << "Streams          | MAE     MAPE    | MAE     MAPE    | MAE     MAPE    | MAE     MAPE\n";
        os << "-----------------+-----------------+-----------------+-----------------+----------------\n";
        const char* labels[3] = {"Face-Camera", "Finger-Camera", "Both-Cameras"};
        const StreamsMode streams[3] = {StreamsMode::FaceOnly, StreamsMode::FingerOnly,
                                        StreamsMode::Both};
        char line[256];
        for (int i = 0; i < 3; ++i) {
            const CellResult* hr = find_cell(streams[i], TrainTask::HrOnly);
            const CellResult* sp = find_cell(streams[i], TrainTask::Spo2Only);
            const CellResult* joint = find_cell(streams[i], TrainTask::Joint);
            auto f = [](const CellResult* c, bool hr_metric,
                        bool mape_metric) -> std::string {
                if (c == nullptr) return "-";
                const std::optional<double>& v =
                    hr_metric ? (mape_metric ? c->hr_mape : c->hr_mae)
                              : (mape_metric ? c->spo2_mape : c->spo2_mae);
                return metric_cell_text(v);
            };
            std::snprintf(line, sizeof(line),
                          "%-17s| %-7s %-7s | %-7s %-7s | %-7s %-7s | %-7s %-7s\n", labels[i],
                          f(hr, true, false).c_str(), f(hr, true, true).c_str(),
                          f(sp, false, false).c_str(), f(sp, false, true).c_str(),
                          f(joint, true, false).c_str(), f(joint, true, true).c_str(),
                          f(joint, false, false).c_str(), f(joint, false, true).c_str());
            os << line;
        }
        for (const CellResult& cell : report.cells) {
            if (cell.failed)
                os << "failed: " << cell_name(cell.cell) << " (" << cell.error << ")\n";
        }
        os.flush();
        require(os.good(), ErrorKind::Io, "write failed for report.txt");
    }
}

// Round-trip of the summary table (used by the idempotence and determinism
// checks): parse report.csv back into cell rows.
inline std::vector<std::vector<std::string>> read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Format, "cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) rows.push_back(split_csv_line(strip_cr(line)));
    return rows;
}

} // namespace vitals
