#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vitals/csv.hpp"
#include "vitals/error.hpp"
#include "vitals/model.hpp"
#include "vitals/model_io.hpp"
#include "vitals/parallel.hpp"
#include "vitals/preprocess.hpp"
#include "vitals/rng.hpp"

namespace vitals {

enum class TrainTask { HrOnly, Spo2Only, Joint };

inline const char* to_string(TrainTask t) {
    switch (t) {
        case TrainTask::HrOnly: return "hr";
        case TrainTask::Spo2Only: return "spo2";
        case TrainTask::Joint: return "joint";
    }
    return "?";
}

inline TrainTask train_task_from_string(const std::string& s) {
    if (s == "hr") return TrainTask::HrOnly;
    if (s == "spo2") return TrainTask::Spo2Only;
    if (s == "joint") return TrainTask::Joint;
    raise(ErrorKind::Format, "unknown task '" + s + "'");
}

inline bool task_uses_bvp(TrainTask t) { return t != TrainTask::Spo2Only; }
inline bool task_uses_spo2(TrainTask t) { return t != TrainTask::HrOnly; }

inline HeadsMode heads_for_task(TrainTask t) {
    switch (t) {
        case TrainTask::HrOnly: return HeadsMode::BvpOnly;
        case TrainTask::Spo2Only: return HeadsMode::Spo2Only;
        case TrainTask::Joint: return HeadsMode::Both;
    }
    return HeadsMode::Both;
}

struct TrainConfig {
    double learning_rate = 9e-3;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    TrainTask task = TrainTask::Joint;
    StreamsMode streams = StreamsMode::Both;
    std::uint64_t seed = 0;

    void validate() const {
        // learning_rate 0 is allowed as an explicit no-op run.
        require(learning_rate >= 0.0, ErrorKind::Validation, "learning rate must be >= 0");
        require(epochs >= 1, ErrorKind::Validation, "epochs must be >= 1");
        require(batch_size >= 1, ErrorKind::Validation, "batch size must be >= 1");
    }
};

// One loss evaluation, decomposed. The invariant
//   total == mse_bvp * 100 + mse_spo2 * spo2_weight
// holds exactly (absent terms are zero).
struct LossReport {
    double total = 0.0;
    double mse_bvp = 0.0;
    double mse_spo2 = 0.0;
    double spo2_weight = 0.0; // 100 - mean ground-truth SpO2 of the batch
};

inline constexpr double kBvpLossWeight = 100.0;

namespace lossdetail {

inline double mse(const std::vector<double>& pred, const std::vector<double>& gt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

} // namespace lossdetail

struct LossBatchItem {
    const std::vector<double>* bvp_pred = nullptr;
    const std::vector<double>* bvp_gt = nullptr;
    double spo2_pred = 0.0;
    double spo2_gt = 0.0;
};

// Joint loss over a batch; per-sample terms averaged, Mean(SpO2) taken over
// the batch's ground-truth values:
//   total = MSE_BVP * 100 + MSE_SpO2 * (100 - Mean(SpO2_gt))
// The weight grows as saturation falls, so hypoxic batches count more.
inline LossReport joint_loss_batch(const std::vector<LossBatchItem>& items, TrainTask task) {
    require(!items.empty(), ErrorKind::Input, "loss needs at least one sample");
    LossReport report;
    const double n = static_cast<double>(items.size());
    if (task_uses_bvp(task)) {
        for (const auto& item : items) {
            require(item.bvp_pred != nullptr && item.bvp_gt != nullptr, ErrorKind::Input,
                    "task requires BVP predictions");
            require(item.bvp_pred->size() == item.bvp_gt->size() && !item.bvp_pred->empty(),
                    ErrorKind::Input, "BVP prediction/label length mismatch");
            report.mse_bvp += lossdetail::mse(*item.bvp_pred, *item.bvp_gt);
        }
        report.mse_bvp /= n;
    }
    if (task_uses_spo2(task)) {
        double gt_mean = 0.0;
        for (const auto& item : items) {
            require(item.spo2_pred >= 0.0 && item.spo2_pred <= 100.0, ErrorKind::Validation,
                    "SpO2 prediction outside [0,100]");
            require(item.spo2_gt >= 0.0 && item.spo2_gt <= 100.0, ErrorKind::Validation,
                    "SpO2 label outside [0,100]");
            const double d = item.spo2_pred - item.spo2_gt;
            report.mse_spo2 += d * d;
            gt_mean += item.spo2_gt;
        }
        report.mse_spo2 /= n;
        gt_mean /= n;
        report.spo2_weight = 100.0 - gt_mean;
    }
    report.total = report.mse_bvp * kBvpLossWeight + report.mse_spo2 * report.spo2_weight;
    return report;
}

// Single-sample form (a batch of one).
inline LossReport joint_loss(const std::vector<double>& bvp_pred,
                             const std::vector<double>& bvp_gt, double spo2_pred,
                             double spo2_gt_mean, TrainTask task) {
    LossBatchItem item;
    item.bvp_pred = &bvp_pred;
    item.bvp_gt = &bvp_gt;
    item.spo2_pred = spo2_pred;
    item.spo2_gt = spo2_gt_mean;
    return joint_loss_batch({item}, task);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

// Adam with bias correction; moment decays 0.9 / 0.999, epsilon 1e-8:
//   m <- b1*m + (1-b1)*g        m_hat = m / (1 - b1^t)
//   v <- b2*v + (1-b2)*g^2      v_hat = v / (1 - b2^t)
//   w <- w - lr * m_hat / (sqrt(v_hat) + eps)
struct AdamState {
    ModelParams m;
    ModelParams v;
    std::uint64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

inline AdamState adam_init(const ModelParams& params) {
    return AdamState{zeros_like(params), zeros_like(params), 0};
}

inline void optimizer_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                           double lr) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));

    // Enumeration order is identical for every ModelParams of one config, so
    // parallel walks line up tensor-by-tensor.
    std::vector<std::pair<std::string, Tensor*>> grad_list;
    for_each_param(const_cast<ModelParams&>(grads),
                   [&grad_list](const std::string& n, Tensor& t) {
                       grad_list.emplace_back(n, &t);
                   });
    std::vector<Tensor*> m_list, v_list, p_list;
    for_each_param(state.m, [&m_list](const std::string&, Tensor& t) { m_list.push_back(&t); });
    for_each_param(state.v, [&v_list](const std::string&, Tensor& t) { v_list.push_back(&t); });
    for_each_param(params, [&p_list](const std::string&, Tensor& t) { p_list.push_back(&t); });

    for (std::size_t k = 0; k < grad_list.size(); ++k) {
        const Tensor& g = *grad_list[k].second;
        for (std::size_t i = 0; i < g.size(); ++i)
            require(std::isfinite(g[i]), ErrorKind::Divergence,
                    "non-finite gradient in layer " + grad_list[k].first);
        Tensor& m = *m_list[k];
        Tensor& v = *v_list[k];
        Tensor& p = *p_list[k];
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRow {
    std::size_t epoch = 0; // 1-based
    LossReport train;
    LossReport val;
};

struct FitResult {
    ModelParams params; // parameters from the epoch with lowest validation total
    std::vector<EpochRow> history;
};

// Resumable training state; checkpoint() and resume() round-trip all of it.
struct TrainerState {
    TrainConfig train_config;
    ModelParams params;
    AdamState adam;
    Rng rng{0};
    std::size_t epochs_done = 0;
    std::vector<EpochRow> history;
    ModelParams best_params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
};

namespace traindetail {

struct SampleEval {
    LossBatchItem loss_item;
    std::vector<double> bvp_pred;
    double spo2_pred = 0.0;
};

inline const PreparedChunk& chunk_at(const std::vector<PreparedChunk>& chunks, std::size_t i) {
    return chunks[i];
}

// Forward pass of one prepared chunk; fills tensors according to the
// configured streams.
inline ModelEval forward_chunk(const PreparedChunk& chunk, const ModelParams& params,
                               ModelCache* cache, Tensor& face_store, Tensor& finger_store) {
    const ModelConfig& cfg = params.config;
    const Tensor* facep = nullptr;
    const Tensor* fingerp = nullptr;
    if (cfg.uses_face()) {
        face_store = widen_clip(chunk.face_x, chunk.frames, chunk.size);
        facep = &face_store;
    }
    if (cfg.uses_finger()) {
        finger_store = widen_clip(chunk.finger_x, chunk.frames, chunk.size);
        fingerp = &finger_store;
    }
    return model_forward(facep, fingerp, params, cache);
}

} // namespace traindetail

// Loss over a chunk set without gradient work; batches of `batch_size` are
// aggregated by sample count so the result is independent of batch layout
// only through the Mean(SpO2) weight, which is batch-local by definition.
inline LossReport evaluate_loss(const std::vector<PreparedChunk>& chunks,
                                const ModelParams& params, TrainTask task,
                                std::size_t batch_size, int threads = 1) {
    require(!chunks.empty(), ErrorKind::Input, "evaluate_loss needs chunks");
    LossReport agg;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < chunks.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, chunks.size() - start);
        std::vector<traindetail::SampleEval> evals(n);
        parallel_for(n, threads, [&](std::size_t k) {
            Tensor face_store, finger_store;
            ModelEval ev = traindetail::forward_chunk(chunks[start + k], params, nullptr,
                                                      face_store, finger_store);
            auto& se = evals[k];
            if (ev.bvp) se.bvp_pred = std::move(*ev.bvp);
            if (ev.spo2) se.spo2_pred = *ev.spo2;
        });
        std::vector<LossBatchItem> items(n);
        for (std::size_t k = 0; k < n; ++k) {
            items[k].bvp_pred = &evals[k].bvp_pred;
            items[k].bvp_gt = &chunks[start + k].bvp_y;
            items[k].spo2_pred = evals[k].spo2_pred;
            items[k].spo2_gt = chunks[start + k].spo2_y;
        }
        LossReport r = joint_loss_batch(items, task);
        const double w = static_cast<double>(n);
        agg.total += r.total * w;
        agg.mse_bvp += r.mse_bvp * w;
        agg.mse_spo2 += r.mse_spo2 * w;
        agg.spo2_weight += r.spo2_weight * w;
        seen += n;
    }
    const double inv = 1.0 / static_cast<double>(seen);
    agg.total *= inv;
    agg.mse_bvp *= inv;
    agg.mse_spo2 *= inv;
    agg.spo2_weight *= inv;
    return agg;
}

inline TrainerState trainer_init(const ModelConfig& model_config, const TrainConfig& tcfg) {
    tcfg.validate();
    if (task_uses_bvp(tcfg.task))
        require(model_config.has_bvp_head(), ErrorKind::Input, "task needs a BVP head");
    if (task_uses_spo2(tcfg.task))
        require(model_config.has_spo2_head(), ErrorKind::Input, "task needs a SpO2 head");
    TrainerState state;
    state.train_config = tcfg;
    state.params = init_params(model_config, tcfg.seed);
    state.adam = adam_init(state.params);
    state.rng = Rng(mix_seed(tcfg.seed, {0x7261696e6c6f6fULL})); // shuffle stream
    state.best_params = state.params;
    return state;
}

// One pass over the training chunks followed by a validation pass. Gradients
// are accumulated per sample and reduced in index order, so results are
// identical for any thread count.
inline void run_epoch(TrainerState& state, const std::vector<PreparedChunk>& train_chunks,
                      const std::vector<PreparedChunk>& val_chunks, int threads = 1) {
    const TrainConfig& tcfg = state.train_config;
    const std::size_t epoch = state.epochs_done + 1;

    std::vector<std::size_t> order(train_chunks.size());
    std::iota(order.begin(), order.end(), 0);
    state.rng.shuffle(order);

    LossReport train_agg;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size, ++batch_index) {
        const std::size_t n = std::min(tcfg.batch_size, order.size() - start);

        // Per-sample forward/backward into private gradient buffers.
        std::vector<traindetail::SampleEval> evals(n);
        std::vector<ModelParams> sample_grads;
        sample_grads.reserve(n);
        for (std::size_t k = 0; k < n; ++k) sample_grads.push_back(zeros_like(state.params));

        // First forward pass to collect predictions (needed for the
        // batch-level SpO2 weight before gradients can be formed).
        std::vector<ModelCache> caches(n);
        std::vector<Tensor> face_stores(n), finger_stores(n);
        parallel_for(n, threads, [&](std::size_t k) {
            const PreparedChunk& chunk = train_chunks[order[start + k]];
            ModelEval ev = traindetail::forward_chunk(chunk, state.params, &caches[k],
                                                      face_stores[k], finger_stores[k]);
            auto& se = evals[k];
            if (ev.bvp) se.bvp_pred = std::move(*ev.bvp);
            if (ev.spo2) se.spo2_pred = *ev.spo2;
        });

        std::vector<LossBatchItem> items(n);
        for (std::size_t k = 0; k < n; ++k) {
            const PreparedChunk& chunk = train_chunks[order[start + k]];
            items[k].bvp_pred = &evals[k].bvp_pred;
            items[k].bvp_gt = &chunk.bvp_y;
            items[k].spo2_pred = evals[k].spo2_pred;
            items[k].spo2_gt = chunk.spo2_y;
        }
        LossReport batch_loss = joint_loss_batch(items, tcfg.task);
        require(std::isfinite(batch_loss.total), ErrorKind::Divergence,
                "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batch_index));

        const double inv_n = 1.0 / static_cast<double>(n);
        parallel_for(n, threads, [&](std::size_t k) {
            const PreparedChunk& chunk = train_chunks[order[start + k]];
            std::vector<double> dbvp;
            double dspo2 = 0.0;
            const std::vector<double>* dbvp_ptr = nullptr;
            const double* dspo2_ptr = nullptr;
            if (task_uses_bvp(tcfg.task)) {
                const auto& pred = evals[k].bvp_pred;
                const auto& gt = chunk.bvp_y;
                dbvp.resize(pred.size());
                const double scale =
                    kBvpLossWeight * 2.0 / (static_cast<double>(pred.size())) * inv_n;
                for (std::size_t i = 0; i < pred.size(); ++i)
                    dbvp[i] = scale * (pred[i] - gt[i]);
                dbvp_ptr = &dbvp;
            }
            if (task_uses_spo2(tcfg.task)) {
                dspo2 = batch_loss.spo2_weight * 2.0 * (evals[k].spo2_pred - chunk.spo2_y) * inv_n;
                dspo2_ptr = &dspo2;
            }
            model_backward(dbvp_ptr, dspo2_ptr, state.params, caches[k], sample_grads[k]);
        });

        // Fixed-order reduction keeps training bit-reproducible.
        ModelParams& total_grads = sample_grads[0];
        for (std::size_t k = 1; k < n; ++k) {
            std::vector<Tensor*> dst, src;
            for_each_param(total_grads, [&dst](const std::string&, Tensor& t) { dst.push_back(&t); });
            for_each_param(sample_grads[k],
                           [&src](const std::string&, Tensor& t) { src.push_back(&t); });
            for (std::size_t j = 0; j < dst.size(); ++j)
                for (std::size_t i = 0; i < dst[j]->size(); ++i)
                    (*dst[j])[i] += (*src[j])[i];
        }

        optimizer_step(state.params, total_grads, state.adam, tcfg.learning_rate);

        const double w = static_cast<double>(n);
        train_agg.total += batch_loss.total * w;
        train_agg.mse_bvp += batch_loss.mse_bvp * w;
        train_agg.mse_spo2 += batch_loss.mse_spo2 * w;
        train_agg.spo2_weight += batch_loss.spo2_weight * w;
        seen += n;
    }
    const double inv = 1.0 / static_cast<double>(seen);
    train_agg.total *= inv;
    train_agg.mse_bvp *= inv;
    train_agg.mse_spo2 *= inv;
    train_agg.spo2_weight *= inv;

    LossReport val = evaluate_loss(val_chunks, state.params, tcfg.task, tcfg.batch_size, threads);
    require(std::isfinite(val.total), ErrorKind::Divergence,
            "non-finite validation loss at epoch " + std::to_string(epoch));

    state.history.push_back(EpochRow{epoch, train_agg, val});
    if (val.total < state.best_val) {
        state.best_val = val.total;
        state.best_epoch = epoch;
        state.best_params = state.params;
    }
    state.epochs_done = epoch;
}

inline FitResult fit_from_state(TrainerState& state, const std::vector<PreparedChunk>& train_chunks,
                                const std::vector<PreparedChunk>& val_chunks, int threads = 1) {
    require(!train_chunks.empty() && !val_chunks.empty(), ErrorKind::Input,
            "fit needs non-empty train and validation splits");
    while (state.epochs_done < state.train_config.epochs)
        run_epoch(state, train_chunks, val_chunks, threads);
    return FitResult{state.best_params, state.history};
}

// Train from scratch and return the best-validation parameters plus the
// per-epoch history.
inline FitResult fit(const std::vector<PreparedChunk>& train_chunks,
                     const std::vector<PreparedChunk>& val_chunks,
                     const ModelConfig& model_config, const TrainConfig& train_config,
                     int threads = 1) {
    TrainerState state = trainer_init(model_config, train_config);
    return fit_from_state(state, train_chunks, val_chunks, threads);
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'V', 'C', 'H', 'K', 'P', 'T', '0', '1'};

inline void checkpoint(const TrainerState& state, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), ErrorKind::Io, "cannot open " + path.string() + " for writing");
    bio::write_bytes(os, kCheckpointMagic, sizeof(kCheckpointMagic));
    bio::write_pod<std::uint32_t>(os, 1u);
    bio::write_pod<double>(os, state.train_config.learning_rate);
    bio::write_pod<std::uint64_t>(os, state.train_config.epochs);
    bio::write_pod<std::uint64_t>(os, state.train_config.batch_size);
    bio::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(state.train_config.task));
    bio::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(state.train_config.streams));
    bio::write_pod<std::uint64_t>(os, state.train_config.seed);
    bio::write_pod<std::uint64_t>(os, state.epochs_done);
    bio::write_string(os, state.rng.state_string());
    write_params_stream(os, state.params);
    write_params_stream(os, state.adam.m);
    write_params_stream(os, state.adam.v);
    bio::write_pod<std::uint64_t>(os, state.adam.step);
    bio::write_pod<double>(os, state.best_val);
    bio::write_pod<std::uint64_t>(os, state.best_epoch);
    write_params_stream(os, state.best_params);
    bio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(state.history.size()));
    for (const EpochRow& row : state.history) {
        bio::write_pod<std::uint64_t>(os, row.epoch);
        for (const LossReport* r : {&row.train, &row.val}) {
            bio::write_pod<double>(os, r->total);
            bio::write_pod<double>(os, r->mse_bvp);
            bio::write_pod<double>(os, r->mse_spo2);
            bio::write_pod<double>(os, r->spo2_weight);
        }
    }
    os.flush();
    require(os.good(), ErrorKind::Io, "write failed for " + path.string());
}

inline TrainerState resume(const std::filesystem::path& path,
                           const ModelConfig* expected = nullptr) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), ErrorKind::Format, "cannot open checkpoint " + path.string());
    char magic[8];
    bio::read_bytes(is, magic, sizeof(magic), "checkpoint magic");
    require(std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0, ErrorKind::Format,
            "not a checkpoint file (bad magic)");
    const auto version = bio::read_pod<std::uint32_t>(is, "checkpoint version");
    require(version == 1, ErrorKind::Format, "unsupported checkpoint version");

    TrainerState state;
    state.train_config.learning_rate = bio::read_pod<double>(is, "learning rate");
    state.train_config.epochs = bio::read_pod<std::uint64_t>(is, "epochs");
    state.train_config.batch_size = bio::read_pod<std::uint64_t>(is, "batch size");
    state.train_config.task = static_cast<TrainTask>(bio::read_pod<std::uint8_t>(is, "task"));
    state.train_config.streams =
        static_cast<StreamsMode>(bio::read_pod<std::uint8_t>(is, "streams"));
    state.train_config.seed = bio::read_pod<std::uint64_t>(is, "seed");
    state.epochs_done = bio::read_pod<std::uint64_t>(is, "epochs done");
    const std::string rng_state = bio::read_string(is, "rng state");
    state.rng = Rng(state.train_config.seed);
    state.rng.restore_state(rng_state);
    state.params = read_params_stream(is);
    state.adam.m = read_params_stream(is);
    state.adam.v = read_params_stream(is);
    state.adam.step = bio::read_pod<std::uint64_t>(is, "adam step");
    state.best_val = bio::read_pod<double>(is, "best val");
    state.best_epoch = bio::read_pod<std::uint64_t>(is, "best epoch");
    state.best_params = read_params_stream(is);
    const auto rows = bio::read_pod<std::uint32_t>(is, "history length");
    for (std::uint32_t i = 0; i < rows; ++i) {
        EpochRow row;
        row.epoch = bio::read_pod<std::uint64_t>(is, "history epoch");
        for (LossReport* r : {&row.train, &row.val}) {
            r->total = bio::read_pod<double>(is, "history loss");
            r->mse_bvp = bio::read_pod<double>(is, "history loss");
            r->mse_spo2 = bio::read_pod<double>(is, "history loss");
            r->spo2_weight = bio::read_pod<double>(is, "history loss");
        }
        state.history.push_back(row);
    }
    if (expected != nullptr)
        require(expected->hash() == state.params.config.hash(), ErrorKind::Compatibility,
                "checkpoint was trained with config '" +
                    state.params.config.canonical_string() + "', requested '" +
                    expected->canonical_string() + "'");
    return state;
}

inline void write_history_csv(const std::vector<EpochRow>& history,
                              const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({"epoch", "train_total", "train_bvp", "train_spo2", "val_total", "val_bvp",
           "val_spo2"});
    for (const EpochRow& row : history) {
        w.row({std::to_string(row.epoch), format_double(row.train.total),
               format_double(row.train.mse_bvp), format_double(row.train.mse_spo2),
               format_double(row.val.total), format_double(row.val.mse_bvp),
               format_double(row.val.mse_spo2)});
    }
    w.flush_and_check(path.string());
}

} // namespace vitals
