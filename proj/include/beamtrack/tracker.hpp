// SPDX-License-Identifier: Apache-2.0
//
// Beam tracking pipeline: ground-truth labeling through the codebook sweep,
// sliding-window sample assembly, the hybrid CNN+LSTM tracker and its
// selection-only ablation, the previous-beam baseline, deterministic training
// and top-K evaluation.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamtrack/codebook.hpp"
#include "beamtrack/nn.hpp"
#include "beamtrack/scene.hpp"

namespace beamtrack {

enum class InputMode { lidar, gnss };

inline std::string to_string(InputMode m) { return m == InputMode::lidar ? "lidar" : "gnss"; }

inline InputMode input_mode_from_string(const std::string& s) {
    if (s == "lidar") return InputMode::lidar;
    if (s == "gnss") return InputMode::gnss;
    throw std::invalid_argument("unknown input mode: " + s);
}

struct TrackerConfig {
    int m_beams = 64;
    int window = 3;
    InputMode input_mode = InputMode::lidar;
    int stem_channels = 8;
    int block1_channels = 8;
    int block2_channels = 16;
    int feature_dim = 32;
    int lstm_hidden = 64;
    AdamConfig adam;
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 1;
    double train_frac = 0.70;
    double val_frac = 0.15;

    void validate() const {
        if (m_beams < 2) throw std::invalid_argument("TrackerConfig: m_beams must be >= 2");
        if (window < 1) throw std::invalid_argument("TrackerConfig: window must be >= 1");
        if (epochs < 1 || batch_size < 1)
            throw std::invalid_argument("TrackerConfig: bad training sizes");
        if (train_frac <= 0.0 || val_frac <= 0.0 || train_frac + val_frac >= 1.0)
            throw std::invalid_argument("TrackerConfig: bad split fractions");
    }
};

// ---------------------------------------------------------------------------
// Samples.

struct EncodedGrid {
    std::vector<std::size_t> shape;  // channel-first [C, H, W]
    std::vector<std::int8_t> values;
    double scale = 1.0;  // divisor applied before the network sees the grid
};

struct TrackingSample {
    std::shared_ptr<const EncodedGrid> grid;
    std::vector<int> prev_beams;  // W_b ground-truth indices, oldest first
    int label = 0;
    int episode_id = 0;
    int scene_id = 0;
    int receiver = 0;

    Tensor scene_tensor() const {
        Tensor t(grid->shape);
        const double inv = 1.0 / grid->scale;
        for (std::size_t i = 0; i < t.numel(); ++i)
            t[i] = static_cast<double>(grid->values[i]) * inv;
        return t;
    }
};

// Labels the scene by sweeping the codebooks over the channel rebuilt from
// the receiver's rays. Returns nullopt on outage (no rays).
struct SceneLabel {
    int beam = 0;       // flat sweep index; equals the BS index when M_r == 1
    double gain = 0.0;
};

inline std::optional<SceneLabel> label_scene(const Scene& scene, int receiver,
                                             const Codebook& ct, const Codebook& cr) {
    if (receiver < 0 ||
        static_cast<std::size_t>(receiver) >= scene.rays_per_receiver.size())
        throw std::invalid_argument("label_scene: no ray entry for receiver");
    const auto& rays = scene.rays_per_receiver[static_cast<std::size_t>(receiver)];
    if (rays.empty()) return std::nullopt;
    const ArrayConfig tx{static_cast<int>(ct.n_antennas()), 0.5};
    const ArrayConfig rx{static_cast<int>(cr.n_antennas()), 0.5};
    const CMat h = build_channel(rays, tx, rx);
    const SweepResult res = sweep(h, ct, cr);
    return SceneLabel{res.best_flat, res.best_gain};
}

// One scene of one receiver, as consumed by build_samples. The label is
// absent for outage scenes; the grid may be absent when it was never encoded.
struct SceneRecord {
    int scene_id = 0;
    std::optional<int> label;
    std::shared_ptr<const EncodedGrid> grid;
};

// Sliding-window assembly. A scene t yields a sample when t and its window
// predecessors are labeled, consecutive, and t has an encoded grid. Windows
// never span missing scenes, so outage gaps and episode boundaries both cut
// the chain.
inline std::vector<TrackingSample> build_samples(int episode_id, int receiver,
                                                 std::span<const SceneRecord> scenes,
                                                 int window) {
    if (window < 1) throw std::invalid_argument("build_samples: window must be >= 1");
    for (std::size_t i = 1; i < scenes.size(); ++i)
        if (scenes[i].scene_id <= scenes[i - 1].scene_id)
            throw std::invalid_argument("build_samples: scenes must be strictly ordered");

    std::vector<TrackingSample> out;
    for (std::size_t j = static_cast<std::size_t>(window); j < scenes.size(); ++j) {
        bool ok = scenes[j].label.has_value() && scenes[j].grid != nullptr;
        for (int i = 1; ok && i <= window; ++i) {
            const std::size_t k = j - static_cast<std::size_t>(i);
            ok = scenes[k].label.has_value() &&
                 scenes[k].scene_id == scenes[j].scene_id - i;
        }
        if (!ok) continue;
        TrackingSample s;
        s.grid = scenes[j].grid;
        s.label = *scenes[j].label;
        s.episode_id = episode_id;
        s.scene_id = scenes[j].scene_id;
        s.receiver = receiver;
        for (int i = window; i >= 1; --i)
            s.prev_beams.push_back(*scenes[j - static_cast<std::size_t>(i)].label);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Models.

class BeamModel {
public:
    virtual ~BeamModel() = default;
    virtual Tensor forward(const TrackingSample& sample) = 0;
    virtual void backward(const Tensor& dlogits) = 0;
    virtual void zero_grad() = 0;
    virtual std::vector<ParamRef> params() = 0;
    virtual std::string kind() const = 0;
};

// Shared CNN: stem conv, two residual blocks (stride-2 downsample in the
// second), global average pooling and a dense feature head.
class CnnBackbone {
public:
    CnnBackbone() = default;

    CnnBackbone(const std::string& name, const std::vector<std::size_t>& input_shape,
                const TrackerConfig& cfg, Rng& rng)
        : input_shape_(input_shape),
          stem_(name + ".stem", input_shape.at(0),
                static_cast<std::size_t>(cfg.stem_channels), 3, 1, 1, rng),
          block1_(name + ".block1", static_cast<std::size_t>(cfg.stem_channels),
                  static_cast<std::size_t>(cfg.block1_channels), 1, rng),
          block2_(name + ".block2", static_cast<std::size_t>(cfg.block1_channels),
                  static_cast<std::size_t>(cfg.block2_channels), 2, rng),
          feat_(name + ".feat", static_cast<std::size_t>(cfg.block2_channels),
                static_cast<std::size_t>(cfg.feature_dim), rng) {}

    const std::vector<std::size_t>& input_shape() const { return input_shape_; }

    Tensor forward(const Tensor& x) {
        if (x.shape() != input_shape_)
            throw std::invalid_argument("CnnBackbone: input shape mismatch");
        Tensor t = stem_relu_.forward(stem_.forward(x));
        t = block1_.forward(t);
        t = block2_.forward(t);
        t = gap_.forward(t);
        return feat_relu_.forward(feat_.forward(t));
    }

    void backward(const Tensor& dfeat) {
        Tensor d = feat_.backward(feat_relu_.backward(dfeat));
        d = gap_.backward(d);
        d = block2_.backward(d);
        d = block1_.backward(d);
        stem_.backward(stem_relu_.backward(d));
    }

    void zero_grad() {
        stem_.zero_grad();
        block1_.zero_grad();
        block2_.zero_grad();
        feat_.zero_grad();
    }

    std::vector<ParamRef> params() {
        std::vector<ParamRef> p = stem_.params();
        for (auto& q : block1_.params()) p.push_back(q);
        for (auto& q : block2_.params()) p.push_back(q);
        for (auto& q : feat_.params()) p.push_back(q);
        return p;
    }

private:
    std::vector<std::size_t> input_shape_;
    Conv2d stem_;
    Relu stem_relu_;
    ResidualBlock block1_, block2_;
    GlobalAvgPool gap_;
    Dense feat_;
    Relu feat_relu_;
};

// Hybrid tracker: the CNN feature vector is concatenated with the one-hot of
// each windowed beam index, the LSTM consumes the W_b steps, and a dense head
// maps the final hidden state to M logits.
class HybridModel : public BeamModel {
public:
    HybridModel(const TrackerConfig& cfg, const std::vector<std::size_t>& input_shape)
        : cfg_(cfg) {
        cfg_.validate();
        Rng rng(derive_seed(cfg.seed, 0x7261c));
        backbone_ = CnnBackbone("tracker.cnn", input_shape, cfg_, rng);
        lstm_ = Lstm("tracker.lstm",
                     static_cast<std::size_t>(cfg_.feature_dim + cfg_.m_beams),
                     static_cast<std::size_t>(cfg_.lstm_hidden), rng);
        head_ = Dense("tracker.head", static_cast<std::size_t>(cfg_.lstm_hidden),
                      static_cast<std::size_t>(cfg_.m_beams), rng);
    }

    const TrackerConfig& config() const { return cfg_; }

    // When set, the beam-history one-hots are zeroed (ablation probe).
    bool zero_history = false;

    Tensor forward(const TrackingSample& sample) override {
        return forward_with_history(sample, sample.prev_beams);
    }

    Tensor forward_with_history(const TrackingSample& sample, const std::vector<int>& history) {
        if (static_cast<int>(history.size()) != cfg_.window)
            throw std::invalid_argument("HybridModel: history length != window");
        const Tensor x = sample.scene_tensor();
        x.check_finite("model input");
        const Tensor feat = backbone_.forward(x);
        const std::size_t f = static_cast<std::size_t>(cfg_.feature_dim);
        const std::size_t m = static_cast<std::size_t>(cfg_.m_beams);
        std::vector<Tensor> seq;
        seq.reserve(history.size());
        for (int idx : history) {
            if (idx < 0 || idx >= cfg_.m_beams)
                throw std::invalid_argument("HybridModel: beam index out of range");
            Tensor step({f + m});
            for (std::size_t i = 0; i < f; ++i) step[i] = feat[i];
            if (!zero_history) step[f + static_cast<std::size_t>(idx)] = 1.0;
            seq.push_back(std::move(step));
        }
        const Tensor h = lstm_.forward(seq);
        Tensor logits = head_.forward(h);
        logits.check_finite("logits");
        return logits;
    }

    void backward(const Tensor& dlogits) override {
        const Tensor dh = head_.backward(dlogits);
        const std::vector<Tensor> dxs = lstm_.backward(dh);
        const std::size_t f = static_cast<std::size_t>(cfg_.feature_dim);
        Tensor dfeat({f});
        for (const Tensor& dx : dxs)
            for (std::size_t i = 0; i < f; ++i) dfeat[i] += dx[i];
        backbone_.backward(dfeat);
    }

    void zero_grad() override {
        backbone_.zero_grad();
        lstm_.zero_grad();
        head_.zero_grad();
    }

    std::vector<ParamRef> params() override {
        std::vector<ParamRef> p = backbone_.params();
        for (auto& q : lstm_.params()) p.push_back(q);
        for (auto& q : head_.params()) p.push_back(q);
        return p;
    }

    std::string kind() const override { return "tracker"; }

private:
    TrackerConfig cfg_;
    CnnBackbone backbone_;
    Lstm lstm_;
    Dense head_;
};

// Selection-only ablation: CNN features straight to logits, no history.
class SelectionModel : public BeamModel {
public:
    SelectionModel(const TrackerConfig& cfg, const std::vector<std::size_t>& input_shape)
        : cfg_(cfg) {
        cfg_.validate();
        Rng rng(derive_seed(cfg.seed, 0x5e1ec));
        backbone_ = CnnBackbone("selection.cnn", input_shape, cfg_, rng);
        head_ = Dense("selection.head", static_cast<std::size_t>(cfg_.feature_dim),
                      static_cast<std::size_t>(cfg_.m_beams), rng);
    }

    Tensor forward(const TrackingSample& sample) override {
        const Tensor x = sample.scene_tensor();
        x.check_finite("model input");
        const Tensor feat = backbone_.forward(x);
        Tensor logits = head_.forward(feat);
        logits.check_finite("logits");
        return logits;
    }

    void backward(const Tensor& dlogits) override {
        backbone_.backward(head_.backward(dlogits));
    }

    void zero_grad() override {
        backbone_.zero_grad();
        head_.zero_grad();
    }

    std::vector<ParamRef> params() override {
        std::vector<ParamRef> p = backbone_.params();
        for (auto& q : head_.params()) p.push_back(q);
        return p;
    }

    std::string kind() const override { return "selection"; }

private:
    TrackerConfig cfg_;
    CnnBackbone backbone_;
    Dense head_;
};

// ---------------------------------------------------------------------------
// Baseline and ranking.

// Previous-beam baseline ranking: the last seen beam first, then alternating
// +-1, +-2, ... codeword neighbours (modular, deduplicated, minus side first).
inline std::vector<int> baseline_previous_ranking(int prev_last, int m_beams, int count = -1) {
    if (prev_last < 0 || prev_last >= m_beams)
        throw std::invalid_argument("baseline_previous_ranking: index out of range");
    if (count < 0 || count > m_beams) count = m_beams;
    std::vector<int> out;
    std::vector<bool> seen(static_cast<std::size_t>(m_beams), false);
    auto push = [&](int idx) {
        idx = ((idx % m_beams) + m_beams) % m_beams;
        if (!seen[static_cast<std::size_t>(idx)]) {
            seen[static_cast<std::size_t>(idx)] = true;
            out.push_back(idx);
        }
    };
    push(prev_last);
    for (int step = 1; static_cast<int>(out.size()) < count && step <= m_beams; ++step) {
        push(prev_last - step);
        push(prev_last + step);
    }
    out.resize(static_cast<std::size_t>(count));
    return out;
}

// Indices sorted by logit descending; equal logits rank the lower index first.
inline std::vector<int> rank_logits(const Tensor& logits) {
    std::vector<int> idx(logits.numel());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (logits[static_cast<std::size_t>(a)] != logits[static_cast<std::size_t>(b)])
            return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
        return a < b;
    });
    return idx;
}

// Position of the label in a descending ranking (0-based).
inline int rank_position(const std::vector<int>& ranking, int label) {
    for (std::size_t i = 0; i < ranking.size(); ++i)
        if (ranking[i] == label) return static_cast<int>(i);
    return static_cast<int>(ranking.size());
}

// ---------------------------------------------------------------------------
// Episode-level split and training.

struct EpisodeSplit {
    std::vector<int> train, val, test;
};

inline EpisodeSplit split_by_episode(std::vector<int> episode_ids, double train_frac,
                                     double val_frac, std::uint64_t seed) {
    std::sort(episode_ids.begin(), episode_ids.end());
    episode_ids.erase(std::unique(episode_ids.begin(), episode_ids.end()), episode_ids.end());
    Rng rng(derive_seed(seed, 0x5b117));
    rng.shuffle(episode_ids.begin(), episode_ids.end());
    const std::size_t n = episode_ids.size();
    const std::size_t n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n));
    const std::size_t n_val = static_cast<std::size_t>(val_frac * static_cast<double>(n));
    EpisodeSplit split;
    split.train.assign(episode_ids.begin(), episode_ids.begin() + n_train);
    split.val.assign(episode_ids.begin() + n_train, episode_ids.begin() + n_train + n_val);
    split.test.assign(episode_ids.begin() + n_train + n_val, episode_ids.end());
    if (split.train.empty() || split.val.empty() || split.test.empty())
        throw std::invalid_argument("split_by_episode: a split is empty");
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

inline double top1_accuracy(BeamModel& model, std::span<const TrackingSample> samples) {
    if (samples.empty()) return 0.0;
    long hits = 0;
    for (const auto& s : samples) {
        const Tensor logits = model.forward(s);
        int best = 0;
        for (std::size_t i = 1; i < logits.numel(); ++i)
            if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
        if (best == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

struct TrainLogRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_top1 = 0.0;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    int best_epoch = 0;
    double best_val_top1 = 0.0;
};

// Minimizes softmax cross-entropy with Adam over seeded-shuffled batches and
// restores the best-validation parameters at the end. Fully deterministic for
// a fixed config.
inline TrainResult train_model(BeamModel& model, std::span<const TrackingSample> train_set,
                               std::span<const TrackingSample> val_set,
                               const TrackerConfig& cfg) {
    cfg.validate();
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("train_model: empty split");

    Adam adam(cfg.adam);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x0eb0c));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::vector<Tensor> best_values;
    const auto params = model.params();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        std::size_t cursor = 0;
        while (cursor < order.size()) {
            const std::size_t batch_end =
                std::min(order.size(), cursor + static_cast<std::size_t>(cfg.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(batch_end - cursor);
            model.zero_grad();
            for (std::size_t i = cursor; i < batch_end; ++i) {
                const TrackingSample& s = train_set[order[i]];
                const Tensor logits = model.forward(s);
                SoftmaxLoss sl = softmax_cross_entropy(logits, static_cast<std::size_t>(s.label));
                if (!std::isfinite(sl.loss))
                    throw std::runtime_error("train_model: non-finite loss");
                loss_sum += sl.loss;
                for (std::size_t g = 0; g < sl.grad.numel(); ++g) sl.grad[g] *= inv_batch;
                model.backward(sl.grad);
            }
            adam.update(params);
            cursor = batch_end;
        }
        const double val_top1 = top1_accuracy(model, val_set);
        result.log.push_back(
            {epoch, loss_sum / static_cast<double>(train_set.size()), val_top1});
        if (best_values.empty() || val_top1 > result.best_val_top1) {
            result.best_val_top1 = val_top1;
            result.best_epoch = epoch;
            best_values.clear();
            for (const auto& p : params) best_values.push_back(*p.value);
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) *params[i].value = best_values[i];
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalRow {
    std::string model;
    int k = 0;
    double accuracy = 0.0;
    long n = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;

    double accuracy(const std::string& model, int k) const {
        for (const auto& r : rows)
            if (r.model == model && r.k == k) return r.accuracy;
        throw std::invalid_argument("EvalReport: no row for " + model + " at K=" +
                                    std::to_string(k));
    }
};

namespace detail {

inline std::vector<int> normalized_ks(std::vector<int> ks, int m_beams) {
    ks.push_back(m_beams);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    std::vector<int> out;
    for (int k : ks)
        if (k >= 1 && k <= m_beams) out.push_back(k);
    return out;
}

inline void accumulate_rows(EvalReport& report, const std::string& model,
                            const std::vector<int>& ks, const std::vector<int>& positions) {
    const long n = static_cast<long>(positions.size());
    for (int k : ks) {
        long hits = 0;
        for (int pos : positions)
            if (pos < k) ++hits;
        report.rows.push_back(
            {model, k, n > 0 ? static_cast<double>(hits) / static_cast<double>(n) : 0.0, n});
    }
}

}  // namespace detail

// Top-K accuracy for the tracker, the selection-only ablation and the
// previous-beam baseline; optionally a closed-loop tracker row where the
// window is fed from the model's own predictions along each scene chain.
inline EvalReport evaluate_topk(HybridModel& tracker, SelectionModel& selection,
                                std::span<const TrackingSample> test_set,
                                const std::vector<int>& requested_ks, int m_beams,
                                bool closed_loop = false) {
    const std::vector<int> ks = detail::normalized_ks(requested_ks, m_beams);
    EvalReport report;

    std::vector<int> pos_tracker, pos_selection, pos_baseline;
    pos_tracker.reserve(test_set.size());
    for (const auto& s : test_set) {
        pos_tracker.push_back(rank_position(rank_logits(tracker.forward(s)), s.label));
        pos_selection.push_back(rank_position(rank_logits(selection.forward(s)), s.label));
        const auto base = baseline_previous_ranking(s.prev_beams.back(), m_beams);
        pos_baseline.push_back(rank_position(base, s.label));
    }
    detail::accumulate_rows(report, "tracker", ks, pos_tracker);
    detail::accumulate_rows(report, "selection", ks, pos_selection);
    detail::accumulate_rows(report, "previous_beam", ks, pos_baseline);

    if (closed_loop) {
        std::map<std::pair<int, int>, std::vector<const TrackingSample*>> chains;
        for (const auto& s : test_set) chains[{s.episode_id, s.receiver}].push_back(&s);
        std::vector<int> pos_closed;
        pos_closed.reserve(test_set.size());
        for (auto& [key, samples] : chains) {
            std::sort(samples.begin(), samples.end(),
                      [](const TrackingSample* a, const TrackingSample* b) {
                          return a->scene_id < b->scene_id;
                      });
            std::vector<int> history;
            int prev_scene = std::numeric_limits<int>::min();
            for (const TrackingSample* s : samples) {
                if (s->scene_id != prev_scene + 1) history = s->prev_beams;  // re-bootstrap
                const auto ranking = rank_logits(tracker.forward_with_history(*s, history));
                pos_closed.push_back(rank_position(ranking, s->label));
                history.erase(history.begin());
                history.push_back(ranking.front());
                prev_scene = s->scene_id;
            }
        }
        detail::accumulate_rows(report, "tracker_closed_loop", ks, pos_closed);
    }
    return report;
}

// Loss-level gradient check of a full model on one sample.
inline double model_gradient_check(BeamModel& model, const TrackingSample& sample, double eps,
                                   std::size_t max_coords = 10000) {
    model.zero_grad();
    const Tensor logits = model.forward(sample);
    const SoftmaxLoss sl = softmax_cross_entropy(logits, static_cast<std::size_t>(sample.label));
    model.backward(sl.grad);
    auto loss_fn = [&]() {
        return softmax_cross_entropy(model.forward(sample),
                                     static_cast<std::size_t>(sample.label))
            .loss;
    };
    return gradient_check(model.params(), loss_fn, eps, max_coords);
}

}  // namespace beamtrack
