// SPDX-License-Identifier: Apache-2.0
//
// End-to-end dataset pipeline shared by the CLI and the acceptance suite:
// generate episode records, encode scene tensors, label scenes by codebook
// sweep, train the tracker pair and evaluate top-K accuracy. Every stage is
// deterministic for fixed seeds, so reruns are byte-identical.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "beamtrack/codebook.hpp"
#include "beamtrack/encoders.hpp"
#include "beamtrack/io.hpp"
#include "beamtrack/scene_sim.hpp"
#include "beamtrack/tracker.hpp"

namespace beamtrack::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Tracker config file (key=value).

inline void write_tracker_config(const fs::path& path, const TrackerConfig& cfg) {
    std::string s;
    s += "m_beams=" + std::to_string(cfg.m_beams) + '\n';
    s += "window=" + std::to_string(cfg.window) + '\n';
    s += "input_mode=" + to_string(cfg.input_mode) + '\n';
    s += "stem_channels=" + std::to_string(cfg.stem_channels) + '\n';
    s += "block1_channels=" + std::to_string(cfg.block1_channels) + '\n';
    s += "block2_channels=" + std::to_string(cfg.block2_channels) + '\n';
    s += "feature_dim=" + std::to_string(cfg.feature_dim) + '\n';
    s += "lstm_hidden=" + std::to_string(cfg.lstm_hidden) + '\n';
    s += "lr=" + io::fmt_g17(cfg.adam.lr) + '\n';
    s += "beta1=" + io::fmt_g17(cfg.adam.beta1) + '\n';
    s += "beta2=" + io::fmt_g17(cfg.adam.beta2) + '\n';
    s += "adam_eps=" + io::fmt_g17(cfg.adam.eps) + '\n';
    s += "epochs=" + std::to_string(cfg.epochs) + '\n';
    s += "batch_size=" + std::to_string(cfg.batch_size) + '\n';
    s += "seed=" + std::to_string(cfg.seed) + '\n';
    s += "train_frac=" + io::fmt_g17(cfg.train_frac) + '\n';
    s += "val_frac=" + io::fmt_g17(cfg.val_frac) + '\n';
    io::detail::write_file(path, s);
}

inline TrackerConfig read_tracker_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tracker config: " + path.string());
    TrackerConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "m_beams") cfg.m_beams = std::stoi(val);
        else if (key == "window") cfg.window = std::stoi(val);
        else if (key == "input_mode") cfg.input_mode = input_mode_from_string(val);
        else if (key == "stem_channels") cfg.stem_channels = std::stoi(val);
        else if (key == "block1_channels") cfg.block1_channels = std::stoi(val);
        else if (key == "block2_channels") cfg.block2_channels = std::stoi(val);
        else if (key == "feature_dim") cfg.feature_dim = std::stoi(val);
        else if (key == "lstm_hidden") cfg.lstm_hidden = std::stoi(val);
        else if (key == "lr") cfg.adam.lr = std::stod(val);
        else if (key == "beta1") cfg.adam.beta1 = std::stod(val);
        else if (key == "beta2") cfg.adam.beta2 = std::stod(val);
        else if (key == "adam_eps") cfg.adam.eps = std::stod(val);
        else if (key == "epochs") cfg.epochs = std::stoi(val);
        else if (key == "batch_size") cfg.batch_size = std::stoi(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "train_frac") cfg.train_frac = std::stod(val);
        else if (key == "val_frac") cfg.val_frac = std::stod(val);
        else throw std::runtime_error("unknown tracker config key: " + key);
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::json tracker_config_to_json(const TrackerConfig& cfg) {
    nlohmann::json j;
    j["m_beams"] = cfg.m_beams;
    j["window"] = cfg.window;
    j["input_mode"] = to_string(cfg.input_mode);
    j["stem_channels"] = cfg.stem_channels;
    j["block1_channels"] = cfg.block1_channels;
    j["block2_channels"] = cfg.block2_channels;
    j["feature_dim"] = cfg.feature_dim;
    j["lstm_hidden"] = cfg.lstm_hidden;
    j["lr"] = cfg.adam.lr;
    j["beta1"] = cfg.adam.beta1;
    j["beta2"] = cfg.adam.beta2;
    j["adam_eps"] = cfg.adam.eps;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["train_frac"] = cfg.train_frac;
    j["val_frac"] = cfg.val_frac;
    return j;
}

inline TrackerConfig tracker_config_from_json(const nlohmann::json& j) {
    TrackerConfig cfg;
    cfg.m_beams = j.at("m_beams").get<int>();
    cfg.window = j.at("window").get<int>();
    cfg.input_mode = input_mode_from_string(j.at("input_mode").get<std::string>());
    cfg.stem_channels = j.at("stem_channels").get<int>();
    cfg.block1_channels = j.at("block1_channels").get<int>();
    cfg.block2_channels = j.at("block2_channels").get<int>();
    cfg.feature_dim = j.at("feature_dim").get<int>();
    cfg.lstm_hidden = j.at("lstm_hidden").get<int>();
    cfg.adam.lr = j.at("lr").get<double>();
    cfg.adam.beta1 = j.at("beta1").get<double>();
    cfg.adam.beta2 = j.at("beta2").get<double>();
    cfg.adam.eps = j.at("adam_eps").get<double>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.train_frac = j.at("train_frac").get<double>();
    cfg.val_frac = j.at("val_frac").get<double>();
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
    std::string scenario = "t001";  // preset name, ignored when scenario_file is set
    std::string scenario_file;
    fs::path out_dir;
    int episodes = -1;   // -1: preset default
    int scenes = -1;
    int receivers = -1;
    std::uint64_t seed = 1;
};

struct GenerateSummary {
    int episodes = 0;
    long scenes_total = 0;
};

inline std::string episode_filename(int episode_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ep%05d.jsonl", episode_id);
    return buf;
}

inline GenerateSummary run_generate(const GenerateOptions& opt) {
    if (opt.out_dir.empty()) throw std::invalid_argument("generate: out_dir required");
    Scenario sc;
    int n_scenes = opt.scenes, n_receivers = opt.receivers, n_episodes = opt.episodes;
    if (!opt.scenario_file.empty()) {
        sc = io::read_scenario_cfg(opt.scenario_file);
        if (n_scenes < 0) n_scenes = 10;
        if (n_receivers < 0) n_receivers = 2;
        if (n_episodes < 0) n_episodes = 100;
    } else {
        const Preset preset = scenario_preset(opt.scenario);
        sc = preset.scenario;
        if (n_scenes < 0) n_scenes = preset.n_scenes;
        if (n_receivers < 0) n_receivers = preset.n_receivers;
        if (n_episodes < 0) n_episodes = preset.default_episodes;
    }
    fs::create_directories(opt.out_dir / "episodes");
    io::write_scenario_cfg(opt.out_dir / "scenario.cfg", sc);

    GenerateSummary summary;
    for (int e = 0; e < n_episodes; ++e) {
        const Episode ep = simulate_episode(sc, n_scenes, n_receivers,
                                            derive_seed(opt.seed, static_cast<std::uint64_t>(e)),
                                            e);
        io::write_episode_jsonl(opt.out_dir / "episodes" / episode_filename(e), ep);
        ++summary.episodes;
        summary.scenes_total += static_cast<long>(ep.scenes.size());
    }
    return summary;
}

// ---------------------------------------------------------------------------
// shared episode iteration

inline std::vector<std::pair<int, fs::path>> list_episode_files(const fs::path& data_dir) {
    std::vector<std::pair<int, fs::path>> out;
    const fs::path dir = data_dir / "episodes";
    if (!fs::exists(dir)) throw std::runtime_error("no episodes directory in " + data_dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() < 9 || name.substr(0, 2) != "ep") continue;
        out.emplace_back(std::stoi(name.substr(2, 5)), entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// encode

struct EncodeOptions {
    fs::path data_dir;
    fs::path out_dir;  // defaults to data_dir
    InputMode mode = InputMode::lidar;
    std::string grid_file;
    int lidar_azimuth = 256;
    int lidar_elevation = 16;
    double lidar_range = 120.0;
    double lidar_el_min = -0.26;
    double lidar_el_max = 0.26;
    int gradient_len = 4;
};

struct EncodeSummary {
    long tensors = 0;
    GridSpec grid;
};

inline std::string tensor_filename(int episode_id, int scene_id, int receiver,
                                   InputMode mode) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "ep%05d_sc%03d_rx%d_%s.btt", episode_id, scene_id,
                  receiver, mode == InputMode::lidar ? "lidar" : "gnss");
    return buf;
}

inline EncodeSummary run_encode(const EncodeOptions& opt) {
    const fs::path out_dir = opt.out_dir.empty() ? opt.data_dir : opt.out_dir;
    const Scenario sc = io::read_scenario_cfg(opt.data_dir / "scenario.cfg");
    GridSpec grid;
    if (!opt.grid_file.empty())
        grid = io::read_grid_cfg(opt.grid_file);
    else
        grid = (opt.mode == InputMode::lidar) ? default_voxel_grid(sc) : default_coord_grid(sc);

    fs::create_directories(out_dir / "tensors");
    io::write_grid_cfg(out_dir / (opt.mode == InputMode::lidar ? "grid_lidar.cfg"
                                                               : "grid_gnss.cfg"),
                       grid);

    // keep rows of the other mode if a previous encode pass wrote them
    std::vector<io::TensorIndexRow> rows;
    const fs::path index_path = out_dir / "tensors_index.csv";
    if (fs::exists(index_path)) {
        for (auto& r : io::read_tensor_index_csv(index_path))
            if (r.mode != to_string(opt.mode)) rows.push_back(r);
    }

    EncodeSummary summary;
    summary.grid = grid;
    for (const auto& [episode_id, path] : list_episode_files(opt.data_dir)) {
        const Episode ep = io::read_episode_jsonl(path, episode_id);
        for (const Scene& scene : ep.scenes) {
            const int n_rx = static_cast<int>(scene.rays_per_receiver.size());
            for (int r = 0; r < n_rx; ++r) {
                const VehicleState& rx = scene.receiver(r);
                const BaseStation& bs =
                    sc.bs.at(static_cast<std::size_t>(scene.serving_bs.at(r)));
                io::Blob blob;
                blob.dtype = io::BlobDtype::i8;
                if (opt.mode == InputMode::lidar) {
                    const PointCloud cloud = virtual_lidar(
                        sc, scene, Pose{rx.antenna_pos(), rx.heading}, opt.lidar_azimuth,
                        opt.lidar_elevation, opt.lidar_range, opt.lidar_el_min,
                        opt.lidar_el_max, rx.id);
                    const VoxelGrid vg = voxelize(cloud, grid, bs.pos, rx.antenna_pos());
                    blob.dims = {static_cast<std::uint32_t>(vg.dims[0]),
                                 static_cast<std::uint32_t>(vg.dims[1]),
                                 static_cast<std::uint32_t>(vg.dims[2])};
                    blob.i8 = vg.values;
                } else {
                    const CoordMatrix cm =
                        coord_matrix(sc, scene, grid, bs.pos, rx, opt.gradient_len);
                    blob.dims = {static_cast<std::uint32_t>(cm.nx),
                                 static_cast<std::uint32_t>(cm.ny)};
                    blob.i8 = cm.values;
                }
                const std::string file = tensor_filename(episode_id, scene.scene_id, r,
                                                         opt.mode);
                io::write_blob(out_dir / "tensors" / file, blob);
                rows.push_back({episode_id, scene.scene_id, r, to_string(opt.mode),
                                "tensors/" + file});
                ++summary.tensors;
            }
        }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a.mode, a.episode_id, a.scene_id, a.receiver) <
               std::tie(b.mode, b.episode_id, b.scene_id, b.receiver);
    });
    io::write_tensor_index_csv(index_path, rows);
    return summary;
}

// ---------------------------------------------------------------------------
// label

struct LabelOptions {
    fs::path data_dir;
    fs::path out_csv;  // defaults to data_dir/labels.csv
    int beams = 64;
    int tx_antennas = 0;  // 0: equal to beams
    int rx_antennas = 1;
    int rx_beams = 0;     // 0: equal to rx_antennas
};

struct LabelSummary {
    long labeled = 0;
    long outages = 0;
    int label_space = 0;  // M_t * M_r
};

inline LabelSummary run_label(const LabelOptions& opt) {
    const fs::path out_csv =
        opt.out_csv.empty() ? opt.data_dir / "labels.csv" : opt.out_csv;
    const int n_tx = opt.tx_antennas > 0 ? opt.tx_antennas : opt.beams;
    const int m_rx = opt.rx_beams > 0 ? opt.rx_beams : opt.rx_antennas;
    const Codebook ct = dft_codebook(n_tx, opt.beams);
    const Codebook cr = dft_codebook(opt.rx_antennas, m_rx, CodebookSide::receiver);

    std::vector<io::LabelRow> rows;
    LabelSummary summary;
    summary.label_space = opt.beams * m_rx;
    for (const auto& [episode_id, path] : list_episode_files(opt.data_dir)) {
        const Episode ep = io::read_episode_jsonl(path, episode_id);
        for (const Scene& scene : ep.scenes) {
            for (int r = 0; r < static_cast<int>(scene.rays_per_receiver.size()); ++r) {
                const auto label = label_scene(scene, r, ct, cr);
                if (!label) {
                    ++summary.outages;
                    continue;
                }
                rows.push_back({episode_id, scene.scene_id, r, label->beam, label->gain});
                ++summary.labeled;
            }
        }
    }
    io::write_labels_csv(out_csv, rows);
    return summary;
}

// ---------------------------------------------------------------------------
// dataset loading

struct Dataset {
    std::vector<TrackingSample> train, val, test;
    EpisodeSplit split;
    std::vector<std::size_t> input_shape;
    long total_samples = 0;
};

inline Dataset load_dataset(const fs::path& data_dir, const TrackerConfig& cfg) {
    const auto index = io::read_tensor_index_csv(data_dir / "tensors_index.csv");
    const auto labels = io::read_labels_csv(data_dir / "labels.csv");
    const std::string mode = to_string(cfg.input_mode);

    std::map<std::pair<int, int>, std::map<int, SceneRecord>> records;
    for (const auto& r : index) {
        if (r.mode != mode) continue;
        const io::Blob blob = io::read_blob(data_dir / r.path);
        auto grid = std::make_shared<EncodedGrid>();
        if (blob.dims.size() == 3) {
            // encoder layout (X, Y, Z) -> channel-first (Z, X, Y)
            const std::size_t nx = blob.dims[0], ny = blob.dims[1], nz = blob.dims[2];
            grid->shape = {nz, nx, ny};
            grid->values.resize(blob.i8.size());
            for (std::size_t x = 0; x < nx; ++x)
                for (std::size_t y = 0; y < ny; ++y)
                    for (std::size_t z = 0; z < nz; ++z)
                        grid->values[(z * nx + x) * ny + y] = blob.i8[(x * ny + y) * nz + z];
            grid->scale = kVoxelScale;
        } else if (blob.dims.size() == 2) {
            grid->shape = {1, blob.dims[0], blob.dims[1]};
            grid->values = blob.i8;
            grid->scale = kCoordScale;
        } else {
            throw std::runtime_error("unexpected tensor rank in " + r.path);
        }
        records[{r.episode_id, r.receiver}][r.scene_id].grid = std::move(grid);
        records[{r.episode_id, r.receiver}][r.scene_id].scene_id = r.scene_id;
    }
    for (const auto& l : labels) {
        auto& rec = records[{l.episode_id, l.receiver}][l.scene_id];
        rec.scene_id = l.scene_id;
        if (l.beam_index < 0 || l.beam_index >= cfg.m_beams)
            throw std::runtime_error("label outside the configured beam count");
        rec.label = l.beam_index;
    }

    std::vector<TrackingSample> all;
    std::set<int> episode_ids;
    for (auto& [key, by_scene] : records) {
        std::vector<SceneRecord> scenes;
        scenes.reserve(by_scene.size());
        for (auto& [sid, rec] : by_scene) scenes.push_back(rec);
        auto samples = build_samples(key.first, key.second, scenes, cfg.window);
        for (auto& s : samples) {
            episode_ids.insert(s.episode_id);
            all.push_back(std::move(s));
        }
    }
    if (all.empty()) throw std::runtime_error("load_dataset: no samples assembled");

    Dataset ds;
    ds.total_samples = static_cast<long>(all.size());
    ds.input_shape = all.front().grid->shape;
    for (const auto& s : all)
        if (s.grid->shape != ds.input_shape)
            throw std::runtime_error("load_dataset: inconsistent tensor shapes");

    ds.split = split_by_episode(std::vector<int>(episode_ids.begin(), episode_ids.end()),
                                cfg.train_frac, cfg.val_frac, cfg.seed);
    const auto in_set = [](const std::vector<int>& v, int id) {
        return std::binary_search(v.begin(), v.end(), id);
    };
    for (auto& s : all) {
        if (in_set(ds.split.train, s.episode_id)) ds.train.push_back(std::move(s));
        else if (in_set(ds.split.val, s.episode_id)) ds.val.push_back(std::move(s));
        else ds.test.push_back(std::move(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    fs::path data_dir;
    std::string config_file;
    fs::path out_ckpt;
};

struct TrainSummary {
    TrainResult tracker_result;
    TrainResult selection_result;
    long train_samples = 0, val_samples = 0, test_samples = 0;
};

inline void write_training_log_csv(const fs::path& path, const TrainResult& tracker,
                                   const TrainResult& selection) {
    std::string s = "model,epoch,train_loss,val_top1\n";
    for (const auto& row : tracker.log)
        s += "tracker," + std::to_string(row.epoch) + ',' + io::fmt_g17(row.train_loss) + ',' +
             io::fmt_g17(row.val_top1) + '\n';
    for (const auto& row : selection.log)
        s += "selection," + std::to_string(row.epoch) + ',' + io::fmt_g17(row.train_loss) +
             ',' + io::fmt_g17(row.val_top1) + '\n';
    io::detail::write_file(path, s);
}

inline TrainSummary run_train(const TrainOptions& opt) {
    if (opt.out_ckpt.empty()) throw std::invalid_argument("train: out_ckpt required");
    const TrackerConfig cfg = opt.config_file.empty()
                                  ? TrackerConfig{}
                                  : read_tracker_config(opt.config_file);
    const Dataset ds = load_dataset(opt.data_dir, cfg);

    HybridModel tracker(cfg, ds.input_shape);
    SelectionModel selection(cfg, ds.input_shape);

    TrainSummary summary;
    summary.train_samples = static_cast<long>(ds.train.size());
    summary.val_samples = static_cast<long>(ds.val.size());
    summary.test_samples = static_cast<long>(ds.test.size());
    // the two models are independent; each training loop is single-threaded
    // and deterministic, so running them on two threads changes nothing but
    // the wall clock
    std::exception_ptr tracker_error;
    std::thread tracker_thread([&] {
        try {
            summary.tracker_result = train_model(tracker, ds.train, ds.val, cfg);
        } catch (...) {
            tracker_error = std::current_exception();
        }
    });
    try {
        summary.selection_result = train_model(selection, ds.train, ds.val, cfg);
    } catch (...) {
        tracker_thread.join();
        throw;
    }
    tracker_thread.join();
    if (tracker_error) std::rethrow_exception(tracker_error);

    fs::create_directories(opt.out_ckpt);
    nlohmann::json manifest;
    manifest["format"] = "beamtrack-checkpoint-v1";
    manifest["config"] = tracker_config_to_json(cfg);
    manifest["input_shape"] = ds.input_shape;
    manifest["models"] = nlohmann::json::object();
    io::save_params(opt.out_ckpt, "tracker", tracker.params(), manifest["models"]["tracker"]);
    io::save_params(opt.out_ckpt, "selection", selection.params(),
                    manifest["models"]["selection"]);
    manifest["best"] = {
        {"tracker",
         {{"epoch", summary.tracker_result.best_epoch},
          {"val_top1", summary.tracker_result.best_val_top1}}},
        {"selection",
         {{"epoch", summary.selection_result.best_epoch},
          {"val_top1", summary.selection_result.best_val_top1}}}};
    io::detail::write_file(opt.out_ckpt / "manifest.json", manifest.dump(2) + "\n");
    write_training_log_csv(opt.out_ckpt / "training_log.csv", summary.tracker_result,
                           summary.selection_result);
    return summary;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
    fs::path data_dir;
    fs::path ckpt;
    std::vector<int> topk = {1, 2, 3, 5, 10};
    fs::path out_csv;
    bool closed_loop = false;
};

inline void write_eval_report_csv(const fs::path& path, const EvalReport& report) {
    std::string s = "model,K,accuracy,n\n";
    for (const auto& r : report.rows)
        s += r.model + ',' + std::to_string(r.k) + ',' + io::fmt_g17(r.accuracy) + ',' +
             std::to_string(r.n) + '\n';
    io::detail::write_file(path, s);
}

inline EvalReport run_eval(const EvalOptions& opt) {
    const nlohmann::json manifest =
        nlohmann::json::parse(io::detail::read_file(opt.ckpt / "manifest.json"));
    const TrackerConfig cfg = tracker_config_from_json(manifest.at("config"));
    const std::vector<std::size_t> input_shape =
        manifest.at("input_shape").get<std::vector<std::size_t>>();

    HybridModel tracker(cfg, input_shape);
    SelectionModel selection(cfg, input_shape);
    io::load_params(opt.ckpt, manifest.at("models").at("tracker"), tracker.params());
    io::load_params(opt.ckpt, manifest.at("models").at("selection"), selection.params());

    const Dataset ds = load_dataset(opt.data_dir, cfg);
    const EvalReport report =
        evaluate_topk(tracker, selection, ds.test, opt.topk, cfg.m_beams, opt.closed_loop);
    if (!opt.out_csv.empty()) write_eval_report_csv(opt.out_csv, report);
    return report;
}

}  // namespace beamtrack::pipeline
