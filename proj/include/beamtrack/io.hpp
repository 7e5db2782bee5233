// SPDX-License-Identifier: Apache-2.0
//
// File formats: BTTN binary tensor blobs, episode JSON-lines records,
// scenario config files, label/index CSVs and model checkpoints. All writers
// are deterministic; floats serialize with 17 significant digits so values
// round-trip exactly.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "beamtrack/encoders.hpp"
#include "beamtrack/nn.hpp"
#include "beamtrack/scene.hpp"
#include "beamtrack/tensor.hpp"

namespace beamtrack::io {

namespace fs = std::filesystem;

inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// BTTN tensor blob: 16-byte header ("BTTN", u8 rank, u8 dtype, 10 reserved
// zero bytes), then rank little-endian u32 dims, then the row-major payload
// in little-endian byte order.

enum class BlobDtype : std::uint8_t { i8 = 0, f32 = 1, f64 = 2 };

struct Blob {
    BlobDtype dtype = BlobDtype::i8;
    std::vector<std::uint32_t> dims;
    std::vector<std::int8_t> i8;
    std::vector<float> f32;
    std::vector<double> f64;

    std::size_t numel() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t get_u64le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write: " + path.string());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

inline std::string encode_blob(const Blob& blob) {
    std::string out;
    out.reserve(16 + 4 * blob.dims.size() + blob.numel() * 8);
    out += "BTTN";
    out.push_back(static_cast<char>(blob.dims.size()));
    out.push_back(static_cast<char>(blob.dtype));
    out.append(10, '\0');
    for (auto d : blob.dims) detail::put_u32le(out, d);
    switch (blob.dtype) {
        case BlobDtype::i8:
            for (auto v : blob.i8) out.push_back(static_cast<char>(v));
            break;
        case BlobDtype::f32:
            for (float v : blob.f32) detail::put_u32le(out, std::bit_cast<std::uint32_t>(v));
            break;
        case BlobDtype::f64:
            for (double v : blob.f64) detail::put_u64le(out, std::bit_cast<std::uint64_t>(v));
            break;
    }
    return out;
}

inline Blob decode_blob(const std::string& bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 4, "BTTN") != 0)
        throw std::runtime_error("not a BTTN blob");
    Blob blob;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t rank = p[4];
    blob.dtype = static_cast<BlobDtype>(p[5]);
    std::size_t off = 16;
    if (bytes.size() < off + 4 * rank) throw std::runtime_error("truncated BTTN header");
    for (std::size_t i = 0; i < rank; ++i) {
        blob.dims.push_back(detail::get_u32le(p + off));
        off += 4;
    }
    const std::size_t n = blob.numel();
    switch (blob.dtype) {
        case BlobDtype::i8:
            if (bytes.size() != off + n) throw std::runtime_error("bad BTTN payload size");
            blob.i8.resize(n);
            std::memcpy(blob.i8.data(), bytes.data() + off, n);
            break;
        case BlobDtype::f32:
            if (bytes.size() != off + 4 * n) throw std::runtime_error("bad BTTN payload size");
            blob.f32.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                blob.f32[i] = std::bit_cast<float>(detail::get_u32le(p + off + 4 * i));
            break;
        case BlobDtype::f64:
            if (bytes.size() != off + 8 * n) throw std::runtime_error("bad BTTN payload size");
            blob.f64.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                blob.f64[i] = std::bit_cast<double>(detail::get_u64le(p + off + 8 * i));
            break;
        default:
            throw std::runtime_error("unknown BTTN dtype");
    }
    return blob;
}

inline void write_blob(const fs::path& path, const Blob& blob) {
    detail::write_file(path, encode_blob(blob));
}

inline Blob read_blob(const fs::path& path) { return decode_blob(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Episode records: one JSON object per scene per line. Floats use %.17g.

inline std::string scene_to_json_line(const Scene& scene) {
    std::string s;
    s.reserve(1024);
    s += "{\"scene_id\":" + std::to_string(scene.scene_id);
    s += ",\"t_ms\":" + fmt_g17(scene.t_ms);
    s += ",\"serving_bs\":[";
    for (std::size_t i = 0; i < scene.serving_bs.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(scene.serving_bs[i]);
    }
    s += "],\"vehicles\":[";
    for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
        const auto& v = scene.vehicles[i];
        if (i) s += ',';
        s += "{\"id\":" + std::to_string(v.id);
        s += ",\"pos\":[" + fmt_g17(v.position.x) + ',' + fmt_g17(v.position.y) + ',' +
             fmt_g17(v.position.z) + ']';
        s += ",\"vel\":[" + fmt_g17(v.velocity.x) + ',' + fmt_g17(v.velocity.y) + ',' +
             fmt_g17(v.velocity.z) + ']';
        s += ",\"heading\":" + fmt_g17(v.heading);
        s += ",\"bbox\":[" + fmt_g17(v.length) + ',' + fmt_g17(v.width) + ',' +
             fmt_g17(v.height) + ']';
        s += ",\"is_receiver\":";
        s += v.is_receiver ? "true" : "false";
        s += ",\"rx\":" + std::to_string(v.receiver_index);
        s += '}';
    }
    s += "],\"rays\":[";
    for (std::size_t r = 0; r < scene.rays_per_receiver.size(); ++r) {
        if (r) s += ',';
        s += '[';
        const auto& rays = scene.rays_per_receiver[r];
        for (std::size_t l = 0; l < rays.size(); ++l) {
            const RayPath& ray = rays[l];
            if (l) s += ',';
            s += "{\"gain_re\":" + fmt_g17(ray.gain.real());
            s += ",\"gain_im\":" + fmt_g17(ray.gain.imag());
            s += ",\"aod_az\":" + fmt_g17(ray.aod_az);
            s += ",\"aod_el\":" + fmt_g17(ray.aod_el);
            s += ",\"aoa_az\":" + fmt_g17(ray.aoa_az);
            s += ",\"aoa_el\":" + fmt_g17(ray.aoa_el);
            s += ",\"delay_s\":" + fmt_g17(ray.delay_s);
            s += '}';
        }
        s += ']';
    }
    s += "]}";
    return s;
}

inline void write_episode_jsonl(const fs::path& path, const Episode& ep) {
    std::string out;
    for (const Scene& scene : ep.scenes) {
        out += scene_to_json_line(scene);
        out += '\n';
    }
    detail::write_file(path, out);
}

inline Episode read_episode_jsonl(const fs::path& path, int episode_id) {
    Episode ep;
    ep.episode_id = episode_id;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open episode file: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Scene scene;
        scene.scene_id = j.at("scene_id").get<int>();
        scene.t_ms = j.at("t_ms").get<double>();
        for (const auto& b : j.at("serving_bs")) scene.serving_bs.push_back(b.get<int>());
        for (const auto& vj : j.at("vehicles")) {
            VehicleState v;
            v.id = vj.at("id").get<int>();
            const auto& pos = vj.at("pos");
            v.position = {pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>()};
            const auto& vel = vj.at("vel");
            v.velocity = {vel[0].get<double>(), vel[1].get<double>(), vel[2].get<double>()};
            v.heading = vj.at("heading").get<double>();
            const auto& bbox = vj.at("bbox");
            v.length = bbox[0].get<double>();
            v.width = bbox[1].get<double>();
            v.height = bbox[2].get<double>();
            v.is_receiver = vj.at("is_receiver").get<bool>();
            v.receiver_index = vj.at("rx").get<int>();
            v.speed = v.velocity.norm();
            scene.vehicles.push_back(v);
        }
        for (const auto& rj : j.at("rays")) {
            std::vector<RayPath> rays;
            for (const auto& ray_j : rj) {
                RayPath ray;
                ray.gain = cxd{ray_j.at("gain_re").get<double>(),
                               ray_j.at("gain_im").get<double>()};
                ray.aod_az = ray_j.at("aod_az").get<double>();
                ray.aod_el = ray_j.at("aod_el").get<double>();
                ray.aoa_az = ray_j.at("aoa_az").get<double>();
                ray.aoa_el = ray_j.at("aoa_el").get<double>();
                ray.delay_s = ray_j.at("delay_s").get<double>();
                rays.push_back(ray);
            }
            scene.rays_per_receiver.push_back(std::move(rays));
        }
        if (!ep.scenes.empty()) ep.scene_interval_ms = scene.t_ms - ep.scenes.front().t_ms;
        ep.scenes.push_back(std::move(scene));
    }
    if (ep.scenes.size() >= 2)
        ep.scene_interval_ms = ep.scenes[1].t_ms - ep.scenes[0].t_ms;
    return ep;
}

// ---------------------------------------------------------------------------
// Scenario config: key=value lines, repeatable keys for lists.

inline void write_scenario_cfg(const fs::path& path, const Scenario& sc) {
    std::string s;
    s += "kind=" + to_string(sc.kind) + '\n';
    s += "carrier_hz=" + fmt_g17(sc.carrier_hz) + '\n';
    s += "scene_interval_ms=" + fmt_g17(sc.scene_interval_ms) + '\n';
    s += "speed_min=" + fmt_g17(sc.speed_min) + '\n';
    s += "speed_max=" + fmt_g17(sc.speed_max) + '\n';
    s += "n_traffic=" + std::to_string(sc.n_traffic) + '\n';
    s += "truck_fraction=" + fmt_g17(sc.truck_fraction) + '\n';
    s += "rx_spawn_near=" + fmt_g17(sc.rx_spawn_near) + '\n';
    s += "rx_spawn_far=" + fmt_g17(sc.rx_spawn_far) + '\n';
    s += "rx_spawn_beam_uniform=" + std::string(sc.rx_spawn_beam_uniform ? "1" : "0") + '\n';
    s += "bounds=" + fmt_g17(sc.bounds_lo.x) + ',' + fmt_g17(sc.bounds_lo.y) + ',' +
         fmt_g17(sc.bounds_lo.z) + ',' + fmt_g17(sc.bounds_hi.x) + ',' +
         fmt_g17(sc.bounds_hi.y) + ',' + fmt_g17(sc.bounds_hi.z) + '\n';
    for (const auto& b : sc.bs)
        s += "bs=" + fmt_g17(b.pos.x) + ',' + fmt_g17(b.pos.y) + ',' + fmt_g17(b.pos.z) + ',' +
             fmt_g17(b.heading) + '\n';
    for (const auto& box : sc.buildings)
        s += "building=" + fmt_g17(box.lo.x) + ',' + fmt_g17(box.lo.y) + ',' +
             fmt_g17(box.lo.z) + ',' + fmt_g17(box.hi.x) + ',' + fmt_g17(box.hi.y) + ',' +
             fmt_g17(box.hi.z) + '\n';
    for (const auto& lane : sc.lanes)
        s += "lane=" + fmt_g17(lane.x) + ',' + fmt_g17(lane.y_min) + ',' +
             fmt_g17(lane.y_max) + ',' + std::to_string(lane.direction) + ',' +
             fmt_g17(lane.half_width) + '\n';
    if (sc.kind == ScenarioKind::roundabout)
        s += "ring=" + fmt_g17(sc.ring.center.x) + ',' + fmt_g17(sc.ring.center.y) + ',' +
             fmt_g17(sc.ring.radius) + ',' + std::to_string(sc.ring.direction) + ',' +
             fmt_g17(sc.ring.half_width) + '\n';
    detail::write_file(path, s);
}

namespace detail {

inline std::vector<double> parse_csv_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

}  // namespace detail

inline Scenario read_scenario_cfg(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario config: " + path.string());
    Scenario sc;
    sc.bs.clear();
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
        if (key == "kind") sc.kind = scenario_kind_from_string(val);
        else if (key == "carrier_hz") sc.carrier_hz = std::stod(val);
        else if (key == "scene_interval_ms") sc.scene_interval_ms = std::stod(val);
        else if (key == "speed_min") sc.speed_min = std::stod(val);
        else if (key == "speed_max") sc.speed_max = std::stod(val);
        else if (key == "n_traffic") sc.n_traffic = std::stoi(val);
        else if (key == "truck_fraction") sc.truck_fraction = std::stod(val);
        else if (key == "rx_spawn_near") sc.rx_spawn_near = std::stod(val);
        else if (key == "rx_spawn_far") sc.rx_spawn_far = std::stod(val);
        else if (key == "rx_spawn_beam_uniform") sc.rx_spawn_beam_uniform = (val == "1");
        else if (key == "bounds") {
            const auto v = detail::parse_csv_doubles(val);
            sc.bounds_lo = {v.at(0), v.at(1), v.at(2)};
            sc.bounds_hi = {v.at(3), v.at(4), v.at(5)};
        } else if (key == "bs") {
            const auto v = detail::parse_csv_doubles(val);
            sc.bs.push_back({{v.at(0), v.at(1), v.at(2)}, v.at(3)});
        } else if (key == "building") {
            const auto v = detail::parse_csv_doubles(val);
            sc.buildings.push_back({{v.at(0), v.at(1), v.at(2)}, {v.at(3), v.at(4), v.at(5)}});
        } else if (key == "lane") {
            const auto v = detail::parse_csv_doubles(val);
            sc.lanes.push_back({v.at(0), v.at(1), v.at(2), static_cast<int>(v.at(3)), v.at(4)});
        } else if (key == "ring") {
            const auto v = detail::parse_csv_doubles(val);
            sc.ring = {{v.at(0), v.at(1), 0.0}, v.at(2), static_cast<int>(v.at(3)), v.at(4)};
        } else {
            throw std::runtime_error("unknown scenario config key: " + key);
        }
    }
    sc.validate();
    return sc;
}

// ---------------------------------------------------------------------------
// Grid config: origin / cell_size / dims, one line each.

inline void write_grid_cfg(const fs::path& path, const GridSpec& grid) {
    std::string s;
    s += "origin=" + fmt_g17(grid.origin.x) + ',' + fmt_g17(grid.origin.y) + ',' +
         fmt_g17(grid.origin.z) + '\n';
    s += "cell_size=" + fmt_g17(grid.cell_size.x) + ',' + fmt_g17(grid.cell_size.y) + ',' +
         fmt_g17(grid.cell_size.z) + '\n';
    s += "dims=" + std::to_string(grid.dims[0]) + ',' + std::to_string(grid.dims[1]) + ',' +
         std::to_string(grid.dims[2]) + '\n';
    detail::write_file(path, s);
}

inline GridSpec read_grid_cfg(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid config: " + path.string());
    GridSpec grid;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const auto v = detail::parse_csv_doubles(line.substr(eq + 1));
        if (key == "origin") grid.origin = {v.at(0), v.at(1), v.at(2)};
        else if (key == "cell_size") grid.cell_size = {v.at(0), v.at(1), v.at(2)};
        else if (key == "dims")
            grid.dims = {static_cast<int>(v.at(0)), static_cast<int>(v.at(1)),
                         static_cast<int>(v.at(2))};
        else
            throw std::runtime_error("unknown grid config key: " + key);
    }
    grid.validate();
    return grid;
}

// ---------------------------------------------------------------------------
// Label and tensor-index CSVs.

struct LabelRow {
    int episode_id = 0;
    int scene_id = 0;
    int receiver = 0;
    int beam_index = 0;
    double best_gain = 0.0;
};

inline void write_labels_csv(const fs::path& path, std::span<const LabelRow> rows) {
    std::string s = "episode_id,scene_id,receiver,beam_index,best_gain\n";
    for (const auto& r : rows)
        s += std::to_string(r.episode_id) + ',' + std::to_string(r.scene_id) + ',' +
             std::to_string(r.receiver) + ',' + std::to_string(r.beam_index) + ',' +
             fmt_g17(r.best_gain) + '\n';
    detail::write_file(path, s);
}

inline std::vector<LabelRow> read_labels_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open labels: " + path.string());
    std::vector<LabelRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        LabelRow r;
        std::getline(ss, tok, ',');
        r.episode_id = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.scene_id = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.receiver = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.beam_index = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.best_gain = std::stod(tok);
        rows.push_back(r);
    }
    return rows;
}

struct TensorIndexRow {
    int episode_id = 0;
    int scene_id = 0;
    int receiver = 0;
    std::string mode;
    std::string path;  // relative to the dataset directory
};

inline void write_tensor_index_csv(const fs::path& path, std::span<const TensorIndexRow> rows) {
    std::string s = "episode_id,scene_id,receiver,mode,path\n";
    for (const auto& r : rows)
        s += std::to_string(r.episode_id) + ',' + std::to_string(r.scene_id) + ',' +
             std::to_string(r.receiver) + ',' + r.mode + ',' + r.path + '\n';
    detail::write_file(path, s);
}

inline std::vector<TensorIndexRow> read_tensor_index_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tensor index: " + path.string());
    std::vector<TensorIndexRow> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        TensorIndexRow r;
        std::string tok;
        std::getline(ss, tok, ',');
        r.episode_id = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.scene_id = std::stoi(tok);
        std::getline(ss, tok, ',');
        r.receiver = std::stoi(tok);
        std::getline(ss, r.mode, ',');
        std::getline(ss, r.path, ',');
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Checkpoints: one f64 blob per named parameter plus a manifest.

inline std::string sanitize_param_name(const std::string& name) {
    std::string s = name;
    for (char& c : s)
        if (c == '.' || c == '/' || c == ' ') c = '_';
    return s;
}

inline void save_params(const fs::path& dir, const std::string& model_name,
                        const std::vector<ParamRef>& params, nlohmann::json& manifest_entry) {
    fs::create_directories(dir);
    manifest_entry["params"] = nlohmann::json::array();
    for (const auto& p : params) {
        const std::string file = model_name + "_" + sanitize_param_name(p.name) + ".btt";
        Blob blob;
        blob.dtype = BlobDtype::f64;
        for (auto d : p.value->shape()) blob.dims.push_back(static_cast<std::uint32_t>(d));
        blob.f64.assign(p.value->data(), p.value->data() + p.value->numel());
        write_blob(dir / file, blob);
        nlohmann::json pj;
        pj["name"] = p.name;
        pj["file"] = file;
        pj["shape"] = p.value->shape();
        manifest_entry["params"].push_back(pj);
    }
}

inline void load_params(const fs::path& dir, const nlohmann::json& manifest_entry,
                        std::vector<ParamRef> params) {
    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& pj : manifest_entry.at("params")) by_name[pj.at("name")] = &pj;
    for (auto& p : params) {
        const auto it = by_name.find(p.name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint is missing parameter " + p.name);
        const Blob blob = read_blob(dir / it->second->at("file").get<std::string>());
        if (blob.dtype != BlobDtype::f64 || blob.numel() != p.value->numel())
            throw std::runtime_error("checkpoint shape mismatch for " + p.name);
        std::copy(blob.f64.begin(), blob.f64.end(), p.value->data());
    }
}

}  // namespace beamtrack::io
