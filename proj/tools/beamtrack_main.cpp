// SPDX-License-Identifier: Apache-2.0
//
// beamtrack CLI: generate / encode / label / train / eval.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beamtrack/pipeline.hpp"

using namespace beamtrack;

int main(int argc, char** argv) {
    CLI::App app{"mmWave beam tracking simulator, dataset generator and ML harness"};
    app.require_subcommand(1);

    // generate
    pipeline::GenerateOptions gen;
    std::string gen_out;
    auto* cmd_gen = app.add_subcommand("generate", "synthesize episode records");
    cmd_gen->add_option("--scenario", gen.scenario,
                        "preset name: t001, t002 or t001_static")
        ->default_val("t001");
    cmd_gen->add_option("--scenario-file", gen.scenario_file,
                        "scenario config file (overrides --scenario)");
    cmd_gen->add_option("--episodes", gen.episodes, "episode count (-1: preset default)");
    cmd_gen->add_option("--scenes", gen.scenes, "scenes per episode (-1: preset default)");
    cmd_gen->add_option("--receivers", gen.receivers, "receivers (-1: preset default)");
    cmd_gen->add_option("--seed", gen.seed, "base seed")->default_val(1);
    cmd_gen->add_option("--out", gen_out, "output dataset directory")->required();

    // encode
    pipeline::EncodeOptions enc;
    std::string enc_in, enc_out, enc_mode = "lidar";
    auto* cmd_enc = app.add_subcommand("encode", "encode scenes into tensor blobs");
    cmd_enc->add_option("--in", enc_in, "dataset directory")->required();
    cmd_enc->add_option("--mode", enc_mode, "lidar or gnss")->default_val("lidar");
    cmd_enc->add_option("--grid", enc.grid_file, "grid config file (default: derived)");
    cmd_enc->add_option("--out", enc_out, "output directory (default: --in)");
    cmd_enc->add_option("--azimuth", enc.lidar_azimuth, "lidar azimuth rays");
    cmd_enc->add_option("--elevation", enc.lidar_elevation, "lidar elevation rings");
    cmd_enc->add_option("--range", enc.lidar_range, "lidar max range [m]");
    cmd_enc->add_option("--gradient", enc.gradient_len, "receiver gradient length");

    // label
    pipeline::LabelOptions lab;
    std::string lab_in, lab_out;
    auto* cmd_lab = app.add_subcommand("label", "ground-truth beams by codebook sweep");
    cmd_lab->add_option("--in", lab_in, "dataset directory")->required();
    cmd_lab->add_option("--beams", lab.beams, "transmit codewords")->default_val(64);
    cmd_lab->add_option("--tx-antennas", lab.tx_antennas, "BS antennas (default: --beams)");
    cmd_lab->add_option("--rx-antennas", lab.rx_antennas, "UE antennas")->default_val(1);
    cmd_lab->add_option("--rx-beams", lab.rx_beams, "UE codewords (default: rx antennas)");
    cmd_lab->add_option("--out", lab_out, "labels CSV or directory (default: in-place)");

    // train
    pipeline::TrainOptions trn;
    std::string trn_data, trn_out;
    auto* cmd_trn = app.add_subcommand("train", "train the tracker and its ablation");
    cmd_trn->add_option("--data", trn_data, "dataset directory")->required();
    cmd_trn->add_option("--config", trn.config_file, "tracker config file");
    cmd_trn->add_option("--out", trn_out, "checkpoint directory")->required();

    // eval
    pipeline::EvalOptions evl;
    std::string evl_data, evl_ckpt, evl_out, evl_topk = "1,2,3,5,10";
    auto* cmd_evl = app.add_subcommand("eval", "top-K accuracy report");
    cmd_evl->add_option("--data", evl_data, "dataset directory")->required();
    cmd_evl->add_option("--ckpt", evl_ckpt, "checkpoint directory")->required();
    cmd_evl->add_option("--topk", evl_topk, "comma-separated K list")->default_val("1,2,3,5,10");
    cmd_evl->add_option("--out", evl_out, "report CSV path")->required();
    cmd_evl->add_flag("--closed-loop", evl.closed_loop,
                      "add a self-fed tracker row (history from own predictions)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_gen->parsed()) {
            gen.out_dir = gen_out;
            const auto summary = pipeline::run_generate(gen);
            std::printf("generated %d episodes (%ld scenes) into %s\n", summary.episodes,
                        summary.scenes_total, gen_out.c_str());
        } else if (cmd_enc->parsed()) {
            enc.data_dir = enc_in;
            enc.out_dir = enc_out;
            enc.mode = input_mode_from_string(enc_mode);
            const auto summary = pipeline::run_encode(enc);
            std::printf("encoded %ld tensors (%s, grid %dx%dx%d)\n", summary.tensors,
                        enc_mode.c_str(), summary.grid.dims[0], summary.grid.dims[1],
                        summary.grid.dims[2]);
        } else if (cmd_lab->parsed()) {
            lab.data_dir = lab_in;
            if (!lab_out.empty()) {
                std::filesystem::path p = lab_out;
                if (p.extension() != ".csv") {
                    std::filesystem::create_directories(p);
                    p /= "labels.csv";
                }
                lab.out_csv = p;
            }
            const auto summary = pipeline::run_label(lab);
            std::printf("labeled %ld scenes, %ld outages, label space %d\n", summary.labeled,
                        summary.outages, summary.label_space);
        } else if (cmd_trn->parsed()) {
            trn.data_dir = trn_data;
            trn.out_ckpt = trn_out;
            const auto summary = pipeline::run_train(trn);
            std::printf("trained on %ld samples (val %ld, test %ld)\n", summary.train_samples,
                        summary.val_samples, summary.test_samples);
            std::printf("tracker best val top-1 %.4f @ epoch %d\n",
                        summary.tracker_result.best_val_top1,
                        summary.tracker_result.best_epoch);
            std::printf("selection best val top-1 %.4f @ epoch %d\n",
                        summary.selection_result.best_val_top1,
                        summary.selection_result.best_epoch);
        } else if (cmd_evl->parsed()) {
            evl.data_dir = evl_data;
            evl.ckpt = evl_ckpt;
            evl.out_csv = evl_out;
            evl.topk.clear();
            std::stringstream ss(evl_topk);
            std::string tok;
            while (std::getline(ss, tok, ',')) evl.topk.push_back(std::stoi(tok));
            const auto report = pipeline::run_eval(evl);
            for (const auto& row : report.rows)
                std::printf("%-20s K=%-3d accuracy=%.4f n=%ld\n", row.model.c_str(), row.k,
                            row.accuracy, row.n);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
