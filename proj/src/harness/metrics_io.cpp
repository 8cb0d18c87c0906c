// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/harness/metrics_io.hpp"

#include <cstdio>

#include "sdpo/errors.hpp"
#include "sdpo/kernels.hpp"

namespace sdpo {

using nlohmann::json;

json to_json(const TrainRecord& r) {
    const auto& m = r.metrics;
    return {{"epoch", m.epoch},
            {"algo", to_string(r.algo)},
            {"mean_reward_train", m.mean_reward_train},
            {"mean_abs_delta_rho", m.mean_abs_delta_rho},
            {"clip_fraction", m.clip_fraction},
            {"loss", m.loss},
            {"updates", m.updates},
            {"samples_consumed", r.samples_consumed},
            {"reward_queries", m.reward_queries},
            {"wall_ms", r.wall_ms}};
}

json to_json(const EvalRecord& r, Algo algo) {
    json rewards = json::object();
    json errors = json::object();
    for (const auto& row : r.rows) {
        rewards[std::to_string(row.steps)] = row.mean_reward;
        errors[std::to_string(row.steps)] = row.std_error;
    }
    return {{"epoch", r.epoch},
            {"algo", to_string(algo)},
            {"samples_consumed", r.samples_consumed},
            {"mean_reward", rewards},
            {"std_error", errors}};
}

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config, const std::string& command,
                    const json& extra) {
    std::filesystem::create_directories(dir);
    json m = {{"code_version", code_version()},
              {"config_digest", config_digest(config)},
              {"config", to_json(config)},
              {"command", command},
              {"kernel_backend", kernels::backend_name(kernels::active_backend())}};
    for (const auto& [k, v] : extra.items()) m[k] = v;
    std::ofstream f(dir / "manifest.json");
    if (!f) throw IoError("cannot write manifest in " + dir.string());
    f << m.dump(2) << '\n';
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) f << (i ? "," : "") << cells[i];
        f << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
}

RunWriter::RunWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    metrics_.open(dir_ / "metrics.jsonl", std::ios::trunc);
    eval_.open(dir_ / "eval.jsonl", std::ios::trunc);
    eval_csv_.open(dir_ / "eval.csv", std::ios::trunc);
    if (!metrics_ || !eval_ || !eval_csv_) throw IoError("cannot open metric streams in " + dir_.string());
    eval_csv_ << "epoch,samples_consumed,steps,mean_reward,std_error\n";
}

RunWriter::~RunWriter() = default;

void RunWriter::train(const TrainRecord& r) { metrics_ << to_json(r).dump() << '\n' << std::flush; }

void RunWriter::eval(const EvalRecord& r, Algo algo) {
    eval_ << to_json(r, algo).dump() << '\n' << std::flush;
    for (const auto& row : r.rows) {
        eval_csv_ << r.epoch << ',' << r.samples_consumed << ',' << row.steps << ',' << format_double(row.mean_reward)
                  << ',' << format_double(row.std_error) << '\n';
    }
    eval_csv_ << std::flush;
}

}  // namespace sdpo
