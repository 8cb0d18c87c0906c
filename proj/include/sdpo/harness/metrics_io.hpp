// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run outputs: line-delimited JSON records, CSV summaries and the manifest.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdpo/harness/pipelines.hpp"

namespace sdpo {

nlohmann::json to_json(const TrainRecord& r);
nlohmann::json to_json(const EvalRecord& r, Algo algo);

/// manifest.json: code version, config digest, full config, command, kernel
/// backend.
void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config, const std::string& command,
                    const nlohmann::json& extra = nlohmann::json::object());

/// Writes rows of already formatted cells; the header comes first.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

/// Owns the metric streams of one finetuning run:
///   metrics.jsonl  per-epoch training diagnostics
///   eval.jsonl     one record per evaluation point
///   eval.csv       epoch,samples_consumed,steps,mean_reward,std_error
class RunWriter {
public:
    explicit RunWriter(std::filesystem::path dir);
    ~RunWriter();

    RunWriter(const RunWriter&) = delete;
    RunWriter& operator=(const RunWriter&) = delete;

    void train(const TrainRecord& r);
    void eval(const EvalRecord& r, Algo algo);

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::ofstream metrics_;
    std::ofstream eval_;
    std::ofstream eval_csv_;
};

}  // namespace sdpo
