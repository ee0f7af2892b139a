// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace xdmg::commands {

// Each command returns a human-readable summary and throws xdmg::Error on
// failure; every output file is written with write-then-rename.

std::string synth(const std::filesystem::path& spec_json, const std::filesystem::path& out_dir);

std::string ingest(const std::filesystem::path& data_root, const std::string& split,
                   const std::optional<std::filesystem::path>& truth_out_dir);

/// Writes checkpoint.xdmg, train_log.jsonl and config.json under run_dir.
std::string train(const std::filesystem::path& data_root, const std::filesystem::path& config_json,
                  const std::filesystem::path& run_dir, bool single_thread);

std::string predict(const std::filesystem::path& checkpoint, const std::optional<std::filesystem::path>& pre_png,
                    const std::filesystem::path& post_png, const std::filesystem::path& out_png);

/// One <scene_id>_prediction.png per scene of the split.
std::string predict_split(const std::filesystem::path& checkpoint, const std::filesystem::path& data_root,
                          const std::string& split, const std::filesystem::path& out_dir);

std::string score(const std::filesystem::path& pred_dir, const std::filesystem::path& truth_dir,
                  const std::filesystem::path& out_json);

std::string ablate(const std::filesystem::path& data_root, const std::filesystem::path& config_json,
                   const std::filesystem::path& out_csv, bool single_thread);

}  // namespace xdmg::commands
