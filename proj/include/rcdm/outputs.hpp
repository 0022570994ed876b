// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "rcdm/config.hpp"
#include "rcdm/dataset.hpp"
#include "rcdm/pipeline.hpp"

namespace rcdm {

/// First line of every text artifact: "# rcdm config_hash=<hex> seed=<n>".
std::string provenance_line(const std::string& hash, std::uint64_t seed);

/// Shortest text that parses back to the same double.
std::string format_double(double x);
std::string format_fixed(double x, int decimals);

/// Series in the input format; label and clean columns are added when present.
void write_series(const std::filesystem::path& path, const TimeSeriesDataset& dataset, const std::string& header);

/// Cleaned series with imputed (0/1) and outlier_probability columns. Points
/// that were never scored (the first C) have an empty probability field.
void write_cleaned(const std::filesystem::path& path, const CleaningResult& result, const std::string& header);

void write_low_quality(const std::filesystem::path& path, const CleaningResult& result, const std::string& header);

/// t, timestamp, mu_raw, sigma_raw, sigma2_raw (error variance, raw units).
void write_predictions(const std::filesystem::path& path, const TimeSeriesDataset& dataset, const Scaler& scaler,
                       const Assessment& assessment, const std::string& header);

void write_qes(const std::filesystem::path& path, const CleaningResult& result, const std::string& header);
void write_loss_history(const std::filesystem::path& path, const CleaningResult& result, const std::string& header);

/// Per-point records of one assessment in raw units.
nlohmann::json point_records(const TimeSeriesDataset& dataset, const Scaler& scaler, const Assessment& assessment);

/// Detection and forecast metrics of a cleaning run. Labels are used when the
/// input carries them.
nlohmann::json cleaning_metrics(const TimeSeriesDataset& original, const CleaningResult& result,
                                const PipelineConfig& config);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace rcdm
