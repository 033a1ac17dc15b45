#ifndef COREX_PERSISTENCE_HPP
#define COREX_PERSISTENCE_HPP

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "corex/model.hpp"

namespace corex {

/// Current model file format version.
inline constexpr int kModelFormatVersion = 1;

// Model file layout:
//   8 bytes   magic "CRXMODEL"
//   u32       format version
//   u64       header length H
//   H bytes   JSON header: dims, config (seed included), anchors, orientation,
//             and the names and element counts of the arrays that follow
//   arrays    little-endian IEEE doubles: alpha, log_prior, log_cond, log_marg, mi
void write_model(std::ostream& out, const LatentFactorModel& model);
LatentFactorModel read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const LatentFactorModel& model);
LatentFactorModel load_model(const std::filesystem::path& path);

nlohmann::json config_to_json(const FitConfig& config);
FitConfig config_from_json(const nlohmann::json& j);

/// {"tc_history", "tc_per_factor", "tc_total", "iterations_run", "converged"}
nlohmann::json fit_report_to_json(const FitReport& report);

/// Writes `contents` to a sibling temp file and renames it over `path`, so a
/// failed run never leaves a partial output behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace corex

#endif  // COREX_PERSISTENCE_HPP
