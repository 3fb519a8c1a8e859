#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "marginlab/dataset.hpp"
#include "marginlab/optim.hpp"

namespace marginlab {

/// Shortest-exact decimal: 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

/// Parses a decimal or an exact ratio `a/b` to the nearest double.
/// Throws InvalidParam on malformed input.
double parse_number(std::string_view text);

void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

/// trajectory.csv (step_or_time, risk, norm, min_margin, q10_margin, q50_margin),
/// iterates.csv (step_or_time, max_norm, w...) and final.json in `dir`.
void write_trajectory(const Trajectory& traj, const Dataset& data,
                      const std::filesystem::path& dir, const nlohmann::json& config);

/// Rebuilds a trajectory from iterates.csv + final.json; risks and norms are
/// recomputed from the stored iterates against `data` and `loss`.
Trajectory read_trajectory(const std::filesystem::path& dir, const Dataset& data,
                           const LossSpec& loss);

} // namespace marginlab
