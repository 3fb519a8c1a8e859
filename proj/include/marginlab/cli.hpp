#pragma once

#include <filesystem>

namespace marginlab {

/// Parses argv and dispatches to a subcommand. Returns the process exit code:
/// 0 ok, 1 certified bound violated, 2 every report had an unmet precondition,
/// 3 usage, 4 runtime.
int run_cli(int argc, char** argv);

/// Collects every trajectory under `report_dir` into one long-format CSV
/// (series, x, y) next to them. Throws MissingInput when none is found.
std::filesystem::path emit_plot_data(const std::filesystem::path& report_dir);

} // namespace marginlab
