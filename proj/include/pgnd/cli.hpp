#pragma once

#include <string>

#include "pgnd/train.hpp"

namespace pgnd {

// Entry point of the `pgnd` executable. Parses argv, dispatches one
// subcommand (gen | train | eval | plan | skin | plot), and maps failures to
// exit codes: 0 success, 1 bad input (flags, files, configs), 2 runtime
// failure (simulation blow-up, planning failure, internal errors).
int cli_main(int argc, const char* const* argv);

// Deterministic renderings of metric reports (no timestamps, fixed layout):
// a grouped bar chart with error bars, and its CSV twin.
std::string render_report_svg(const NamedReports& methods);
std::string render_report_csv(const NamedReports& methods);

}  // namespace pgnd
