#pragma once

#include <filesystem>

namespace sfda::cli {

// Renders tables and static SVG plots from a completed run directory: the
// candidate risk-gap chart with the tau line, round-by-round adaptation
// curve, per-head mIoU table, and (when the directory holds several runs)
// an ablation table across routings plus a K-sweep curve.
void write_reports(const std::filesystem::path& run_or_root_dir);

}  // namespace sfda::cli
