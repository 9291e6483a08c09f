#pragma once

#include <filesystem>
#include <vector>

#include "luseel/evaluate.hpp"

namespace luseel {

constexpr int kSeparationBins = 9;
constexpr double kSeparationBinWidth = 20.0;

// Bin index in [0, 9) for a separation in [0, 180]; 180 falls in the last bin.
int separation_bin(double sep_deg);

struct ReportFiles {
  std::filesystem::path summary;  // one row per (variant, n_sources)
  std::filesystem::path bins;     // SI-SNRi / MAE by separation bin
  std::filesystem::path scatter;  // MAE against SI-SNRi per scene
};

// Writes summary.csv, separation_bins.csv and scatter.csv into out_dir.
// An empty row set yields header-only files.
ReportFiles write_report(const std::vector<MetricRow>& rows, const std::filesystem::path& out_dir);

}  // namespace luseel
