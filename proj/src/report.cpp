#include "luseel/report.hpp"

#include <fstream>
#include <map>
#include <utility>

#include "luseel/config.hpp"
#include "luseel/errors.hpp"

namespace luseel {

namespace fs = std::filesystem;

int separation_bin(double sep_deg) {
  if (!(sep_deg >= 0.0 && sep_deg <= 180.0)) throw InputError("separation_bin: angle outside [0, 180]");
  return std::min(static_cast<int>(sep_deg / kSeparationBinWidth), kSeparationBins - 1);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

std::ofstream open(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("report: cannot write " + path.string());
  return out;
}

}  // namespace

ReportFiles write_report(const std::vector<MetricRow>& rows, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  ReportFiles files{out_dir / "summary.csv", out_dir / "separation_bins.csv", out_dir / "scatter.csv"};

  // Grouped by source count, then variant name.
  std::map<std::pair<int, std::string>, std::vector<MetricRow>> groups;
  for (const auto& r : rows) groups[{r.n_sources, r.variant}].push_back(r);

  {
    auto out = open(files.summary);
    out << "n_sources,variant,task,gcc,channels,scenes,si_snri,sdri,doa_acc_pct,mae\n";
    for (const auto& [key, group] : groups) {
      std::string task, gcc, channels;
      try {
        const auto t = traits(parse_variant(key.second));
        task = t.task();
        gcc = t.use_gcc ? "yes" : "no";
        channels = std::to_string(t.channels);
      } catch (const ConfigError&) {
        // Unknown system names are reported without wiring columns.
      }
      const auto s = summarize(group);
      out << key.first << ',' << key.second << ',' << task << ',' << gcc << ',' << channels << ',' << s.scenes << ','
          << opt(s.si_snri) << ',' << opt(s.sdri) << ','
          << opt(s.doa_acc ? std::optional<double>(*s.doa_acc * 100.0) : std::nullopt) << ',' << opt(s.mae) << "\n";
    }
  }
  {
    auto out = open(files.bins);
    out << "n_sources,variant,bin_lo_deg,bin_hi_deg,scenes,si_snri,mae\n";
    for (const auto& [key, group] : groups) {
      std::vector<std::vector<MetricRow>> bins(kSeparationBins);
      for (const auto& r : group) bins[static_cast<size_t>(separation_bin(r.sep_angle_deg))].push_back(r);
      for (int b = 0; b < kSeparationBins; ++b) {
        const auto s = summarize(bins[static_cast<size_t>(b)]);
        out << key.first << ',' << key.second << ',' << format_number(b * kSeparationBinWidth) << ','
            << format_number((b + 1) * kSeparationBinWidth) << ',' << s.scenes << ',' << opt(s.si_snri) << ','
            << opt(s.mae) << "\n";
      }
    }
  }
  {
    auto out = open(files.scatter);
    out << "n_sources,variant,scene_id,sep_angle_deg,si_snri,mae\n";
    for (const auto& [key, group] : groups) {
      for (const auto& r : group) {
        if (!r.si_snri || !r.mae) continue;
        out << key.first << ',' << key.second << ',' << r.scene_id << ',' << format_number(r.sep_angle_deg) << ','
            << format_number(*r.si_snri) << ',' << format_number(*r.mae) << "\n";
      }
    }
  }
  return files;
}

}  // namespace luseel
