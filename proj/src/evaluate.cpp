#include "luseel/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "luseel/errors.hpp"
#include "luseel/localization.hpp"
#include "luseel/objectives.hpp"

namespace luseel {

namespace fs = std::filesystem;

MetricRow score_scene(const std::string& variant, const SceneSpec& spec, const std::optional<Waveform>& estimate,
                      const Waveform& mixture, const Waveform& reference, std::optional<double> pred_deg,
                      double true_deg) {
  MetricRow row;
  row.variant = variant;
  row.scene_id = spec.id;
  row.n_sources = static_cast<int>(spec.sources.size());
  row.sep_angle_deg = target_separation_deg(spec);
  if (estimate) {
    row.si_snri = si_snri(*estimate, mixture, reference);
    row.sdri = sdri(*estimate, mixture, reference);
  }
  if (pred_deg) {
    const auto m = doa_metrics(*pred_deg, true_deg);
    row.doa_hit = m.hit;
    row.mae = m.error_deg;
  }
  return row;
}

EvalResult evaluate(LuseelModel& model, const EmbeddingProvider& provider, const std::vector<SceneSpec>& scenes,
                    const Corpus& corpus, const Renderer& renderer) {
  EvalResult res;
  const auto t = model->traits();
  const std::string variant = to_string(model->config().variant);
  model->eval();
  torch::NoGradGuard guard;
  for (const auto& spec : scenes) {
    const auto scene = render_scene(spec, corpus, renderer);
    const auto out = model->forward(scene.mixture.samples().unsqueeze(0), {provider.embed(scene.prompt)});
    const Waveform mixture(model->model_input(scene.mixture.samples()), scene.mixture.sample_rate());
    const Waveform reference(model->reference(scene.target.samples()), scene.target.sample_rate());
    std::optional<Waveform> estimate;
    if (t.extraction) estimate = Waveform(out.estimate.squeeze(0).to(torch::kFloat64), scene.mixture.sample_rate());
    std::optional<double> pred;
    if (t.localization) {
      pred = decode_azimuth(out.doa.squeeze(0));
      const auto m = doa_metrics(*pred, scene.target_azimuth_deg);
      res.doa.push_back(DoaRecord{spec.id, scene.target_azimuth_deg, *pred,
                                  static_cast<int>(out.doa.squeeze(0).argmax().item<int64_t>()), m.error_deg});
    }
    res.rows.push_back(score_scene(variant, spec, estimate, mixture, reference, pred, scene.target_azimuth_deg));
  }
  return res;
}

MetricSummary summarize(const std::vector<MetricRow>& rows) {
  MetricSummary s;
  s.scenes = rows.size();
  double a = 0, b = 0, c = 0, d = 0;
  size_t ne = 0, nl = 0;
  for (const auto& r : rows) {
    if (r.si_snri && r.sdri) {
      a += *r.si_snri;
      b += *r.sdri;
      ++ne;
    }
    if (r.doa_hit && r.mae) {
      c += *r.doa_hit ? 1.0 : 0.0;
      d += *r.mae;
      ++nl;
    }
  }
  if (ne > 0) {
    s.si_snri = a / static_cast<double>(ne);
    s.sdri = b / static_cast<double>(ne);
  }
  if (nl > 0) {
    s.doa_acc = c / static_cast<double>(nl);
    s.mae = d / static_cast<double>(nl);
  }
  return s;
}

std::string format_number(double v) {
  if (!std::isfinite(v)) throw NumericError("format", "non-finite metric value");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

namespace {

const char* kHeader = "variant,scene_id,n_sources,sep_angle_deg,si_snri,sdri,doa_hit,mae";

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw DataError("rows: bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_rows_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("rows: cannot write " + path.string());
  out << kHeader << "\n";
  for (const auto& r : rows) {
    if (r.scene_id.find(',') != std::string::npos || r.variant.find(',') != std::string::npos) {
      throw DataError("rows: identifiers must not contain commas");
    }
    out << r.variant << ',' << r.scene_id << ',' << r.n_sources << ',' << format_number(r.sep_angle_deg) << ','
        << opt(r.si_snri) << ',' << opt(r.sdri) << ',' << (r.doa_hit ? (*r.doa_hit ? "1" : "0") : "") << ','
        << opt(r.mae) << "\n";
  }
}

std::vector<MetricRow> read_rows_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("rows: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split(line) != split(kHeader)) throw DataError("rows: unexpected header in " + path.string());
  std::vector<MetricRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 8) throw DataError("rows: line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    try {
      MetricRow r;
      r.variant = f[0];
      r.scene_id = f[1];
      r.n_sources = std::stoi(f[2]);
      r.sep_angle_deg = std::stod(f[3]);
      r.si_snri = parse_opt(f[4]);
      r.sdri = parse_opt(f[5]);
      if (!f[6].empty()) {
        if (f[6] != "0" && f[6] != "1") throw DataError("bad doa_hit");
        r.doa_hit = f[6] == "1";
      }
      r.mae = parse_opt(f[7]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError("rows: line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_doa_jsonl(const fs::path& path, const std::vector<DoaRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("doa: cannot write " + path.string());
  for (const auto& r : records) {
    out << nlohmann::json{{"scene_id", r.scene_id},
                          {"true_deg", r.true_deg},
                          {"pred_deg", r.pred_deg},
                          {"probs_argmax", r.probs_argmax},
                          {"mae_deg", r.mae_deg}}
               .dump()
        << "\n";
  }
}

}  // namespace luseel
