#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gf/pipeline.hpp"
#include "gf/volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gf {

namespace {

const char* direction_name(ShiftDirection d) {
  switch (d) {
    case ShiftDirection::AfterGreater: return "after_greater";
    case ShiftDirection::BeforeGreater: return "before_greater";
    case ShiftDirection::None: return "none";
  }
  return "none";
}

std::optional<WilcoxonResult> paired_test(const std::vector<double>& before, const std::vector<double>& after) {
  if (before.size() < 5) return std::nullopt;
  try {
    return wilcoxon_signed_rank(before, after);
  } catch (const morphometry_error&) {
    return std::nullopt;  // all-zero differences or too few usable pairs
  }
}

void fill_tests(ReportTable& table) {
  std::vector<double> sa_b, sa_a, tgd_b, tgd_a;
  for (const auto& row : table.rows) {
    if (!row.before.valid || !row.after.valid) continue;
    sa_b.push_back(row.before.sulcus_angle_deg);
    sa_a.push_back(row.after.sulcus_angle_deg);
    tgd_b.push_back(row.before.groove_depth_mm);
    tgd_a.push_back(row.after.groove_depth_mm);
  }
  table.sa_test = paired_test(sa_b, sa_a);
  table.tgd_test = paired_test(tgd_b, tgd_a);
}

}  // namespace

ReportTable report_from_manifests(const std::vector<std::string>& manifest_paths) {
  if (manifest_paths.empty()) throw config_error("report: no manifests given");
  ReportTable table;
  for (const auto& path : manifest_paths) {
    std::ifstream in(path);
    if (!in) throw config_error("report: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RunManifest manifest = RunManifest::from_json_text(text);
    ReportRow row;
    row.case_id = fs::path(path).parent_path().filename().string();
    if (row.case_id.empty()) row.case_id = fs::path(path).stem().string();
    row.before = manifest.measurements.before;
    row.after = manifest.measurements.after;
    table.rows.push_back(std::move(row));
  }
  fill_tests(table);
  return table;
}

ReportTable compare_label_dirs(const std::string& before_dir, const std::string& after_dir,
                               const SulcusOptions& opts) {
  auto list_gvol = [](const std::string& dir) {
    if (!fs::is_directory(dir)) throw config_error("compare: not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".gvol") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
  };

  const auto before_names = list_gvol(before_dir);
  ReportTable table;
  for (const auto& name : before_names) {
    const fs::path after_path = fs::path(after_dir) / name;
    if (!fs::exists(after_path)) continue;  // unpaired cases are skipped
    ReportRow row;
    row.case_id = fs::path(name).stem().string();
    row.before = measure_sulcus(read_label_volume((fs::path(before_dir) / name).string()), opts);
    row.after = measure_sulcus(read_label_volume(after_path.string()), opts);
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw config_error("compare: no paired .gvol files found");
  fill_tests(table);
  return table;
}

std::string ReportTable::render_text() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %10s %10s %8s %10s %10s %8s\n", "case", "SA_before", "SA_after",
                "dSA", "TGD_before", "TGD_after", "dTGD");
  out += line;
  double sa_b = 0, sa_a = 0, tgd_b = 0, tgd_a = 0;
  int n_valid = 0;
  for (const auto& row : rows) {
    if (row.before.valid && row.after.valid) {
      std::snprintf(line, sizeof(line), "%-16s %10.2f %10.2f %8.2f %10.2f %10.2f %8.2f\n", row.case_id.c_str(),
                    row.before.sulcus_angle_deg, row.after.sulcus_angle_deg,
                    row.after.sulcus_angle_deg - row.before.sulcus_angle_deg, row.before.groove_depth_mm,
                    row.after.groove_depth_mm, row.after.groove_depth_mm - row.before.groove_depth_mm);
      sa_b += row.before.sulcus_angle_deg;
      sa_a += row.after.sulcus_angle_deg;
      tgd_b += row.before.groove_depth_mm;
      tgd_a += row.after.groove_depth_mm;
      ++n_valid;
    } else {
      std::snprintf(line, sizeof(line), "%-16s %10s %10s %8s %10s %10s %8s\n", row.case_id.c_str(),
                    row.before.valid ? "ok" : sulcus_reason_name(row.before.reason),
                    row.after.valid ? "ok" : sulcus_reason_name(row.after.reason), "-", "-", "-", "-");
    }
    out += line;
  }
  if (n_valid > 0) {
    std::snprintf(line, sizeof(line), "%-16s %10.2f %10.2f %8.2f %10.2f %10.2f %8.2f\n", "mean",
                  sa_b / n_valid, sa_a / n_valid, (sa_a - sa_b) / n_valid, tgd_b / n_valid, tgd_a / n_valid,
                  (tgd_a - tgd_b) / n_valid);
    out += line;
  }
  if (sa_test) {
    std::snprintf(line, sizeof(line), "SA  wilcoxon: W=%.1f p=%.6g n=%d %s (%s)\n", sa_test->w_statistic,
                  sa_test->p_value, sa_test->n, direction_name(sa_test->direction),
                  sa_test->exact ? "exact" : "normal approx");
    out += line;
  } else {
    out += "SA  wilcoxon: not computed (need >= 5 valid pairs with non-zero differences)\n";
  }
  if (tgd_test) {
    std::snprintf(line, sizeof(line), "TGD wilcoxon: W=%.1f p=%.6g n=%d %s (%s)\n", tgd_test->w_statistic,
                  tgd_test->p_value, tgd_test->n, direction_name(tgd_test->direction),
                  tgd_test->exact ? "exact" : "normal approx");
    out += line;
  } else {
    out += "TGD wilcoxon: not computed (need >= 5 valid pairs with non-zero differences)\n";
  }
  return out;
}

std::string ReportTable::render_jsonl() const {
  std::string out;
  for (const auto& row : rows) {
    json j = {{"case", row.case_id},
              {"before_valid", row.before.valid},
              {"after_valid", row.after.valid},
              {"sa_before", row.before.sulcus_angle_deg},
              {"sa_after", row.after.sulcus_angle_deg},
              {"tgd_before", row.before.groove_depth_mm},
              {"tgd_after", row.after.groove_depth_mm}};
    out += j.dump();
    out += '\n';
  }
  json summary = {{"record", "summary"}, {"cases", rows.size()}};
  auto add_test = [&](const char* name, const std::optional<WilcoxonResult>& t) {
    if (t) {
      summary[name] = {{"w", t->w_statistic},
                       {"p", t->p_value},
                       {"n", t->n},
                       {"exact", t->exact},
                       {"direction", direction_name(t->direction)}};
    } else {
      summary[name] = nullptr;
    }
  };
  add_test("sa_test", sa_test);
  add_test("tgd_test", tgd_test);
  out += summary.dump();
  out += '\n';
  return out;
}

}  // namespace gf
