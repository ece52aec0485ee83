#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gf/diffusion.hpp"
#include "gf/inr.hpp"
#include "gf/morphometrics.hpp"
#include "gf/phantom.hpp"
#include "gf/volume.hpp"

// End-to-end workflow: (phantom) -> fuse -> labels -> mask -> inpaint ->
// mesh -> diffmap -> measure, with stage-level resumability keyed on config
// and input hashes, and one manifest per run.

namespace gf {

inline constexpr const char* kToolName = "grooveforge";
inline constexpr const char* kToolVersion = "0.1.0";

// Configuration / usage problems; CLI maps these to exit code 2.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage failed; CLI maps these to exit code 3.
class stage_error : public std::runtime_error {
 public:
  stage_error(const std::string& stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "': " + what), stage_name(stage) {}
  std::string stage_name;
};

struct PhantomStageConfig {
  bool enabled = false;
  int dims = 64;
  double spacing_mm = 1.0;
  TrochleaPhantomSpec spec;
  bool simulate_scans = false;
  double scan_thickness_mm = 4.0;
};

struct InrStageConfig {
  bool enabled = true;
  InrConfig train;
  int dims = 64;
  std::string policy = "axial";
  bool save_checkpoint = false;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int threads = 0;  // 0 = leave GROOVEFORGE_THREADS / hardware default
  bool allow_nifti = false;

  std::string input_axial, input_sagittal, input_coronal;
  std::string input_fused;
  std::string input_labels;

  PhantomStageConfig phantom;
  InrStageConfig inr;

  int schedule_T = 100;
  std::string denoiser_model;         // GWDM checkpoint
  std::string denoiser_oracle_labels; // evaluation facility: oracle x0 source
  MaskOptions mask;
  std::int32_t mesh_label = kFemur;
  SulcusOptions metrics;

  // Parses the structured config file, applies key=value overrides, then
  // validates. Throws config_error with the offending field path.
  static PipelineConfig load(const std::string& path, const std::vector<std::string>& overrides = {});
  static PipelineConfig from_json_text(const std::string& text, const std::vector<std::string>& overrides = {});
  void validate() const;
  std::string to_json() const;  // canonical snapshot (sorted keys)
};

struct StageRecord {
  std::string name;
  std::string key;  // hash of stage config + input hashes
  double seconds = 0.0;
  bool reused = false;
  std::map<std::string, std::string> outputs;  // file name -> content hash
};

struct MeasurementSummary {
  SulcusMeasurement before, after;
  double distance_mean = 0.0, distance_max = 0.0, distance_p95 = 0.0;
};

struct RunManifest {
  std::string config_json;
  std::vector<StageRecord> stages;
  MeasurementSummary measurements;
  std::string outputs_digest;  // hash over (stage, file, hash) triples
  std::optional<std::string> error;

  std::string to_json() const;
  static RunManifest from_json_text(const std::string& text);
};

// Executes all stages; writes artifacts plus <output_dir>/manifest.json
// (atomically). Existing stage outputs with matching keys and hashes are
// reused instead of recomputed.
RunManifest run_pipeline(const PipelineConfig& cfg);

std::string hash_file(const std::string& path);  // fnv1a64 hex

// --- reporting -----------------------------------------------------------------

struct ReportRow {
  std::string case_id;
  SulcusMeasurement before, after;
};

struct ReportTable {
  std::vector<ReportRow> rows;
  std::optional<WilcoxonResult> sa_test, tgd_test;

  std::string render_text() const;
  std::string render_jsonl() const;
};

// Aggregates manifests written by run_pipeline. Throws config_error on an
// empty list or a schema mismatch.
ReportTable report_from_manifests(const std::vector<std::string>& manifest_paths);

// Pairs label volumes by filename across two directories and measures both.
ReportTable compare_label_dirs(const std::string& before_dir, const std::string& after_dir,
                               const SulcusOptions& opts = {});

}  // namespace gf
