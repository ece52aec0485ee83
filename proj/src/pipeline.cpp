#include "gf/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gf/binio.hpp"
#include "gf/mesh.hpp"
#include "gf/mesh_distance.hpp"
#include "gf/mesh_io.hpp"
#include "gf/rng.hpp"
#include "gf/volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gf {

namespace {

char hex_digit(unsigned v) { return v < 10 ? static_cast<char>('0' + v) : static_cast<char>('a' + v - 10); }

std::string to_hex(std::uint64_t h) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = hex_digit(h & 0xf);
    h >>= 4;
  }
  return s;
}

json sulcus_to_json(const SulcusMeasurement& m) {
  return json{{"valid", m.valid},
              {"reason", sulcus_reason_name(m.reason)},
              {"slice", m.slice},
              {"sulcus_angle_deg", m.sulcus_angle_deg},
              {"groove_depth_mm", m.groove_depth_mm},
              {"lateral_peak", {m.lateral_peak[0], m.lateral_peak[1]}},
              {"medial_peak", {m.medial_peak[0], m.medial_peak[1]}},
              {"trough", {m.trough[0], m.trough[1]}}};
}

SulcusMeasurement sulcus_from_json(const json& j) {
  SulcusMeasurement m;
  m.valid = j.at("valid").get<bool>();
  m.slice = j.at("slice").get<int>();
  m.sulcus_angle_deg = j.at("sulcus_angle_deg").get<double>();
  m.groove_depth_mm = j.at("groove_depth_mm").get<double>();
  const std::string reason = j.at("reason").get<std::string>();
  for (auto r : {SulcusInvalidReason::None, SulcusInvalidReason::NoFemur, SulcusInvalidReason::TooFewPeaks,
                 SulcusInvalidReason::NoTrough}) {
    if (reason == sulcus_reason_name(r)) m.reason = r;
  }
  auto grab = [&](const char* key, std::array<double, 2>& out) {
    if (j.contains(key)) {
      out[0] = j.at(key).at(0).get<double>();
      out[1] = j.at(key).at(1).get<double>();
    }
  };
  grab("lateral_peak", m.lateral_peak);
  grab("medial_peak", m.medial_peak);
  grab("trough", m.trough);
  return m;
}

template <class T>
void assign_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string hash_file(const std::string& path) {
  const auto bytes = bin::read_file_bytes(path);
  return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

// --- config -------------------------------------------------------------------

namespace {

json config_defaults() {
  return json{
      {"seed", 1},
      {"output_dir", "out"},
      {"threads", 0},
      {"io", {{"allow_nifti", false}}},
      {"inputs",
       {{"axial", ""}, {"sagittal", ""}, {"coronal", ""}, {"fused", ""}, {"labels", ""}}},
      {"phantom",
       {{"enabled", false},
        {"dims", 64},
        {"spacing_mm", 1.0},
        {"condyle_half_width_mm", 10.0},
        {"groove_depth_mm", 5.0},
        {"condyle_height_mm", 22.0},
        {"bone_extent_mm", {46.0, 24.0, 40.0}},
        {"patella_radius_mm", 6.0},
        {"patella_gap_mm", 9.0},
        {"groove_center_offset_mm", 0.0},
        {"noise_sigma", 0.02},
        {"phantom_seed", 0},
        {"simulate_scans", false},
        {"scan_thickness_mm", 4.0}}},
      {"inr",
       {{"enabled", true},
        {"hidden", 128},
        {"layers", 5},
        {"omega0", 20.0},
        {"sigma0", 10.0},
        {"lr", 4e-4},
        {"epochs", 100},
        {"batch", 4096},
        {"max_final_loss", 0.05},
        {"dims", 64},
        {"policy", "axial"},
        {"save_checkpoint", false}}},
      {"schedule", {{"T", 100}}},
      {"denoiser", {{"model", ""}, {"oracle_labels", ""}}},
      {"mask", {{"offset_mm", 30.0}, {"spherical", false}}},
      {"mesh", {{"label", "femur"}}},
      {"metrics",
       {{"min_peak_separation_mm", 5.0}, {"min_prominence_mm", 1.0}, {"slice_halfrange_mm", 15.0}}},
  };
}

void deep_merge(json& base, const json& patch, const std::string& path) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string where = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) {
      throw config_error(where + ": unknown configuration key");
    }
    if (base[it.key()].is_object() && it->is_object()) {
      deep_merge(base[it.key()], *it, where);
    } else {
      base[it.key()] = *it;
    }
  }
}

void apply_override(json& root, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw config_error("--set expects key=value, got: " + kv);
  const std::string key = kv.substr(0, eq);
  const std::string value = kv.substr(eq + 1);

  json* node = &root;
  std::size_t pos = 0;
  std::string walked;
  while (true) {
    const auto dotp = key.find('.', pos);
    const std::string part = key.substr(pos, dotp == std::string::npos ? std::string::npos : dotp - pos);
    walked = walked.empty() ? part : walked + "." + part;
    if (!node->contains(part)) throw config_error(walked + ": unknown configuration key");
    node = &(*node)[part];
    if (dotp == std::string::npos) break;
    pos = dotp + 1;
  }
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // treat as string
  *node = parsed;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig cfg;
  try {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.threads = j.at("threads").get<int>();
    cfg.allow_nifti = j.at("io").at("allow_nifti").get<bool>();

    const json& in = j.at("inputs");
    cfg.input_axial = in.at("axial").get<std::string>();
    cfg.input_sagittal = in.at("sagittal").get<std::string>();
    cfg.input_coronal = in.at("coronal").get<std::string>();
    cfg.input_fused = in.at("fused").get<std::string>();
    cfg.input_labels = in.at("labels").get<std::string>();

    const json& ph = j.at("phantom");
    cfg.phantom.enabled = ph.at("enabled").get<bool>();
    cfg.phantom.dims = ph.at("dims").get<int>();
    cfg.phantom.spacing_mm = ph.at("spacing_mm").get<double>();
    cfg.phantom.spec.condyle_half_width = ph.at("condyle_half_width_mm").get<double>();
    cfg.phantom.spec.groove_depth = ph.at("groove_depth_mm").get<double>();
    cfg.phantom.spec.condyle_height = ph.at("condyle_height_mm").get<double>();
    for (int a = 0; a < 3; ++a) cfg.phantom.spec.bone_extent[a] = ph.at("bone_extent_mm").at(a).get<double>();
    cfg.phantom.spec.patella_radius = ph.at("patella_radius_mm").get<double>();
    cfg.phantom.spec.patella_gap = ph.at("patella_gap_mm").get<double>();
    cfg.phantom.spec.groove_center_offset = ph.at("groove_center_offset_mm").get<double>();
    cfg.phantom.spec.noise_sigma = ph.at("noise_sigma").get<double>();
    cfg.phantom.spec.seed = ph.at("phantom_seed").get<std::uint64_t>();
    cfg.phantom.simulate_scans = ph.at("simulate_scans").get<bool>();
    cfg.phantom.scan_thickness_mm = ph.at("scan_thickness_mm").get<double>();

    const json& inr = j.at("inr");
    cfg.inr.enabled = inr.at("enabled").get<bool>();
    cfg.inr.train.hidden_width = inr.at("hidden").get<int>();
    cfg.inr.train.layers = inr.at("layers").get<int>();
    cfg.inr.train.omega0 = inr.at("omega0").get<double>();
    cfg.inr.train.sigma0 = inr.at("sigma0").get<double>();
    cfg.inr.train.lr0 = inr.at("lr").get<double>();
    cfg.inr.train.epochs = inr.at("epochs").get<int>();
    cfg.inr.train.batch = inr.at("batch").get<int>();
    cfg.inr.train.max_final_loss = inr.at("max_final_loss").get<double>();
    cfg.inr.dims = inr.at("dims").get<int>();
    cfg.inr.policy = inr.at("policy").get<std::string>();
    cfg.inr.save_checkpoint = inr.at("save_checkpoint").get<bool>();

    cfg.schedule_T = j.at("schedule").at("T").get<int>();
    cfg.denoiser_model = j.at("denoiser").at("model").get<std::string>();
    cfg.denoiser_oracle_labels = j.at("denoiser").at("oracle_labels").get<std::string>();
    cfg.mask.offset_mm = j.at("mask").at("offset_mm").get<double>();
    cfg.mask.spherical = j.at("mask").at("spherical").get<bool>();
    cfg.mesh_label = label_from_name(j.at("mesh").at("label").get<std::string>());
    cfg.metrics.min_peak_separation_mm = j.at("metrics").at("min_peak_separation_mm").get<double>();
    cfg.metrics.min_prominence_mm = j.at("metrics").at("min_prominence_mm").get<double>();
    cfg.metrics.slice_halfrange_mm = j.at("metrics").at("slice_halfrange_mm").get<double>();
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return cfg;
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw config_error(field + ": " + message);
}

void require_file(const std::string& path, const std::string& field) {
  if (!path.empty() && !fs::exists(path)) {
    throw config_error(field + ": file not found: " + path);
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text, const std::vector<std::string>& overrides) {
  json merged = config_defaults();
  json user = json::parse(text, nullptr, false);
  if (user.is_discarded()) throw config_error("config: not valid JSON");
  deep_merge(merged, user, "");
  for (const auto& kv : overrides) apply_override(merged, kv);
  PipelineConfig cfg = config_from_json(merged);
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text, overrides);
}

void PipelineConfig::validate() const {
  require(!output_dir.empty(), "output_dir", "must not be empty");
  require(threads >= 0, "threads", "must be >= 0");
  require_file(input_axial, "inputs.axial");
  require_file(input_sagittal, "inputs.sagittal");
  require_file(input_coronal, "inputs.coronal");
  require_file(input_fused, "inputs.fused");
  require_file(input_labels, "inputs.labels");
  require_file(denoiser_model, "denoiser.model");
  require_file(denoiser_oracle_labels, "denoiser.oracle_labels");

  if (phantom.enabled) {
    require(phantom.dims >= 8, "phantom.dims", "must be >= 8");
    require(phantom.spacing_mm > 0, "phantom.spacing_mm", "must be > 0");
    try {
      phantom.spec.validate();
    } catch (const std::invalid_argument& e) {
      throw config_error(std::string("phantom: ") + e.what());
    }
  } else {
    require(!input_labels.empty(), "inputs.labels", "required when phantom.enabled is false");
    const bool scans = !input_axial.empty() && !input_sagittal.empty() && !input_coronal.empty();
    require(!input_fused.empty() || (inr.enabled && scans), "inputs.fused",
            "provide a fused volume, or enable inr with all three scans, or enable the phantom");
  }

  if (inr.enabled) {
    require(inr.train.hidden_width >= 1, "inr.hidden", "must be >= 1");
    require(inr.train.layers >= 2, "inr.layers", "must be >= 2");
    require(inr.train.epochs >= 1, "inr.epochs", "must be >= 1");
    require(inr.train.batch >= 1, "inr.batch", "must be >= 1");
    require(inr.train.lr0 > 0, "inr.lr", "must be > 0");
    require(inr.dims >= 2, "inr.dims", "must be >= 2");
    ChannelPolicy::from_string(inr.policy);  // throws on bad value
  }

  require(schedule_T >= 1, "schedule.T", "must be >= 1");
  require(denoiser_model.empty() || denoiser_oracle_labels.empty(), "denoiser.model",
          "model and oracle_labels are mutually exclusive");
  require(!denoiser_model.empty() || !denoiser_oracle_labels.empty(), "denoiser.model",
          "provide a GWDM checkpoint or denoiser.oracle_labels");
  require(mask.offset_mm >= 0, "mask.offset_mm", "must be >= 0");
  require(mesh_label >= 1 && mesh_label < kLabelCount, "mesh.label", "must name a non-background label");
  require(metrics.min_peak_separation_mm > 0, "metrics.min_peak_separation_mm", "must be > 0");
  require(metrics.min_prominence_mm >= 0, "metrics.min_prominence_mm", "must be >= 0");
  require(metrics.slice_halfrange_mm > 0, "metrics.slice_halfrange_mm", "must be > 0");
}

std::string PipelineConfig::to_json() const {
  json j = config_defaults();
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["threads"] = threads;
  j["io"]["allow_nifti"] = allow_nifti;
  j["inputs"] = {{"axial", input_axial},
                 {"sagittal", input_sagittal},
                 {"coronal", input_coronal},
                 {"fused", input_fused},
                 {"labels", input_labels}};
  j["phantom"] = {{"enabled", phantom.enabled},
                  {"dims", phantom.dims},
                  {"spacing_mm", phantom.spacing_mm},
                  {"condyle_half_width_mm", phantom.spec.condyle_half_width},
                  {"groove_depth_mm", phantom.spec.groove_depth},
                  {"condyle_height_mm", phantom.spec.condyle_height},
                  {"bone_extent_mm", {phantom.spec.bone_extent[0], phantom.spec.bone_extent[1], phantom.spec.bone_extent[2]}},
                  {"patella_radius_mm", phantom.spec.patella_radius},
                  {"patella_gap_mm", phantom.spec.patella_gap},
                  {"groove_center_offset_mm", phantom.spec.groove_center_offset},
                  {"noise_sigma", phantom.spec.noise_sigma},
                  {"phantom_seed", phantom.spec.seed},
                  {"simulate_scans", phantom.simulate_scans},
                  {"scan_thickness_mm", phantom.scan_thickness_mm}};
  j["inr"] = {{"enabled", inr.enabled},
              {"hidden", inr.train.hidden_width},
              {"layers", inr.train.layers},
              {"omega0", inr.train.omega0},
              {"sigma0", inr.train.sigma0},
              {"lr", inr.train.lr0},
              {"epochs", inr.train.epochs},
              {"batch", inr.train.batch},
              {"max_final_loss", inr.train.max_final_loss},
              {"dims", inr.dims},
              {"policy", inr.policy},
              {"save_checkpoint", inr.save_checkpoint}};
  j["schedule"] = {{"T", schedule_T}};
  j["denoiser"] = {{"model", denoiser_model}, {"oracle_labels", denoiser_oracle_labels}};
  j["mask"] = {{"offset_mm", mask.offset_mm}, {"spherical", mask.spherical}};
  j["mesh"] = {{"label", label_name(mesh_label)}};
  j["metrics"] = {{"min_peak_separation_mm", metrics.min_peak_separation_mm},
                  {"min_prominence_mm", metrics.min_prominence_mm},
                  {"slice_halfrange_mm", metrics.slice_halfrange_mm}};
  return j.dump(2);
}

// --- manifest -------------------------------------------------------------------

std::string RunManifest::to_json() const {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["config"] = json::parse(config_json);
  j["stages"] = json::array();
  for (const auto& s : stages) {
    json outs = json::object();
    for (const auto& [file, hash] : s.outputs) outs[file] = hash;
    j["stages"].push_back(
        {{"name", s.name}, {"key", s.key}, {"seconds", s.seconds}, {"reused", s.reused}, {"outputs", outs}});
  }
  j["measurements"] = {{"before", sulcus_to_json(measurements.before)},
                       {"after", sulcus_to_json(measurements.after)},
                       {"distance",
                        {{"mean", measurements.distance_mean},
                         {"max", measurements.distance_max},
                         {"p95", measurements.distance_p95}}}};
  j["outputs_digest"] = outputs_digest;
  if (error) j["error"] = *error;
  return j.dump(2);
}

RunManifest RunManifest::from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.contains("stages") || !j.contains("measurements") || !j.contains("config")) {
    throw config_error("manifest: schema mismatch");
  }
  RunManifest m;
  m.config_json = j.at("config").dump(2);
  for (const auto& s : j.at("stages")) {
    StageRecord r;
    r.name = s.at("name").get<std::string>();
    r.key = s.at("key").get<std::string>();
    r.seconds = s.at("seconds").get<double>();
    assign_if(s, "reused", r.reused);
    for (auto it = s.at("outputs").begin(); it != s.at("outputs").end(); ++it) {
      r.outputs[it.key()] = it->get<std::string>();
    }
    m.stages.push_back(std::move(r));
  }
  const json& meas = j.at("measurements");
  m.measurements.before = sulcus_from_json(meas.at("before"));
  m.measurements.after = sulcus_from_json(meas.at("after"));
  m.measurements.distance_mean = meas.at("distance").at("mean").get<double>();
  m.measurements.distance_max = meas.at("distance").at("max").get<double>();
  m.measurements.distance_p95 = meas.at("distance").at("p95").get<double>();
  assign_if(j, "outputs_digest", m.outputs_digest);
  if (j.contains("error")) m.error = j.at("error").get<std::string>();
  return m;
}

// --- runner ---------------------------------------------------------------------

namespace {

struct StageRunner {
  const PipelineConfig& cfg;
  fs::path out;
  std::vector<StageRecord> previous;
  RunManifest manifest;

  std::string path(const std::string& name) const { return (out / name).string(); }

  const StageRecord* find_previous(const std::string& name, const std::string& key) const {
    for (const auto& r : previous) {
      if (r.name == name && r.key == key) return &r;
    }
    return nullptr;
  }

  // Runs `body` unless a previous record with the same key exists and every
  // output file still matches its recorded hash.
  template <class Body>
  void stage(const std::string& name, const json& key_material, const std::vector<std::string>& outputs,
             Body&& body) {
    const std::string dump = key_material.dump();
    const std::string key = to_hex(fnv1a64(dump.data(), dump.size()));

    if (const StageRecord* prev = find_previous(name, key)) {
      bool fresh = true;
      for (const auto& file : outputs) {
        const auto it = prev->outputs.find(file);
        if (it == prev->outputs.end() || !fs::exists(path(file)) || hash_file(path(file)) != it->second) {
          fresh = false;
          break;
        }
      }
      if (fresh) {
        StageRecord r = *prev;
        r.reused = true;
        manifest.stages.push_back(std::move(r));
        return;
      }
    }

    StageRecord r;
    r.name = name;
    r.key = key;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const config_error&) {
      throw;
    } catch (const std::exception& e) {
      throw stage_error(name, e.what());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& file : outputs) {
      if (!fs::exists(path(file))) throw stage_error(name, "expected output missing: " + file);
      r.outputs[file] = hash_file(path(file));
    }
    manifest.stages.push_back(std::move(r));
  }

  std::string input_hash(const std::string& file_path) const {
    return file_path.empty() ? std::string("-") : hash_file(file_path);
  }
};

LabelVolume load_labels_any(const std::string& path, bool allow_nifti) {
  if (path.size() > 4 && (path.substr(path.size() - 4) == ".nii")) {
    if (!allow_nifti) throw config_error("inputs.labels: NIfTI import is disabled (io.allow_nifti)");
    return read_nifti_labels(path);
  }
  return read_label_volume(path);
}

Volume load_volume_any(const std::string& path, bool allow_nifti, const std::string& field) {
  if (path.size() > 4 && (path.substr(path.size() - 4) == ".nii")) {
    if (!allow_nifti) throw config_error(field + ": NIfTI import is disabled (io.allow_nifti)");
    return read_nifti_volume(path);
  }
  return read_volume(path);
}

std::string compute_outputs_digest(const std::vector<StageRecord>& stages) {
  std::string acc;
  for (const auto& s : stages) {
    for (const auto& [file, hash] : s.outputs) {
      acc += s.name;
      acc += '/';
      acc += file;
      acc += ':';
      acc += hash;
      acc += ';';
    }
  }
  return to_hex(fnv1a64(acc.data(), acc.size()));
}

void write_text_atomic(const std::string& final_path, const std::string& text) {
  const std::string tmp = final_path + ".tmp";
  {
    std::ofstream outf(tmp, std::ios::trunc);
    if (!outf) throw io_error("cannot write " + tmp);
    outf << text;
  }
  fs::rename(tmp, final_path);
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.threads > 0 && std::getenv("GROOVEFORGE_THREADS") == nullptr) {
    setenv("GROOVEFORGE_THREADS", std::to_string(cfg.threads).c_str(), 0);
  }

  StageRunner run{cfg, fs::path(cfg.output_dir), {}, {}};
  fs::create_directories(run.out);
  run.manifest.config_json = cfg.to_json();

  // Prior manifest enables stage reuse.
  const std::string manifest_path = run.path("manifest.json");
  if (fs::exists(manifest_path)) {
    try {
      std::ifstream in(manifest_path);
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      run.previous = RunManifest::from_json_text(text).stages;
    } catch (...) {
      run.previous.clear();  // unreadable manifests are ignored
    }
  }

  auto finalize_error = [&](const std::string& message) {
    run.manifest.outputs_digest = compute_outputs_digest(run.manifest.stages);
    run.manifest.error = message;
    write_text_atomic(manifest_path, run.manifest.to_json());
  };

  try {
    // ---- phantom ----
    if (cfg.phantom.enabled) {
      json key = {{"phantom",
                   json::parse(cfg.to_json())["phantom"]}};
      std::vector<std::string> outputs = {"phantom_gt.gvol", "phantom_labels.gvol", "phantom_info.txt"};
      if (cfg.phantom.simulate_scans) {
        outputs.insert(outputs.end(), {"scan_axial.gvol", "scan_sagittal.gvol", "scan_coronal.gvol"});
      }
      run.stage("phantom", key, outputs, [&] {
        const Index3 dims = {cfg.phantom.dims, cfg.phantom.dims, cfg.phantom.dims};
        const Vec3 spacing = {cfg.phantom.spacing_mm, cfg.phantom.spacing_mm, cfg.phantom.spacing_mm};
        TrochleaPhantomSpec spec = cfg.phantom.spec;
        if (spec.seed == 0) spec.seed = substream_seed(cfg.seed, "phantom");
        PhantomVolumes ph = generate_phantom(spec, dims, spacing);
        write_volume(ph.intensity, run.path("phantom_gt.gvol"));
        write_volume(ph.labels, run.path("phantom_labels.gvol"));
        std::ofstream info(run.path("phantom_info.txt"), std::ios::trunc);
        info << "condyle_half_width_mm " << spec.condyle_half_width << "\n"
             << "groove_depth_mm " << spec.groove_depth << "\n"
             << "condyle_height_mm " << spec.condyle_height << "\n"
             << "patella_radius_mm " << spec.patella_radius << "\n"
             << "patella_gap_mm " << spec.patella_gap << "\n"
             << "noise_sigma " << spec.noise_sigma << "\n"
             << "seed " << spec.seed << "\n"
             << "analytic_sulcus_angle_deg " << spec.analytic_sulcus_angle_deg() << "\n"
             << "analytic_groove_depth_mm " << spec.analytic_groove_depth() << "\n";
        if (cfg.phantom.simulate_scans) {
          const std::array<AnisotropicSpec, 3> specs = {
              AnisotropicSpec{2, cfg.phantom.scan_thickness_mm, {}},
              AnisotropicSpec{0, cfg.phantom.scan_thickness_mm, {}},
              AnisotropicSpec{1, cfg.phantom.scan_thickness_mm, {}}};
          const auto scans = simulate_anisotropic_scans(ph.intensity, specs);
          write_volume(scans[0], run.path("scan_axial.gvol"));
          write_volume(scans[1], run.path("scan_sagittal.gvol"));
          write_volume(scans[2], run.path("scan_coronal.gvol"));
        }
      });
    }

    const bool scans_from_phantom = cfg.phantom.enabled && cfg.phantom.simulate_scans;
    const std::string axial = scans_from_phantom ? run.path("scan_axial.gvol") : cfg.input_axial;
    const std::string sagittal = scans_from_phantom ? run.path("scan_sagittal.gvol") : cfg.input_sagittal;
    const std::string coronal = scans_from_phantom ? run.path("scan_coronal.gvol") : cfg.input_coronal;
    const bool have_scans = !axial.empty() && !sagittal.empty() && !coronal.empty();

    // ---- fuse ----
    {
      json key = {{"inr", json::parse(cfg.to_json())["inr"]},
                  {"seed", cfg.seed},
                  {"fused_in", run.input_hash(cfg.input_fused)},
                  {"axial", run.input_hash(have_scans ? axial : "")},
                  {"sagittal", run.input_hash(have_scans ? sagittal : "")},
                  {"coronal", run.input_hash(have_scans ? coronal : "")},
                  {"phantom_gt",
                   cfg.phantom.enabled ? run.input_hash(run.path("phantom_gt.gvol")) : std::string("-")}};
      std::vector<std::string> outputs = {"fused.gvol"};
      const bool training = cfg.input_fused.empty() && cfg.inr.enabled && have_scans;
      if (training && cfg.inr.save_checkpoint) outputs.push_back("inr_model.ginr");
      run.stage("fuse", key, outputs, [&] {
        if (!cfg.input_fused.empty()) {
          Volume fused = load_volume_any(cfg.input_fused, cfg.allow_nifti, "inputs.fused");
          write_volume(fused, run.path("fused.gvol"));
        } else if (training) {
          std::array<Volume, 3> scans = {read_volume(axial), read_volume(sagittal), read_volume(coronal)};
          InrConfig train_cfg = cfg.inr.train;
          train_cfg.seed = substream_seed(cfg.seed, "fuse");
          InrTrainResult trained = train_inr(scans, train_cfg);
          const Index3 dims = {cfg.inr.dims, cfg.inr.dims, cfg.inr.dims};
          Volume fused = sample_inr_volume(trained.model, dims, trained.model.world_lo, trained.model.world_hi,
                                           ChannelPolicy::from_string(cfg.inr.policy));
          write_volume(fused, run.path("fused.gvol"));
          if (cfg.inr.save_checkpoint) save_inr(trained.model, run.path("inr_model.ginr"));
        } else {
          // phantom ground truth stands in for the fused volume
          Volume fused = read_volume(run.path("phantom_gt.gvol"));
          write_volume(fused, run.path("fused.gvol"));
        }
      });
    }

    // ---- labels ----
    {
      const std::string source = cfg.phantom.enabled ? run.path("phantom_labels.gvol") : cfg.input_labels;
      json key = {{"labels_in", run.input_hash(source)}, {"allow_nifti", cfg.allow_nifti}};
      run.stage("labels", key, {"labels.gvol"}, [&] {
        LabelVolume labels = cfg.phantom.enabled ? read_label_volume(source)
                                                 : load_labels_any(source, cfg.allow_nifti);
        write_volume(labels, run.path("labels.gvol"));
      });
    }

    // ---- mask ----
    {
      json key = {{"offset_mm", cfg.mask.offset_mm},
                  {"spherical", cfg.mask.spherical},
                  {"labels", run.input_hash(run.path("labels.gvol"))}};
      run.stage("mask", key, {"mask.gvol", "condition.gvol"}, [&] {
        const LabelVolume labels = read_label_volume(run.path("labels.gvol"));
        const LabelVolume mask = build_mask(labels, cfg.mask);
        write_volume(mask, run.path("mask.gvol"));
        write_volume(apply_mask(labels, mask), run.path("condition.gvol"));
      });
    }

    // ---- inpaint ----
    {
      json key = {{"T", cfg.schedule_T},
                  {"seed", cfg.seed},
                  {"model", run.input_hash(cfg.denoiser_model)},
                  {"oracle", run.input_hash(cfg.denoiser_oracle_labels)},
                  {"mask", run.input_hash(run.path("mask.gvol"))},
                  {"labels", run.input_hash(run.path("labels.gvol"))},
                  {"offset_mm", cfg.mask.offset_mm},
                  {"spherical", cfg.mask.spherical}};
      run.stage("inpaint", key, {"pseudo.gvol", "pseudo_raw.gvol"}, [&] {
        const LabelVolume labels = read_label_volume(run.path("labels.gvol"));
        Rng rng(substream_seed(cfg.seed, "inpaint"));
        InpaintResult result = [&] {
          if (!cfg.denoiser_oracle_labels.empty()) {
            const LabelVolume target = load_labels_any(cfg.denoiser_oracle_labels, cfg.allow_nifti);
            if (target.dims != labels.dims) {
              throw diffusion_error("oracle_labels dims differ from input labels");
            }
            OracleDenoiser oracle(target);
            return inpaint_labels(oracle, labels, default_schedule(cfg.schedule_T), cfg.mask, rng);
          }
          WdmModel model = load_wdm(cfg.denoiser_model);
          ConvDenoiser denoiser(model);
          return inpaint_labels(denoiser, labels, model.schedule, cfg.mask, rng);
        }();
        write_volume(result.composited, run.path("pseudo.gvol"));
        write_volume(result.raw, run.path("pseudo_raw.gvol"));
      });
    }

    // ---- mesh ----
    {
      json key = {{"label", cfg.mesh_label},
                  {"before", run.input_hash(run.path("labels.gvol"))},
                  {"after", run.input_hash(run.path("pseudo.gvol"))}};
      run.stage("mesh", key, {"mesh_before.ply", "mesh_after.ply"}, [&] {
        const LabelVolume before = read_label_volume(run.path("labels.gvol"));
        const LabelVolume after = read_label_volume(run.path("pseudo.gvol"));
        const Mesh mb = mesh_label(before, cfg.mesh_label);
        const Mesh ma = mesh_label(after, cfg.mesh_label);
        if (mb.triangles.empty() || ma.triangles.empty()) {
          throw mesh_error(std::string("no surface found for label ") + label_name(cfg.mesh_label));
        }
        write_ply(mb, run.path("mesh_before.ply"));
        write_ply(ma, run.path("mesh_after.ply"));
      });
    }

    // ---- diffmap ----
    {
      json key = {{"a", run.input_hash(run.path("mesh_before.ply"))},
                  {"b", run.input_hash(run.path("mesh_after.ply"))}};
      run.stage("diffmap", key, {"diffmap.ply", "diffmap_stats.json"}, [&] {
        const Mesh a = read_ply(run.path("mesh_before.ply")).mesh;
        const Mesh b = read_ply(run.path("mesh_after.ply")).mesh;
        const DistanceMap map = surface_distance(a, b);
        write_ply(a, run.path("diffmap.ply"), &map.distance);
        json stats = {{"mean", map.mean}, {"max", map.max}, {"p95", map.p95}};
        write_text_atomic(run.path("diffmap_stats.json"), stats.dump(2));
      });
    }

    // ---- measure ----
    {
      json key = {{"metrics", json::parse(cfg.to_json())["metrics"]},
                  {"before", run.input_hash(run.path("labels.gvol"))},
                  {"after", run.input_hash(run.path("pseudo.gvol"))}};
      run.stage("measure", key, {"measurements.json"}, [&] {
        const LabelVolume before = read_label_volume(run.path("labels.gvol"));
        const LabelVolume after = read_label_volume(run.path("pseudo.gvol"));
        json j = {{"before", sulcus_to_json(measure_sulcus(before, cfg.metrics))},
                  {"after", sulcus_to_json(measure_sulcus(after, cfg.metrics))}};
        write_text_atomic(run.path("measurements.json"), j.dump(2));
      });
    }
  } catch (const stage_error& e) {
    finalize_error(e.what());
    throw;
  } catch (const std::exception& e) {
    finalize_error(e.what());
    throw;
  }

  // Collect the measurement summary from stage outputs.
  {
    std::ifstream meas(run.path("measurements.json"));
    json j = json::parse(meas);
    run.manifest.measurements.before = sulcus_from_json(j.at("before"));
    run.manifest.measurements.after = sulcus_from_json(j.at("after"));
    std::ifstream stats(run.path("diffmap_stats.json"));
    json s = json::parse(stats);
    run.manifest.measurements.distance_mean = s.at("mean").get<double>();
    run.manifest.measurements.distance_max = s.at("max").get<double>();
    run.manifest.measurements.distance_p95 = s.at("p95").get<double>();
  }

  run.manifest.outputs_digest = compute_outputs_digest(run.manifest.stages);
  write_text_atomic(manifest_path, run.manifest.to_json());
  return run.manifest;
}

}  // namespace gf
