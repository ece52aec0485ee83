// grooveforge: MR-only surgical planning toolkit.
// Subcommands cover the full workflow (phantom data generation, INR fusion,
// wavelet-diffusion inpainting, meshing, morphometrics) plus an orchestrated
// `run` driven by a JSON config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gf/diffusion.hpp"
#include "gf/inr.hpp"
#include "gf/mesh.hpp"
#include "gf/mesh_distance.hpp"
#include "gf/mesh_io.hpp"
#include "gf/morphometrics.hpp"
#include "gf/phantom.hpp"
#include "gf/pipeline.hpp"
#include "gf/volume_io.hpp"
#include "gf/wavelet3.hpp"

namespace fs = std::filesystem;
using namespace gf;

namespace {

int cmd_phantom(const std::string& out_dir, const TrochleaPhantomSpec& spec, int dims, double spacing,
                bool scans, double thickness) {
  fs::create_directories(out_dir);
  const Index3 d = {dims, dims, dims};
  const Vec3 sp = {spacing, spacing, spacing};
  PhantomVolumes ph = generate_phantom(spec, d, sp);
  write_volume(ph.intensity, out_dir + "/phantom_gt.gvol");
  write_volume(ph.labels, out_dir + "/phantom_labels.gvol");
  if (scans) {
    const std::array<AnisotropicSpec, 3> specs = {AnisotropicSpec{2, thickness, {}},
                                                  AnisotropicSpec{0, thickness, {}},
                                                  AnisotropicSpec{1, thickness, {}}};
    const auto vols = simulate_anisotropic_scans(ph.intensity, specs);
    write_volume(vols[0], out_dir + "/scan_axial.gvol");
    write_volume(vols[1], out_dir + "/scan_sagittal.gvol");
    write_volume(vols[2], out_dir + "/scan_coronal.gvol");
  }
  std::ofstream info(out_dir + "/phantom_info.txt", std::ios::trunc);
  info << "condyle_half_width_mm " << spec.condyle_half_width << "\n"
       << "groove_depth_mm " << spec.groove_depth << "\n"
       << "condyle_height_mm " << spec.condyle_height << "\n"
       << "patella_radius_mm " << spec.patella_radius << "\n"
       << "patella_gap_mm " << spec.patella_gap << "\n"
       << "noise_sigma " << spec.noise_sigma << "\n"
       << "seed " << spec.seed << "\n"
       << "analytic_sulcus_angle_deg " << spec.analytic_sulcus_angle_deg() << "\n"
       << "analytic_groove_depth_mm " << spec.analytic_groove_depth() << "\n";
  std::printf("phantom written to %s (analytic SA %.2f deg, TGD %.2f mm)\n", out_dir.c_str(),
              spec.analytic_sulcus_angle_deg(), spec.analytic_groove_depth());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grooveforge - MR-only trochleoplasty planning toolkit"};
  app.require_subcommand(1);

  // ---- phantom ----
  auto* sc_phantom = app.add_subcommand("phantom", "generate a trochlea phantom with known SA/TGD");
  std::string ph_out = "phantom";
  TrochleaPhantomSpec ph_spec;
  int ph_dims = 64;
  double ph_spacing = 1.0;
  bool ph_scans = false;
  double ph_thickness = 4.0;
  sc_phantom->add_option("--out", ph_out, "output directory");
  sc_phantom->add_option("--half-width", ph_spec.condyle_half_width, "condyle half width w [mm]");
  sc_phantom->add_option("--depth", ph_spec.groove_depth, "groove depth d [mm]");
  sc_phantom->add_option("--height", ph_spec.condyle_height, "condyle height h [mm]");
  sc_phantom->add_option("--patella-radius", ph_spec.patella_radius, "patella radius [mm]");
  sc_phantom->add_option("--patella-gap", ph_spec.patella_gap, "trough-to-patella-center gap [mm]");
  sc_phantom->add_option("--noise", ph_spec.noise_sigma, "gaussian noise sigma");
  sc_phantom->add_option("--seed", ph_spec.seed, "rng seed");
  sc_phantom->add_option("--dims", ph_dims, "cubic grid size");
  sc_phantom->add_option("--spacing", ph_spacing, "voxel spacing [mm]");
  sc_phantom->add_flag("--scans", ph_scans, "also write three anisotropic scans");
  sc_phantom->add_option("--thickness", ph_thickness, "scan slice thickness [mm]");

  // ---- fuse ----
  auto* sc_fuse = app.add_subcommand("fuse", "fuse three anisotropic scans into an isotropic volume (INR)");
  std::string fu_axial, fu_sagittal, fu_coronal, fu_out = "fused.gvol", fu_ckpt;
  InrConfig fu_cfg;
  int fu_dims = 64;
  std::string fu_policy = "axial";
  bool fu_verbose = false;
  sc_fuse->add_option("--axial", fu_axial, "axial scan (gvol)")->required();
  sc_fuse->add_option("--sagittal", fu_sagittal, "sagittal scan (gvol)")->required();
  sc_fuse->add_option("--coronal", fu_coronal, "coronal scan (gvol)")->required();
  sc_fuse->add_option("--out", fu_out, "output fused volume");
  sc_fuse->add_option("--checkpoint", fu_ckpt, "also save the trained model (GINR)");
  sc_fuse->add_option("--hidden", fu_cfg.hidden_width, "hidden width");
  sc_fuse->add_option("--layers", fu_cfg.layers, "linear layer count");
  sc_fuse->add_option("--omega", fu_cfg.omega0, "gabor omega0");
  sc_fuse->add_option("--sigma", fu_cfg.sigma0, "gabor sigma0");
  sc_fuse->add_option("--lr", fu_cfg.lr0, "initial learning rate");
  sc_fuse->add_option("--epochs", fu_cfg.epochs, "epochs");
  sc_fuse->add_option("--batch", fu_cfg.batch, "batch size");
  sc_fuse->add_option("--max-final-loss", fu_cfg.max_final_loss, "convergence ceiling");
  sc_fuse->add_option("--seed", fu_cfg.seed, "rng seed");
  sc_fuse->add_option("--dims", fu_dims, "output grid size");
  sc_fuse->add_option("--policy", fu_policy, "channel policy: axial|sagittal|coronal|mean");
  sc_fuse->add_flag("--verbose", fu_verbose, "print per-epoch loss");

  // ---- dwt ----
  auto* sc_dwt = app.add_subcommand("dwt", "debug: wavelet round-trip error of a volume");
  std::string dwt_file;
  sc_dwt->add_option("--roundtrip", dwt_file, "volume to transform and reconstruct")->required();

  // ---- train-wdm ----
  auto* sc_train = app.add_subcommand("train-wdm", "train the wavelet diffusion inpainter on label volumes");
  std::string tw_data, tw_out = "model.gwdm", tw_log;
  WdmConfig tw_cfg;
  bool tw_verbose = false;
  sc_train->add_option("--data", tw_data, "directory of label .gvol files")->required();
  sc_train->add_option("--out", tw_out, "output checkpoint (GWDM)");
  sc_train->add_option("--iters", tw_cfg.iterations, "training iterations");
  sc_train->add_option("--lr", tw_cfg.lr, "learning rate");
  sc_train->add_option("--width", tw_cfg.width, "denoiser width");
  sc_train->add_option("--T", tw_cfg.T, "diffusion steps");
  sc_train->add_option("--offset-mm", tw_cfg.offset_mm, "mask offset around the patella [mm]");
  sc_train->add_option("--seed", tw_cfg.seed, "rng seed");
  sc_train->add_option("--log", tw_cfg.log_path, "line-delimited training log");
  sc_train->add_flag("--verbose", tw_verbose, "print running loss");

  // ---- inpaint ----
  auto* sc_inpaint = app.add_subcommand("inpaint", "inpaint the trochlear region of a label volume");
  std::string ip_labels, ip_model, ip_out = "pseudo.gvol", ip_raw;
  double ip_offset = 30.0;
  std::uint64_t ip_seed = 1;
  sc_inpaint->add_option("--labels", ip_labels, "input label volume")->required();
  sc_inpaint->add_option("--model", ip_model, "GWDM checkpoint")->required();
  sc_inpaint->add_option("--out", ip_out, "composited output labels");
  sc_inpaint->add_option("--raw", ip_raw, "also write the raw generation");
  sc_inpaint->add_option("--offset-mm", ip_offset, "mask offset around the patella [mm]");
  sc_inpaint->add_option("--seed", ip_seed, "rng seed");

  // ---- mesh ----
  auto* sc_mesh = app.add_subcommand("mesh", "extract a label surface (marching cubes)");
  std::string me_labels, me_label = "femur", me_out = "mesh.ply";
  bool me_stl = false;
  sc_mesh->add_option("--labels", me_labels, "label volume")->required();
  sc_mesh->add_option("--label", me_label, "label name (femur|tibia|patella|fibula)");
  sc_mesh->add_option("--out", me_out, "output mesh (.ply, or .stl with --stl)");
  sc_mesh->add_flag("--stl", me_stl, "write binary STL instead of PLY");

  // ---- diffmap ----
  auto* sc_diff = app.add_subcommand("diffmap", "per-vertex distance map between two meshes");
  std::string dm_a, dm_b, dm_out = "diffmap.ply";
  bool dm_signed = false;
  sc_diff->add_option("--a", dm_a, "source mesh (its vertices are colored)")->required();
  sc_diff->add_option("--b", dm_b, "target mesh")->required();
  sc_diff->add_option("--out", dm_out, "output PLY with per-vertex distance");
  sc_diff->add_flag("--signed", dm_signed, "signed distances (normal side)");

  // ---- measure ----
  auto* sc_measure = app.add_subcommand("measure", "sulcus angle / groove depth of a label volume");
  std::string ms_labels, ms_report;
  SulcusOptions ms_opts;
  sc_measure->add_option("--labels", ms_labels, "label volume")->required();
  sc_measure->add_option("--report", ms_report, "write a JSON report");
  sc_measure->add_option("--min-peak-separation", ms_opts.min_peak_separation_mm, "peak separation [mm]");
  sc_measure->add_option("--slice-halfrange", ms_opts.slice_halfrange_mm, "slice search half range [mm]");

  // ---- compare ----
  auto* sc_compare = app.add_subcommand("compare", "paired before/after stats over two label directories");
  std::string cp_before, cp_after, cp_jsonl;
  sc_compare->add_option("--before", cp_before, "directory of before .gvol labels")->required();
  sc_compare->add_option("--after", cp_after, "directory of after .gvol labels")->required();
  sc_compare->add_option("--jsonl", cp_jsonl, "write machine-readable records");

  // ---- run ----
  auto* sc_run = app.add_subcommand("run", "run the full pipeline from a JSON config");
  std::string run_config;
  std::vector<std::string> run_sets;
  sc_run->add_option("--config", run_config, "pipeline config (JSON)")->required();
  sc_run->add_option("--set", run_sets, "override config keys, e.g. --set inr.epochs=10");

  // ---- report ----
  auto* sc_report = app.add_subcommand("report", "aggregate run manifests into a before/after table");
  std::vector<std::string> rp_manifests;
  std::string rp_jsonl;
  sc_report->add_option("manifests", rp_manifests, "manifest.json files");
  sc_report->add_option("--jsonl", rp_jsonl, "write machine-readable records");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sc_phantom) {
      return cmd_phantom(ph_out, ph_spec, ph_dims, ph_spacing, ph_scans, ph_thickness);
    }

    if (*sc_fuse) {
      fu_cfg.verbose = fu_verbose;
      std::array<Volume, 3> scans = {read_volume(fu_axial), read_volume(fu_sagittal), read_volume(fu_coronal)};
      InrTrainResult trained = train_inr(scans, fu_cfg);
      const Index3 dims = {fu_dims, fu_dims, fu_dims};
      Volume fused = sample_inr_volume(trained.model, dims, trained.model.world_lo, trained.model.world_hi,
                                       ChannelPolicy::from_string(fu_policy));
      write_volume(fused, fu_out);
      if (!fu_ckpt.empty()) save_inr(trained.model, fu_ckpt);
      std::printf("fused volume written to %s (final loss %.3e)\n", fu_out.c_str(),
                  trained.epoch_loss.back());
      return 0;
    }

    if (*sc_dwt) {
      const Volume v = read_volume(dwt_file);
      for (int a = 0; a < 3; ++a) {
        if (v.dims[a] % 2 != 0) {
          std::fprintf(stderr, "dwt: dims must be even, got %dx%dx%d\n", v.dims[0], v.dims[1], v.dims[2]);
          return 2;
        }
      }
      std::vector<double> data(v.data.begin(), v.data.end());
      const auto coeffs = dwt3<double>(data, v.dims, 1);
      const auto back = idwt3(coeffs);
      double max_err = 0.0, energy_in = 0.0, energy_out = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        max_err = std::max(max_err, std::abs(back[i] - data[i]));
        energy_in += data[i] * data[i];
      }
      for (const auto& band : coeffs.bands) {
        for (double c : band) energy_out += c * c;
      }
      std::printf("roundtrip max abs error: %.3e\n", max_err);
      std::printf("energy ratio (coeffs/input): %.12f\n", energy_in > 0 ? energy_out / energy_in : 1.0);
      return 0;
    }

    if (*sc_train) {
      tw_cfg.verbose = tw_verbose;
      std::vector<LabelVolume> corpus;
      std::vector<std::string> files;
      for (const auto& entry : fs::directory_iterator(tw_data)) {
        if (entry.path().extension() == ".gvol") files.push_back(entry.path().string());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) {
        std::fprintf(stderr, "train-wdm: no .gvol files in %s\n", tw_data.c_str());
        return 2;
      }
      corpus.reserve(files.size());
      for (const auto& f : files) corpus.push_back(read_label_volume(f));
      std::vector<const LabelVolume*> ptrs;
      for (const auto& c : corpus) ptrs.push_back(&c);
      WdmModel model = train_wdm(ptrs, tw_cfg);
      save_wdm(model, tw_out);
      std::printf("model written to %s (%zu cases, %ld iterations)\n", tw_out.c_str(), corpus.size(),
                  tw_cfg.iterations);
      return 0;
    }

    if (*sc_inpaint) {
      const LabelVolume labels = read_label_volume(ip_labels);
      WdmModel model = load_wdm(ip_model);
      ConvDenoiser denoiser(model);
      Rng rng(substream_seed(ip_seed, "inpaint"));
      MaskOptions mask{ip_offset, model.spherical_mask};
      InpaintResult result = inpaint_labels(denoiser, labels, model.schedule, mask, rng);
      write_volume(result.composited, ip_out);
      if (!ip_raw.empty()) write_volume(result.raw, ip_raw);
      std::printf("inpainted labels written to %s\n", ip_out.c_str());
      return 0;
    }

    if (*sc_mesh) {
      const LabelVolume labels = read_label_volume(me_labels);
      const Mesh mesh = mesh_label(labels, label_from_name(me_label));
      if (me_stl) write_stl(mesh, me_out);
      else write_ply(mesh, me_out);
      std::printf("%s: %zu vertices, %zu triangles\n", me_out.c_str(), mesh.vertices.size(),
                  mesh.triangles.size());
      return 0;
    }

    if (*sc_diff) {
      const Mesh a = read_ply(dm_a).mesh;
      const Mesh b = read_ply(dm_b).mesh;
      const DistanceMap map = surface_distance(a, b, {dm_signed});
      write_ply(a, dm_out, &map.distance);
      std::printf("distance map: mean %.3f mm, max %.3f mm, p95 %.3f mm\n", map.mean, map.max, map.p95);
      return 0;
    }

    if (*sc_measure) {
      const LabelVolume labels = read_label_volume(ms_labels);
      const SulcusMeasurement m = measure_sulcus(labels, ms_opts);
      if (m.valid) {
        std::printf("slice %d: SA %.2f deg, TGD %.2f mm\n", m.slice, m.sulcus_angle_deg, m.groove_depth_mm);
      } else {
        std::printf("measurement invalid: %s\n", sulcus_reason_name(m.reason));
      }
      if (!ms_report.empty()) {
        std::ofstream out(ms_report, std::ios::trunc);
        out << "{\n  \"valid\": " << (m.valid ? "true" : "false") << ",\n  \"reason\": \""
            << sulcus_reason_name(m.reason) << "\",\n  \"slice\": " << m.slice
            << ",\n  \"sulcus_angle_deg\": " << m.sulcus_angle_deg
            << ",\n  \"groove_depth_mm\": " << m.groove_depth_mm << ",\n  \"trough\": [" << m.trough[0] << ", "
            << m.trough[1] << "],\n  \"lateral_peak\": [" << m.lateral_peak[0] << ", " << m.lateral_peak[1]
            << "],\n  \"medial_peak\": [" << m.medial_peak[0] << ", " << m.medial_peak[1] << "]\n}\n";
      }
      return m.valid ? 0 : 3;
    }

    if (*sc_compare) {
      const ReportTable table = compare_label_dirs(cp_before, cp_after);
      std::fputs(table.render_text().c_str(), stdout);
      if (!cp_jsonl.empty()) {
        std::ofstream out(cp_jsonl, std::ios::trunc);
        out << table.render_jsonl();
      }
      return 0;
    }

    if (*sc_run) {
      const PipelineConfig cfg = PipelineConfig::load(run_config, run_sets);
      const RunManifest manifest = run_pipeline(cfg);
      std::printf("pipeline complete; manifest: %s/manifest.json\n", cfg.output_dir.c_str());
      const auto& m = manifest.measurements;
      if (m.before.valid && m.after.valid) {
        std::printf("SA  %.2f -> %.2f deg\nTGD %.2f -> %.2f mm\n", m.before.sulcus_angle_deg,
                    m.after.sulcus_angle_deg, m.before.groove_depth_mm, m.after.groove_depth_mm);
      }
      return 0;
    }

    if (*sc_report) {
      const ReportTable table = report_from_manifests(rp_manifests);
      std::fputs(table.render_text().c_str(), stdout);
      if (!rp_jsonl.empty()) {
        std::ofstream out(rp_jsonl, std::ios::trunc);
        out << table.render_jsonl();
      }
      return 0;
    }
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
