// Command-line front end: synth, validate, metrics, preview.

#include "scenesynth/scenesynth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace ss = scenesynth;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kBackend = 3 };

int run_synth(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::size_t> scenes,
              std::optional<std::string> out, std::optional<std::size_t> jobs) {
  ss::PipelineConfig cfg = ss::load_config(config_path);
  if (seed) cfg.master_seed = *seed;
  if (scenes) cfg.scene_count = *scenes;
  if (out) cfg.output_dir = *out;
  if (jobs) cfg.parallelism = *jobs;
  cfg.validate();
  ss::PipelineContext ctx(cfg);
  const auto res = ss::synth(ctx);
  std::size_t placed = 0, candidates = 0;
  for (const auto& r : res.reports) {
    if (!r.ok) continue;
    placed += r.floor.placed + r.wall.placed + r.supported.placed;
    candidates += r.floor.candidates + r.wall.candidates + r.supported.candidates;
  }
  fmt::print("{} scenes written to {} ({} failed); placed {}/{} candidate objects\n", res.manifest.scenes.size(),
             res.root.string(), res.manifest.failed_scenes.size(), placed, candidates);
  return kOk;
}

int run_validate(const std::string& dataset) {
  const auto rep = ss::validate_dataset(dataset);
  for (const auto& i : rep.issues) {
    fmt::print("{}: {}\n", i.scene_id.empty() ? "<dataset>" : i.scene_id, i.message);
  }
  fmt::print("{} scenes checked, {} violations\n", rep.scenes_checked, rep.issues.size());
  return rep.ok() ? kOk : kInvalid;
}

int run_metrics(const std::string& dataset, const ss::MetricsOptions& opt) {
  const auto rep = ss::compute_dataset_metrics(dataset, opt);
  const auto j = rep.to_json();
  ss::write_json_file(std::filesystem::path(dataset) / "metrics.json", j);
  fmt::print("{}\n", j.dump(2));
  if (opt.layout_backend && !rep.layout_scores.empty() && !rep.mean_layout_score()) {
    ss::log_error("layout backend produced no usable score");
    return kBackend;
  }
  return kOk;
}

int run_preview(const std::string& scene_dir, const std::string& out_png, const std::string& catalog_path) {
  std::filesystem::path dir(scene_dir);
  std::string manifest = catalog_path;
  if (manifest.empty()) {
    // scenes/<id> sits two levels below the dataset root.
    const auto root = dir.lexically_normal().parent_path().parent_path();
    manifest = ss::load_manifest(root).config.value("asset_manifest", std::string());
  }
  if (manifest.empty()) throw ss::ConfigError("cannot locate the asset manifest; pass --catalog");
  const auto catalog = ss::load_catalog(manifest);
  const ss::MeshLibrary meshes(catalog);
  const auto scene = ss::load_scene(dir);
  const auto mesh = ss::rebuild_scene_mesh(scene.sample, meshes);
  const auto k = ss::CameraIntrinsics::from_fov(640, 480, 90.0);
  const auto image = ss::render_color(ss::ScanTarget(mesh), ss::overview_poses(scene.sample.room).front(), k, 0);
  ss::write_file(out_png, ss::encode_png_rgb(image));
  fmt::print("wrote {}\n", out_png);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Procedural indoor scene and point-cloud dataset generator"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto* synth = app.add_subcommand("synth", "Generate a dataset from a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> scenes, jobs;
  std::optional<std::string> out;
  synth->add_option("--config", config_path, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "Master seed");
  synth->add_option("--scenes", scenes, "Scene count");
  synth->add_option("--out", out, "Output directory");
  synth->add_option("-j,--jobs", jobs, "Parallelism (0 = all cores)");

  auto* validate = app.add_subcommand("validate", "Re-check every invariant of an exported dataset");
  std::string dataset;
  validate->add_option("dataset", dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);

  auto* metrics = app.add_subcommand("metrics", "Compute dataset metrics and write metrics.json");
  std::string metrics_dataset, layout_url, catalog_override, prompt_path;
  ss::MetricsOptions mopt;
  metrics->add_option("dataset", metrics_dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--layout-backend", layout_url, "Layout scoring endpoint URL");
  metrics->add_option("--layout-prompt", prompt_path, "Layout scoring prompt template")->check(CLI::ExistingFile);
  metrics->add_option("--catalog", catalog_override, "Asset manifest (default: the one recorded in the dataset)");
  metrics->add_option("--k", mopt.k, "Clusters for geometry diversity");
  metrics->add_option("--seed", mopt.seed, "Seed for descriptors and clustering");
  metrics->add_option("--concurrency", mopt.concurrency, "Concurrent scoring requests");
  metrics->add_option("-j,--jobs", mopt.threads, "Threads (0 = all cores)");

  auto* preview = app.add_subcommand("preview", "Render a static overview of one exported scene");
  std::string scene_dir, preview_out, preview_catalog;
  preview->add_option("scene", scene_dir, "Scene directory")->required()->check(CLI::ExistingDirectory);
  preview->add_option("--out", preview_out, "Output PNG")->required();
  preview->add_option("--catalog", preview_catalog, "Asset manifest (default: from the dataset manifest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  ss::Log::instance().set_level(verbose ? ss::LogLevel::debug : ss::LogLevel::info);

  try {
    if (*synth) return run_synth(config_path, seed, scenes, out, jobs);
    if (*validate) return run_validate(dataset);
    if (*metrics) {
      mopt.catalog_override = catalog_override;
      if (!layout_url.empty()) {
        ss::BackendConfig b;
        b.kind = "http";
        b.endpoint.url = layout_url;
        b.prompt_template = prompt_path;
        mopt.layout_backend = b;
      }
      return run_metrics(metrics_dataset, mopt);
    }
    if (*preview) return run_preview(scene_dir, preview_out, preview_catalog);
  } catch (const ss::ConfigError& e) {
    ss::log_error("configuration: {}", e.what());
    return kUsage;
  } catch (const ss::CatalogError& e) {
    ss::log_error("asset catalog: {}", e.what());
    return kUsage;
  } catch (const ss::TransportError& e) {
    ss::log_error("backend: {}", e.what());
    return kBackend;
  } catch (const ss::PipelineAbort& e) {
    ss::log_error("aborted: {}", e.what());
    return kInvalid;
  } catch (const ss::Error& e) {
    ss::log_error("{}", e.what());
    return kInvalid;
  }
  return kUsage;
}
