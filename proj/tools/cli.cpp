#include "cli.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "pcbev/bench.hpp"
#include "pcbev/errors.hpp"
#include "pcbev/pipeline.hpp"
#include "pcbev/weights_io.hpp"

namespace pcbev::cli {

namespace {

struct ScanArgs {
  std::string path;
  bool stride5 = false;

  PointCloud load(std::ostream& err) const {
    auto result = read_scan(path, stride5 ? ScanStride::kFiveFloats : ScanStride::kFourFloats);
    if (result.dropped_non_finite) {
      err << "dropped " << result.dropped_non_finite << " non-finite points from " << path << '\n';
    }
    return std::move(result.cloud);
  }
};

void add_scan_options(CLI::App* cmd, ScanArgs& scan) {
  cmd->add_option("--scan", scan.path, "Packed float32 scan file")->required()->check(CLI::ExistingFile);
  cmd->add_flag("--stride5", scan.stride5, "Records are 5 floats (nuScenes), 5th ignored");
}

PipelineConfig load_config(const std::string& path) {
  return path.empty() ? PipelineConfig{} : PipelineConfig::load(path);
}

GridSpec pick_grid(const PipelineConfig& cfg, const std::string& family) {
  if (family == "polar") return cfg.polar;
  return cfg.cartesian;
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Polar/Cartesian BEV remap fusion toolkit"};
  app.require_subcommand(1);

  // synth
  std::uint64_t synth_seed = 7;
  std::size_t synth_points = 120000;
  std::string synth_profile = "uniform-disk";
  std::string synth_out;
  bool synth_stride5 = false;
  auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic scan");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--points", synth_points);
  synth->add_option("--profile", synth_profile)->check(CLI::IsMember({"uniform-disk", "ring", "radial-falloff"}));
  synth->add_option("--out", synth_out)->required();
  synth->add_flag("--stride5", synth_stride5);

  // project
  ScanArgs project_scan;
  std::string project_grid = "cartesian";
  std::string project_config;
  std::string project_encoder;
  std::string project_out;
  std::uint64_t project_seed = 1234;
  int project_threads = 1;
  auto* project = app.add_subcommand("project", "Encode a scan into a BEV feature map (BFM1)");
  add_scan_options(project, project_scan);
  project->add_option("--grid", project_grid)->check(CLI::IsMember({"cartesian", "polar"}));
  project->add_option("--config", project_config, "Pipeline config JSON (grids, encoder dims)");
  project->add_option("--encoder-weights", project_encoder, "Pillar encoder manifest");
  project->add_option("--seed", project_seed, "Seed for encoder weights when none are loaded");
  project->add_option("--threads", project_threads)->check(CLI::PositiveNumber);
  project->add_option("--out", project_out)->required();

  // remap-build
  std::string build_src = "polar";
  std::string build_mode = "bilinear";
  std::string build_config;
  std::string build_out;
  int build_threads = 1;
  auto* remap_build = app.add_subcommand("remap-build", "Precompute a Polar<->Cartesian remap table (RMT1)");
  remap_build->add_option("--src", build_src, "Source partitioning; the other one is the destination")
      ->check(CLI::IsMember({"cartesian", "polar"}));
  remap_build->add_option("--mode", build_mode)->check(CLI::IsMember({"nearest", "bilinear"}));
  remap_build->add_option("--config", build_config);
  remap_build->add_option("--threads", build_threads)->check(CLI::PositiveNumber);
  remap_build->add_option("--out", build_out)->required();

  // remap-apply
  std::string apply_table;
  std::string apply_in;
  std::string apply_out;
  int apply_threads = 1;
  auto* remap_apply = app.add_subcommand("remap-apply", "Apply an RMT1 table to a BFM1 map");
  remap_apply->add_option("--table", apply_table)->required()->check(CLI::ExistingFile);
  remap_apply->add_option("--in", apply_in)->required()->check(CLI::ExistingFile);
  remap_apply->add_option("--out", apply_out)->required();
  remap_apply->add_option("--threads", apply_threads)->check(CLI::PositiveNumber);

  // pipeline
  ScanArgs pipe_scan;
  std::string pipe_config;
  std::string pipe_out;
  std::string pipe_save_weights;
  std::optional<int> pipe_threads;
  std::optional<std::size_t> pipe_stages;
  std::optional<std::uint64_t> pipe_seed;
  std::optional<std::string> pipe_mode;
  auto* pipeline = app.add_subcommand("pipeline", "Run the dual-branch forward pass, write uint16 labels");
  add_scan_options(pipeline, pipe_scan);
  pipeline->add_option("--config", pipe_config);
  pipeline->add_option("--threads", pipe_threads)->check(CLI::PositiveNumber);
  pipeline->add_option("--stages", pipe_stages);
  pipeline->add_option("--seed", pipe_seed);
  pipeline->add_option("--mode", pipe_mode)->check(CLI::IsMember({"nearest", "bilinear"}));
  pipeline->add_option("--save-weights", pipe_save_weights, "Directory to dump the weights used");
  pipeline->add_option("--out", pipe_out)->required();

  // bench
  std::string bench_grid = "512x512x64";
  BenchConfig bench_cfg;
  std::string bench_kernels;
  std::string bench_mode = "bilinear";
  std::string bench_out;
  std::string bench_csv;
  auto* bench = app.add_subcommand("bench", "Time remap vs point-based interaction kernels");
  bench->add_option("--grid", bench_grid, "HxWxC");
  bench->add_option("--points", bench_cfg.points);
  bench->add_option("--reps", bench_cfg.repetitions);
  bench->add_option("--warmup", bench_cfg.warmup);
  bench->add_option("--threads", bench_cfg.threads)->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_cfg.seed);
  bench->add_option("--kernels", bench_kernels, "Comma-separated subset of kernels");
  bench->add_option("--mode", bench_mode)->check(CLI::IsMember({"nearest", "bilinear"}));
  bench->add_option("--out", bench_out, "JSON report path");
  bench->add_option("--csv", bench_csv, "CSV report path");

  // coverage
  ScanArgs cov_scan;
  std::string cov_grid = "cartesian";
  std::string cov_config;
  auto* coverage = app.add_subcommand("coverage", "Occupied-cell statistics of a scan on a grid");
  add_scan_options(coverage, cov_scan);
  coverage->add_option("--grid", cov_grid)->check(CLI::IsMember({"cartesian", "polar"}));
  coverage->add_option("--config", cov_config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const auto cloud = synth_scan(synth_seed, synth_points, *parse_synth_profile(synth_profile));
      write_scan(synth_out, cloud, synth_stride5 ? ScanStride::kFiveFloats : ScanStride::kFourFloats);
      out << "points " << cloud.size() << '\n';
    } else if (*project) {
      const PipelineConfig cfg = load_config(project_config);
      const GridSpec grid = pick_grid(cfg, project_grid);
      PillarEncoderWeights encoder;
      if (!project_encoder.empty()) {
        encoder = PillarEncoderWeights::load(project_encoder);
      } else {
        encoder = PillarEncoderWeights::seeded(project_seed, cfg.encoder_dims);
      }
      const PointCloud cloud = project_scan.load(err);
      const auto assignment = assign_cells(cloud, grid, project_threads);
      const auto stats = coverage_stats(assignment, assignment.height, assignment.width);
      const auto encoded = pillar_encode(point_input_features(cloud, assignment, grid), encoder, project_threads);
      const FeatureMap map = scatter_max(encoded, assignment, assignment.height, assignment.width, project_threads);
      write_feature_map(project_out, map);
      out << "dims " << map.height() << 'x' << map.width() << 'x' << map.channels() << '\n'
          << "points " << cloud.size() << " valid " << assignment.valid_count() << '\n'
          << "occupied_cells " << stats.occupied_cells << '\n'
          << "occupancy_fraction " << stats.occupancy_fraction << '\n';
    } else if (*remap_build) {
      const PipelineConfig cfg = load_config(build_config);
      const GridSpec src = pick_grid(cfg, build_src);
      const GridSpec dest = pick_grid(cfg, build_src == "polar" ? "cartesian" : "polar");
      const RemapTable table = build_remap_table(src, dest, *parse_remap_mode(build_mode), build_threads);
      write_remap_table(build_out, table);
      out << "dest " << table.dest_height << 'x' << table.dest_width << " src " << table.src_height
          << 'x' << table.src_width << " valid_cells " << table.valid_count() << '\n';
    } else if (*remap_apply) {
      const RemapTable table = read_remap_table(apply_table);
      const FeatureMap src = read_feature_map(apply_in);
      const FeatureMap result = apply_remap(table, src, apply_threads);
      write_feature_map(apply_out, result);
      out << "dims " << result.height() << 'x' << result.width() << 'x' << result.channels() << '\n';
    } else if (*pipeline) {
      PipelineConfig cfg = load_config(pipe_config);
      if (pipe_threads) cfg.threads = *pipe_threads;
      if (pipe_stages) cfg.stages = *pipe_stages;
      if (pipe_seed) cfg.seed = *pipe_seed;
      if (pipe_mode) cfg.remap_mode = *parse_remap_mode(*pipe_mode);
      const PointCloud cloud = pipe_scan.load(err);
      const PipelineWeights weights = PipelineWeights::build(cfg);
      if (!pipe_save_weights.empty()) weights.save(pipe_save_weights);
      const PipelineResult result = run_pipeline(cloud, cfg, weights);
      write_labels_u16(pipe_out, result.labels);
      out << "points " << result.labels.size() << '\n'
          << "cartesian_occupancy " << result.cart_coverage.occupancy_fraction << '\n'
          << "polar_occupancy " << result.polar_coverage.occupancy_fraction << '\n'
          << "checksum " << hex(result.checksum) << '\n';
    } else if (*bench) {
      std::size_t h = 0, w = 0, c = 0;
      char x1 = 0, x2 = 0;
      std::istringstream dims(bench_grid);
      if (!(dims >> h >> x1 >> w >> x2 >> c) || x1 != 'x' || x2 != 'x') {
        throw ConfigError("--grid must look like HxWxC, got '" + bench_grid + "'");
      }
      bench_cfg.height = h;
      bench_cfg.width = w;
      bench_cfg.channels = c;
      bench_cfg.remap_mode = *parse_remap_mode(bench_mode);
      if (!bench_kernels.empty()) {
        bench_cfg.kernels.clear();
        std::istringstream names(bench_kernels);
        for (std::string name; std::getline(names, name, ',');) bench_cfg.kernels.push_back(name);
      }
      const LatencyReport report = run_bench(bench_cfg);
      if (!bench_out.empty()) emit_report(report, bench_out, ReportFormat::kJson);
      if (!bench_csv.empty()) emit_report(report, bench_csv, ReportFormat::kCsv);
      out << report_to_csv(report);
      out << "table_build_us " << report.table_build_us << '\n';
      if (report.point_over_remap) out << "point_interaction_over_remap_apply " << *report.point_over_remap << '\n';
    } else if (*coverage) {
      const PipelineConfig cfg = load_config(cov_config);
      const GridSpec grid = pick_grid(cfg, cov_grid);
      const PointCloud cloud = cov_scan.load(err);
      const auto assignment = assign_cells(cloud, grid);
      const auto stats = coverage_stats(assignment, assignment.height, assignment.width);
      out << "occupied_cells " << stats.occupied_cells << '\n'
          << "total_cells " << stats.total_cells << '\n'
          << "occupancy_fraction " << stats.occupancy_fraction << '\n'
          << "dense_fusion_cells " << stats.total_cells << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pcbev::cli
