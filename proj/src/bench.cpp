#include "pcbev/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pcbev/checksum.hpp"
#include "pcbev/errors.hpp"
#include "pcbev/rng.hpp"

#ifndef PCBEV_BUILD_PROFILE
#define PCBEV_BUILD_PROFILE "unknown"
#endif

namespace pcbev {

void BenchConfig::validate() const {
  if (repetitions < 10) throw ConfigError("bench: repetitions must be >= 10");
  if (warmup < 1) throw ConfigError("bench: warmup must be >= 1");
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("bench: grid dims must be > 0");
  if (threads < 1) throw ConfigError("bench: threads must be >= 1");
  for (const auto& k : kernels) {
    if (std::find(std::begin(kBenchKernels), std::end(kBenchKernels), k) == std::end(kBenchKernels)) {
      throw ConfigError("bench: unknown kernel '" + k + "'");
    }
  }
}

KernelStats summarize(std::string name, std::vector<double> samples_us, std::uint64_t checksum) {
  KernelStats s;
  s.name = std::move(name);
  s.checksum = checksum;
  s.samples = samples_us.size();
  if (samples_us.empty()) return s;
  std::sort(samples_us.begin(), samples_us.end());
  const std::size_t n = samples_us.size();
  s.min_us = samples_us.front();
  s.median_us = n % 2 ? samples_us[n / 2] : 0.5 * (samples_us[n / 2 - 1] + samples_us[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_us = samples_us[std::max<std::size_t>(rank, 1) - 1];
  s.mean_us = std::accumulate(samples_us.begin(), samples_us.end(), 0.0) / static_cast<double>(n);
  return s;
}

const KernelStats* LatencyReport::find(std::string_view name) const {
  for (const auto& k : kernels) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_us(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

FeatureMap random_map(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMap map(h, w, c);
  for (float& v : map.data()) v = static_cast<float>(rng.uniform());
  return map;
}

}  // namespace

BenchInputs make_bench_inputs(const BenchConfig& cfg) {
  cfg.validate();
  BenchInputs in;
  in.cart_grid.width = static_cast<std::uint32_t>(cfg.width);
  in.cart_grid.height = static_cast<std::uint32_t>(cfg.height);
  in.polar_grid.n_rho = static_cast<std::uint32_t>(cfg.height);
  in.polar_grid.n_phi = static_cast<std::uint32_t>(cfg.width);
  Rng seeds(cfg.seed);
  in.cloud = synth_scan(seeds.bits(), cfg.points, SynthProfile::kUniformDisk);
  in.f_cart = random_map(cfg.height, cfg.width, cfg.channels, seeds.bits());
  in.f_polar = random_map(cfg.height, cfg.width, cfg.channels, seeds.bits());
  const auto start = Clock::now();
  in.polar_to_cart = build_remap_table(in.polar_grid, in.cart_grid, cfg.remap_mode, cfg.threads);
  in.table_build_us = elapsed_us(start);
  in.plan = plan_point_interaction(in.polar_grid, in.cart_grid, in.cloud, cfg.threads);
  return in;
}

std::uint64_t kernel_reference_checksum(std::string_view kernel, const BenchInputs& in,
                                        int threads) {
  const auto sampled = [&] { return grid_sample(in.f_polar, in.plan.src_coords, threads); };
  const auto scattered = [&] {
    return scatter_back(sampled(), in.plan.dest_assignment, in.cart_grid.rows(),
                        in.cart_grid.cols(), Reduce::kMax, threads);
  };
  if (kernel == "grid_sample") return fnv1a64(sampled().data());
  if (kernel == "scatter_back" || kernel == "point_interaction") return checksum(scattered());
  if (kernel == "remap_apply") return checksum(apply_remap(in.polar_to_cart, in.f_polar, threads));
  if (kernel == "fused_output") {
    return fnv1a64(fused_output_features(in.f_cart, in.f_polar, in.polar_to_cart, in.cart_grid,
                                         in.cloud, threads)
                       .data());
  }
  throw ConfigError("bench: unknown kernel '" + std::string(kernel) + "'");
}

LatencyReport run_bench(const BenchConfig& cfg) {
  BenchInputs in = make_bench_inputs(cfg);
  const int threads = cfg.threads;

  LatencyReport report;
  report.environment = {threads,         cfg.height, cfg.width,   cfg.channels,
                        cfg.points,      cfg.warmup, cfg.repetitions, cfg.seed,
                        std::string(to_string(cfg.remap_mode)), PCBEV_BUILD_PROFILE};
  report.table_build_us = in.table_build_us;

  // Preallocated outputs so no kernel pays for page faults on fresh buffers.
  PointMatrix sampled(in.plan.src_coords.size(), cfg.channels);
  FeatureMap scattered(cfg.height, cfg.width, cfg.channels);
  FeatureMap remapped(cfg.height, cfg.width, cfg.channels);
  PointMatrix fused;
  grid_sample_into(in.f_polar, in.plan.src_coords, sampled, threads);

  struct Kernel {
    std::function<void()> run;
    std::function<std::uint64_t()> digest;
  };
  auto kernel_for = [&](const std::string& name) -> Kernel {
    if (name == "grid_sample") {
      return {[&] { grid_sample_into(in.f_polar, in.plan.src_coords, sampled, threads); },
              [&] { return fnv1a64(sampled.data()); }};
    }
    if (name == "scatter_back") {
      return {[&] { scatter_reduce_into(sampled, in.plan.dest_assignment, Reduce::kMax, scattered, threads); },
              [&] { return checksum(scattered); }};
    }
    if (name == "point_interaction") {
      return {[&] {
                grid_sample_into(in.f_polar, in.plan.src_coords, sampled, threads);
                scatter_reduce_into(sampled, in.plan.dest_assignment, Reduce::kMax, scattered, threads);
              },
              [&] { return checksum(scattered); }};
    }
    if (name == "remap_apply") {
      return {[&] { apply_remap_into(in.polar_to_cart, in.f_polar, remapped, threads); },
              [&] { return checksum(remapped); }};
    }
    return {[&] {
              fused = fused_output_features(in.f_cart, in.f_polar, in.polar_to_cart, in.cart_grid,
                                            in.cloud, threads);
            },
            [&] { return fnv1a64(fused.data()); }};
  };

  for (const auto& name : cfg.kernels) {
    Kernel k = kernel_for(name);
    for (std::size_t i = 0; i < cfg.warmup; ++i) k.run();
    std::vector<double> samples;
    samples.reserve(cfg.repetitions);
    for (std::size_t i = 0; i < cfg.repetitions; ++i) {
      const auto start = Clock::now();
      k.run();
      samples.push_back(elapsed_us(start));
    }
    report.kernels.push_back(summarize(name, std::move(samples), k.digest()));
  }

  const KernelStats* remap = report.find("remap_apply");
  const KernelStats* point = report.find("point_interaction");
  const KernelStats* gs = report.find("grid_sample");
  if (remap && point && remap->median_us > 0.0) report.point_over_remap = point->median_us / remap->median_us;
  if (remap && gs) report.remap_faster_than_grid_sample = remap->median_us < gs->median_us;
  return report;
}

namespace {

using nlohmann::ordered_json;

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

std::string report_to_json(const LatencyReport& report) {
  ordered_json doc;
  doc["schema"] = report.schema;
  const auto& e = report.environment;
  doc["environment"] = {{"threads", e.threads},         {"height", e.height},
                        {"width", e.width},             {"channels", e.channels},
                        {"points", e.points},           {"warmup", e.warmup},
                        {"repetitions", e.repetitions}, {"seed", e.seed},
                        {"remap_mode", e.remap_mode},   {"build_profile", e.build_profile}};
  doc["table_build_us"] = report.table_build_us;
  doc["kernels"] = ordered_json::array();
  for (const auto& k : report.kernels) {
    doc["kernels"].push_back({{"name", k.name},
                              {"samples", k.samples},
                              {"min_us", k.min_us},
                              {"median_us", k.median_us},
                              {"p95_us", k.p95_us},
                              {"mean_us", k.mean_us},
                              {"checksum", hex64(k.checksum)}});
  }
  ordered_json cmp = ordered_json::object();
  cmp["point_interaction_over_remap_apply"] =
      report.point_over_remap ? ordered_json(*report.point_over_remap) : ordered_json(nullptr);
  cmp["remap_apply_faster_than_grid_sample"] =
      report.remap_faster_than_grid_sample ? ordered_json(*report.remap_faster_than_grid_sample)
                                           : ordered_json(nullptr);
  doc["comparison"] = cmp;
  return doc.dump(2) + "\n";
}

LatencyReport report_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bench report: ") + e.what());
  }
  if (doc.value("schema", std::string{}) != kBenchSchema) {
    throw FormatError(std::string("bench report: expected schema ") + kBenchSchema);
  }
  LatencyReport r;
  try {
    const auto& e = doc.at("environment");
    r.environment = {e.at("threads").get<int>(),
                     e.at("height").get<std::size_t>(),
                     e.at("width").get<std::size_t>(),
                     e.at("channels").get<std::size_t>(),
                     e.at("points").get<std::size_t>(),
                     e.at("warmup").get<std::size_t>(),
                     e.at("repetitions").get<std::size_t>(),
                     e.at("seed").get<std::uint64_t>(),
                     e.at("remap_mode").get<std::string>(),
                     e.at("build_profile").get<std::string>()};
    r.table_build_us = doc.at("table_build_us").get<double>();
    for (const auto& k : doc.at("kernels")) {
      r.kernels.push_back({k.at("name").get<std::string>(), k.at("samples").get<std::size_t>(),
                           k.at("min_us").get<double>(), k.at("median_us").get<double>(),
                           k.at("p95_us").get<double>(), k.at("mean_us").get<double>(),
                           parse_hex64(k.at("checksum").get<std::string>())});
    }
    const auto& cmp = doc.at("comparison");
    if (!cmp.at("point_interaction_over_remap_apply").is_null()) {
      r.point_over_remap = cmp.at("point_interaction_over_remap_apply").get<double>();
    }
    if (!cmp.at("remap_apply_faster_than_grid_sample").is_null()) {
      r.remap_faster_than_grid_sample = cmp.at("remap_apply_faster_than_grid_sample").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bench report: ") + e.what());
  }
  return r;
}

std::string report_to_csv(const LatencyReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "kernel,samples,min_us,median_us,p95_us,mean_us,checksum\n";
  for (const auto& k : report.kernels) {
    out << k.name << ',' << k.samples << ',' << k.min_us << ',' << k.median_us << ',' << k.p95_us
        << ',' << k.mean_us << ',' << hex64(k.checksum) << '\n';
  }
  return out.str();
}

void emit_report(const LatencyReport& report, const std::filesystem::path& path,
                 ReportFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report to " + path.string());
  out << (format == ReportFormat::kJson ? report_to_json(report) : report_to_csv(report));
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace pcbev
