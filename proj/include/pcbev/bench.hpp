#pragma once

// Latency comparison of remap-based cross-branch alignment against the
// point-based grid-sample + scatter-back route, on identical seeded inputs.
// Remap tables are built before timing starts; build cost is reported on
// its own line.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcbev/feature_map.hpp"
#include "pcbev/grid.hpp"
#include "pcbev/point_cloud.hpp"
#include "pcbev/point_interaction.hpp"
#include "pcbev/remap.hpp"

namespace pcbev {

inline constexpr const char* kBenchSchema = "bench_v1";
inline constexpr std::string_view kBenchKernels[] = {"grid_sample", "scatter_back",
                                                     "point_interaction", "remap_apply",
                                                     "fused_output"};

struct BenchConfig {
  std::size_t height = 512;
  std::size_t width = 512;
  std::size_t channels = 64;
  std::size_t points = 120000;
  std::size_t warmup = 1;
  std::size_t repetitions = 10;
  int threads = 1;
  std::uint64_t seed = 42;
  RemapMode remap_mode = RemapMode::kBilinear;
  std::vector<std::string> kernels{kBenchKernels, kBenchKernels + 5};

  /// repetitions >= 10, warmup >= 1, known kernel names, non-zero dims.
  void validate() const;
};

struct KernelStats {
  std::string name;
  std::size_t samples = 0;
  double min_us = 0.0;
  double median_us = 0.0;
  double p95_us = 0.0;
  double mean_us = 0.0;
  std::uint64_t checksum = 0;

  friend bool operator==(const KernelStats&, const KernelStats&) = default;
};

/// Nearest-rank p95, median averages the two middle samples for even counts.
KernelStats summarize(std::string name, std::vector<double> samples_us, std::uint64_t checksum);

struct BenchEnvironment {
  int threads = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t points = 0;
  std::size_t warmup = 0;
  std::size_t repetitions = 0;
  std::uint64_t seed = 0;
  std::string remap_mode;
  std::string build_profile;

  friend bool operator==(const BenchEnvironment&, const BenchEnvironment&) = default;
};

struct LatencyReport {
  std::string schema = kBenchSchema;
  BenchEnvironment environment;
  double table_build_us = 0.0;
  std::vector<KernelStats> kernels;
  /// median(point_interaction) / median(remap_apply), when both ran.
  std::optional<double> point_over_remap;
  /// median(remap_apply) < median(grid_sample), when both ran.
  std::optional<bool> remap_faster_than_grid_sample;

  const KernelStats* find(std::string_view name) const;
  friend bool operator==(const LatencyReport&, const LatencyReport&) = default;
};

/// Seeded inputs shared by every kernel: a uniform-disk cloud, random
/// Cartesian and Polar maps (Polar has the same H x W as Cartesian, rho up
/// to the half-extent 51.2 m), the polar->cartesian table and the
/// point-interaction plan.
struct BenchInputs {
  CartesianGridSpec cart_grid;
  PolarGridSpec polar_grid;
  PointCloud cloud;
  FeatureMap f_cart;
  FeatureMap f_polar;
  RemapTable polar_to_cart;
  InteractionPlan plan;
  double table_build_us = 0.0;
};

BenchInputs make_bench_inputs(const BenchConfig& cfg);

/// Untimed reference output checksum for one kernel on `inputs`.
std::uint64_t kernel_reference_checksum(std::string_view kernel, const BenchInputs& inputs,
                                        int threads);

LatencyReport run_bench(const BenchConfig& cfg);

enum class ReportFormat { kJson, kCsv };

std::string report_to_json(const LatencyReport& report);
LatencyReport report_from_json(const std::string& text);
std::string report_to_csv(const LatencyReport& report);
void emit_report(const LatencyReport& report, const std::filesystem::path& path, ReportFormat format);

}  // namespace pcbev
