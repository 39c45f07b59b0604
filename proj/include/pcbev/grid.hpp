#pragma once

// BEV partitioning geometry. Cartesian maps are indexed (row = y bin,
// col = x bin); polar maps are indexed (row = rho bin, col = phi bin).
// Bins are half-open [low, high) on every axis.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

namespace pcbev {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Integer cell on a grid.
struct Cell {
  std::int32_t row = 0;
  std::int32_t col = 0;
};

/// Continuous grid-index coordinates: cell centers sit on integers.
struct GridCoord {
  double row = 0.0;
  double col = 0.0;
};

struct CartesianGridSpec {
  double x_min = -51.2;
  double x_max = 51.2;
  double y_min = -51.2;
  double y_max = 51.2;
  std::uint32_t width = 512;
  std::uint32_t height = 512;

  double cell_width() const { return (x_max - x_min) / width; }
  double cell_height() const { return (y_max - y_min) / height; }
  std::size_t rows() const { return height; }
  std::size_t cols() const { return width; }

  /// Throws ConfigError on empty extents, zero counts, or (when requested)
  /// non-square cells beyond 1e-9.
  void validate(bool require_square_cells = false) const;

  bool contains(double x, double y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }
  std::optional<Cell> locate(double x, double y) const;
  GridCoord continuous(double x, double y) const;
  Vec2 cell_center(std::size_t row, std::size_t col) const;
};

/// Which argument order defines the azimuth. kYX is the standard
/// atan2(y, x); kXY measures phi from the +y axis.
enum class AzimuthConvention { kYX, kXY };

struct PolarGridSpec {
  double rho_min = 0.0;
  double rho_max = 51.2;
  std::uint32_t n_rho = 480;
  std::uint32_t n_phi = 360;
  AzimuthConvention azimuth = AzimuthConvention::kYX;

  double rho_step() const { return (rho_max - rho_min) / n_rho; }
  double phi_step() const;
  std::size_t rows() const { return n_rho; }
  std::size_t cols() const { return n_phi; }

  void validate() const;

  /// Azimuth in [-pi, pi); +pi folds onto -pi.
  double azimuth_of(double x, double y) const;
  Vec2 to_cartesian(double rho, double phi) const;

  bool contains(double x, double y) const;
  std::optional<Cell> locate(double x, double y) const;
  /// Continuous (rho, phi) index coordinates; the phi coordinate lies in
  /// [-0.5, n_phi - 0.5) and is periodic with period n_phi.
  GridCoord continuous(double x, double y) const;
  Vec2 cell_center(std::size_t row, std::size_t col) const;
};

using GridSpec = std::variant<CartesianGridSpec, PolarGridSpec>;

std::size_t grid_rows(const GridSpec& grid);
std::size_t grid_cols(const GridSpec& grid);
void validate_grid(const GridSpec& grid);
bool grid_contains(const GridSpec& grid, double x, double y);
std::optional<Cell> grid_locate(const GridSpec& grid, double x, double y);
Vec2 grid_cell_center(const GridSpec& grid, std::size_t row, std::size_t col);
std::string_view grid_family(const GridSpec& grid);

std::optional<AzimuthConvention> parse_azimuth(std::string_view name);
std::string_view to_string(AzimuthConvention convention);

}  // namespace pcbev
