#include "pcbev/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pcbev/errors.hpp"

namespace pcbev {

namespace {

constexpr double kPi = std::numbers::pi;

// Bin index of an in-range value; rounding at the top edge stays in the last bin.
std::int32_t bin_of(double offset, double step, std::uint32_t count) {
  auto idx = static_cast<std::int64_t>(std::floor(offset / step));
  if (idx < 0) idx = 0;
  if (idx >= static_cast<std::int64_t>(count)) idx = static_cast<std::int64_t>(count) - 1;
  return static_cast<std::int32_t>(idx);
}

}  // namespace

void CartesianGridSpec::validate(bool require_square_cells) const {
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw ConfigError("cartesian grid needs x_max > x_min and y_max > y_min");
  }
  if (width < 1 || height < 1) throw ConfigError("cartesian grid needs width, height >= 1");
  if (require_square_cells && std::abs(cell_width() - cell_height()) > 1e-9) {
    throw ConfigError("cartesian grid cells are not square");
  }
}

std::optional<Cell> CartesianGridSpec::locate(double x, double y) const {
  if (!contains(x, y)) return std::nullopt;
  return Cell{bin_of(y - y_min, cell_height(), height), bin_of(x - x_min, cell_width(), width)};
}

GridCoord CartesianGridSpec::continuous(double x, double y) const {
  return {(y - y_min) / cell_height() - 0.5, (x - x_min) / cell_width() - 0.5};
}

Vec2 CartesianGridSpec::cell_center(std::size_t row, std::size_t col) const {
  return {x_min + (static_cast<double>(col) + 0.5) * cell_width(),
          y_min + (static_cast<double>(row) + 0.5) * cell_height()};
}

double PolarGridSpec::phi_step() const { return 2.0 * kPi / n_phi; }

void PolarGridSpec::validate() const {
  if (!(rho_min >= 0.0) || !(rho_max > rho_min)) {
    throw ConfigError("polar grid needs 0 <= rho_min < rho_max");
  }
  if (n_rho < 1 || n_phi < 1) throw ConfigError("polar grid needs n_rho, n_phi >= 1");
}

double PolarGridSpec::azimuth_of(double x, double y) const {
  double phi = azimuth == AzimuthConvention::kYX ? std::atan2(y, x) : std::atan2(x, y);
  if (phi >= kPi) phi -= 2.0 * kPi;
  return phi;
}

Vec2 PolarGridSpec::to_cartesian(double rho, double phi) const {
  if (azimuth == AzimuthConvention::kYX) return {rho * std::cos(phi), rho * std::sin(phi)};
  return {rho * std::sin(phi), rho * std::cos(phi)};
}

bool PolarGridSpec::contains(double x, double y) const {
  const double rho = std::sqrt(x * x + y * y);
  return rho >= rho_min && rho < rho_max;
}

std::optional<Cell> PolarGridSpec::locate(double x, double y) const {
  const double rho = std::sqrt(x * x + y * y);
  if (!(rho >= rho_min && rho < rho_max)) return std::nullopt;
  const double phi = azimuth_of(x, y);
  return Cell{bin_of(rho - rho_min, rho_step(), n_rho), bin_of(phi + kPi, phi_step(), n_phi)};
}

GridCoord PolarGridSpec::continuous(double x, double y) const {
  const double rho = std::sqrt(x * x + y * y);
  const double phi = azimuth_of(x, y);
  return {(rho - rho_min) / rho_step() - 0.5, (phi + kPi) / phi_step() - 0.5};
}

Vec2 PolarGridSpec::cell_center(std::size_t row, std::size_t col) const {
  const double rho = rho_min + (static_cast<double>(row) + 0.5) * rho_step();
  const double phi = -kPi + (static_cast<double>(col) + 0.5) * phi_step();
  return to_cartesian(rho, phi);
}

std::size_t grid_rows(const GridSpec& grid) {
  return std::visit([](const auto& g) { return g.rows(); }, grid);
}

std::size_t grid_cols(const GridSpec& grid) {
  return std::visit([](const auto& g) { return g.cols(); }, grid);
}

void validate_grid(const GridSpec& grid) {
  std::visit([](const auto& g) { g.validate(); }, grid);
}

bool grid_contains(const GridSpec& grid, double x, double y) {
  return std::visit([&](const auto& g) { return g.contains(x, y); }, grid);
}

std::optional<Cell> grid_locate(const GridSpec& grid, double x, double y) {
  return std::visit([&](const auto& g) { return g.locate(x, y); }, grid);
}

Vec2 grid_cell_center(const GridSpec& grid, std::size_t row, std::size_t col) {
  return std::visit([&](const auto& g) { return g.cell_center(row, col); }, grid);
}

std::string_view grid_family(const GridSpec& grid) {
  return std::holds_alternative<CartesianGridSpec>(grid) ? "cartesian" : "polar";
}

std::optional<AzimuthConvention> parse_azimuth(std::string_view name) {
  if (name == "atan2_yx") return AzimuthConvention::kYX;
  if (name == "atan2_xy") return AzimuthConvention::kXY;
  return std::nullopt;
}

std::string_view to_string(AzimuthConvention convention) {
  return convention == AzimuthConvention::kYX ? "atan2_yx" : "atan2_xy";
}

}  // namespace pcbev
