#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdr/common.hpp"

namespace tdr {

enum class Variable { SM, LST, LAI, PPT, LC };

const char* variable_name(Variable v);
Variable variable_from_name(const std::string& name);

// One gridded field of one variable on one day. Values are row-major.
// Units: SM in m3/m3, LST in K, LAI in m2/m2, PPT in mm/hr, LC as integer
// codes (0 bare, 1 sweet corn, 2 cotton). `day` is a 1-based continuous index
// across the simulated years.
struct Raster {
  Variable variable = Variable::SM;
  int resolution_m = 1000;
  int day = 1;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Raster() = default;
  Raster(Variable v, int res_m, int d, int h, int w, double fill = 0.0)
      : variable(v), resolution_m(res_m), day(d), height(h), width(w),
        values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  double at(int row, int col) const {
    check_index(row, col);
    return values[static_cast<std::size_t>(row) * width + col];
  }
  double& at(int row, int col) {
    check_index(row, col);
    return values[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t size() const { return values.size(); }
  double mean() const;

 private:
  void check_index(int row, int col) const;
};

// Square region in a local kilometre frame. Pixel (0, 0) occupies the corner
// at (origin_x_km, origin_y_km); X grows with columns, Y with rows.
struct GridGeometry {
  double extent_km = 50.0;
  double origin_x_km = 0.0;
  double origin_y_km = 0.0;
  int resolution_m = 1000;

  // Cells per side; throws config_error when the extent is not an integer
  // multiple of the resolution.
  int cells_per_side() const;
};

struct Point2 {
  double x_km = 0.0;
  double y_km = 0.0;
};

// Centroid of the (row, col) cell in km.
Point2 pixel_centroid(const GridGeometry& geom, int row, int col);

// Coarsens by averaging factor x factor blocks. Both dimensions must divide
// evenly by `factor` (dimension_error otherwise); factor must be >= 2.
Raster aggregate_block_mean(const Raster& fine, int factor);

// Coarsens a land-cover raster by majority vote over each block, ties broken
// by the lowest code.
Raster aggregate_majority(const Raster& fine, int factor);

// Adds iid Gaussian noise with the given SD, then clamps to the variable's
// physical range: SM to [0, 0.6], PPT and LAI to >= 0, LST unclamped.
// Deterministic for a given (seed, raster shape). LC input or negative sd is
// an argument_error.
Raster add_gaussian_noise(const Raster& r, double sd, std::uint64_t seed);

// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);
double parse_double(const std::string& s);

// TDR-CSV on disk: a header line
//   #tdr,v1,<variable>,<resolution_m>,<day>,<height>,<width>
// followed by one comma-separated line per grid row, values formatted with
// format_double. read_tdr_csv validates the header, the cell count and the
// variable's physical range and throws data_error/io_error on violations.
void write_tdr_csv(const Raster& r, const std::string& path);
Raster read_tdr_csv(const std::string& path);

}  // namespace tdr
