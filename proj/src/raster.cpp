#include "tdr/raster.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tdr/rng.hpp"

namespace tdr {

const char* variable_name(Variable v) {
  switch (v) {
    case Variable::SM: return "SM";
    case Variable::LST: return "LST";
    case Variable::LAI: return "LAI";
    case Variable::PPT: return "PPT";
    case Variable::LC: return "LC";
  }
  throw argument_error("variable_name: unknown variable code");
}

Variable variable_from_name(const std::string& name) {
  if (name == "SM") return Variable::SM;
  if (name == "LST") return Variable::LST;
  if (name == "LAI") return Variable::LAI;
  if (name == "PPT") return Variable::PPT;
  if (name == "LC") return Variable::LC;
  throw argument_error("variable_from_name: unknown variable '" + name + "'");
}

void Raster::check_index(int row, int col) const {
  if (row < 0 || row >= height || col < 0 || col >= width)
    throw index_error("Raster: cell (" + std::to_string(row) + ", " +
                      std::to_string(col) + ") outside " + std::to_string(height) +
                      "x" + std::to_string(width) + " grid");
}

double Raster::mean() const {
  if (values.empty()) throw state_error("Raster::mean: empty raster");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

int GridGeometry::cells_per_side() const {
  if (resolution_m <= 0)
    throw config_error("GridGeometry: resolution must be positive");
  const double metres = extent_km * 1000.0;
  const double cells = metres / resolution_m;
  const int n = static_cast<int>(std::lround(cells));
  if (n <= 0 || std::abs(cells - n) > 1e-9)
    throw config_error("GridGeometry: extent " + std::to_string(extent_km) +
                       " km is not a multiple of " + std::to_string(resolution_m) + " m");
  return n;
}

Point2 pixel_centroid(const GridGeometry& geom, int row, int col) {
  const int n = geom.cells_per_side();
  if (row < 0 || row >= n || col < 0 || col >= n)
    throw index_error("pixel_centroid: cell (" + std::to_string(row) + ", " +
                      std::to_string(col) + ") outside " + std::to_string(n) +
                      "x" + std::to_string(n) + " grid");
  const double res_km = geom.resolution_m / 1000.0;
  return {geom.origin_x_km + (col + 0.5) * res_km,
          geom.origin_y_km + (row + 0.5) * res_km};
}

namespace {

void check_aggregate_args(const Raster& fine, int factor) {
  if (factor < 2)
    throw argument_error("aggregate: factor must be >= 2, got " + std::to_string(factor));
  if (fine.height <= 0 || fine.width <= 0)
    throw dimension_error("aggregate: empty input raster");
  if (fine.height % factor != 0 || fine.width % factor != 0)
    throw dimension_error("aggregate: " + std::to_string(fine.height) + "x" +
                          std::to_string(fine.width) +
                          " raster does not divide by factor " + std::to_string(factor));
}

}  // namespace

Raster aggregate_block_mean(const Raster& fine, int factor) {
  check_aggregate_args(fine, factor);
  Raster out(fine.variable, fine.resolution_m * factor, fine.day,
             fine.height / factor, fine.width / factor);
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      double s = 0.0;
      for (int i = 0; i < factor; ++i)
        for (int j = 0; j < factor; ++j)
          s += fine.at(r * factor + i, c * factor + j);
      out.at(r, c) = s * inv;
    }
  }
  return out;
}

Raster aggregate_majority(const Raster& fine, int factor) {
  check_aggregate_args(fine, factor);
  Raster out(fine.variable, fine.resolution_m * factor, fine.day,
             fine.height / factor, fine.width / factor);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      // Codes are small non-negative integers; count occurrences directly.
      std::array<int, 16> counts{};
      for (int i = 0; i < factor; ++i) {
        for (int j = 0; j < factor; ++j) {
          const double v = fine.at(r * factor + i, c * factor + j);
          const int code = static_cast<int>(std::lround(v));
          if (code < 0 || code >= static_cast<int>(counts.size()) ||
              std::abs(v - code) > 1e-9)
            throw data_error("aggregate_majority: non-integer code " +
                             format_double(v) + " at fine cell (" +
                             std::to_string(r * factor + i) + ", " +
                             std::to_string(c * factor + j) + ")");
          ++counts[static_cast<std::size_t>(code)];
        }
      }
      int best = 0;
      for (int code = 1; code < static_cast<int>(counts.size()); ++code)
        if (counts[static_cast<std::size_t>(code)] > counts[static_cast<std::size_t>(best)])
          best = code;  // strict > keeps the lowest code on ties
      out.at(r, c) = best;
    }
  }
  return out;
}

Raster add_gaussian_noise(const Raster& r, double sd, std::uint64_t seed) {
  if (r.variable == Variable::LC)
    throw argument_error("add_gaussian_noise: LC is categorical, refusing to perturb");
  if (sd < 0.0)
    throw argument_error("add_gaussian_noise: sd must be >= 0, got " + format_double(sd));
  Raster out = r;
  SplitMix64 rng(seed);
  for (double& v : out.values) {
    v += sd * rng.gaussian();
    switch (out.variable) {
      case Variable::SM:
        v = std::min(std::max(v, 0.0), 0.6);
        break;
      case Variable::PPT:
      case Variable::LAI:
        v = std::max(v, 0.0);
        break;
      default:
        break;
    }
  }
  return out;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec != std::errc())
    throw state_error("format_double: to_chars failed");
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw data_error("parse_double: bad numeric field '" + s + "'");
  return v;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

void validate_range(const Raster& r, const std::string& path) {
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    const double v = r.values[i];
    bool ok = std::isfinite(v);
    if (ok) {
      switch (r.variable) {
        case Variable::SM: ok = v >= 0.0 && v <= 0.6; break;
        case Variable::LAI: ok = v >= 0.0; break;
        case Variable::LC: {
          const int code = static_cast<int>(std::lround(v));
          ok = std::abs(v - code) < 1e-9 && code >= 0 && code <= 2;
          break;
        }
        default: break;
      }
    }
    if (!ok)
      throw data_error(path + ": " + std::string(variable_name(r.variable)) +
                       " value " + format_double(v) + " at cell " +
                       std::to_string(i) + " outside physical range");
  }
}

}  // namespace

void write_tdr_csv(const Raster& r, const std::string& path) {
  if (r.values.size() != static_cast<std::size_t>(r.height) * static_cast<std::size_t>(r.width))
    throw dimension_error("write_tdr_csv: value count does not match grid shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("write_tdr_csv: cannot open '" + path + "' for writing");
  out << '#' << kRasterFormat << ',' << variable_name(r.variable) << ','
      << r.resolution_m << ',' << r.day << ',' << r.height << ',' << r.width << '\n';
  std::string line;
  for (int row = 0; row < r.height; ++row) {
    line.clear();
    for (int col = 0; col < r.width; ++col) {
      if (col) line.push_back(',');
      line += format_double(r.at(row, col));
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw io_error("write_tdr_csv: write failed for '" + path + "'");
}

Raster read_tdr_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("read_tdr_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw data_error(path + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() != 7 || header[0] != "#tdr" || header[1] != "v1")
    throw data_error(path + ": malformed TDR-CSV header '" + line + "'");
  Raster r;
  try {
    r.variable = variable_from_name(header[2]);
    r.resolution_m = std::stoi(header[3]);
    r.day = std::stoi(header[4]);
    r.height = std::stoi(header[5]);
    r.width = std::stoi(header[6]);
  } catch (const argument_error&) {
    throw data_error(path + ": unknown variable '" + header[2] + "' in header");
  } catch (const std::exception&) {
    throw data_error(path + ": non-numeric header field");
  }
  if (r.height <= 0 || r.width <= 0 || r.resolution_m <= 0 || r.day < 0)
    throw data_error(path + ": invalid header dimensions");
  r.values.reserve(static_cast<std::size_t>(r.height) * static_cast<std::size_t>(r.width));
  int rows_read = 0;
  while (std::getline(in, line)) {
    if (line.empty() && rows_read == r.height) break;  // trailing newline
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != r.width)
      throw data_error(path + ": row " + std::to_string(rows_read) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(r.width));
    for (const auto& f : fields) {
      try {
        r.values.push_back(parse_double(f));
      } catch (const data_error& e) {
        throw data_error(path + ": row " + std::to_string(rows_read) + ": " + e.what());
      }
    }
    ++rows_read;
  }
  if (rows_read != r.height)
    throw data_error(path + ": expected " + std::to_string(r.height) +
                     " rows, found " + std::to_string(rows_read));
  validate_range(r, path);
  return r;
}

}  // namespace tdr
