#pragma once

// Transport results on disk: coupling.csv (i,j,mass for nonzero entries),
// phi.csv, psi.csv, map.csv and a key=value `meta` file.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "otlab/csv.hpp"
#include "otlab/ot/result.hpp"

namespace otlab {

inline void write_map_csv(const std::filesystem::path& path, const MapField& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::input, "cannot open " + path.string() + " for writing");
  const bool two = map.grid.dim() == 2;
  os << (two ? "x,y,tx,ty,defined\n" : "x,tx,defined\n");
  for (std::size_t i = 0; i < map.target.size(); ++i) {
    const Point c = map.grid.center(i);
    os << format_double(c[0]) << ',';
    if (two) os << format_double(c[1]) << ',';
    os << format_double(map.target[i][0]) << ',';
    if (two) os << format_double(map.target[i][1]) << ',';
    os << (map.mask[i] ? 1 : 0) << '\n';
  }
}

inline std::map<std::string, std::string> result_meta(const TransportResult& r) {
  std::map<std::string, std::string> kv;
  kv["solver"] = r.solver;
  kv["primal"] = format_double(r.primal);
  kv["dual"] = format_double(r.dual);
  kv["gap"] = format_double(r.gap);
  kv["iterations"] = std::to_string(r.iterations);
  kv["cells"] = std::to_string(r.grid.size());
  for (const auto& [k, v] : r.parameters) kv["param." + k] = v;
  return kv;
}

inline void write_transport_result(const std::filesystem::path& dir, const TransportResult& r,
                                   const std::optional<MapField>& map = std::nullopt) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "coupling.csv", std::ios::binary);
    if (!os) throw Error(ErrorKind::input, "cannot write " + (dir / "coupling.csv").string());
    os << "i,j,mass\n";
    for (const auto& e : r.coupling)
      if (e.mass > 0.0) os << e.source << ',' << e.target << ',' << format_double(e.mass) << '\n';
  }
  write_field_csv(dir / "phi.csv", r.grid, r.phi.values);
  write_field_csv(dir / "psi.csv", r.grid, r.psi.values);
  if (map) write_map_csv(dir / "map.csv", *map);
  auto meta = result_meta(r);
  if (map) meta["max_clip_distance"] = format_double(map->max_clip_distance);
  write_key_values(dir / "meta", meta);
}

}  // namespace otlab
