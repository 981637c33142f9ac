#pragma once

#include "conalign/density.hpp"
#include "conalign/warp.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace conalign::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Density as a row-major CSV at `path` plus a JSON sidecar next to it
/// (same stem, .json) holding {domain, n|level, symmetric}.
void write_density(const fs::path& path, const density::DensityField& f);
density::DensityField read_density(const fs::path& path);

/// Two columns: x, gamma(x).
void write_warp(const fs::path& path, const warp::Warp1D& w);
warp::Warp1D read_warp1d(const fs::path& path);

/// Four columns: node index, target x, y, z. Dual warps list 2V rows.
void write_warp(const fs::path& path, const warp::SphereWarp& w);
void write_warp(const fs::path& path, const warp::DualWarp& w);
warp::SphereWarp read_sphere_warp(const fs::path& path);
warp::DualWarp read_dual_warp(const fs::path& path);

/// JSON header {level, V} at path and the x,y,z vertex table at path.csv.
void write_icosphere(const fs::path& path, const geometry::Icosphere& ico);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

/// Header line followed by rows at 17 significant digits.
void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

/// Minimal standalone SVG line plot of one series.
std::string svg_line_plot(const std::vector<double>& y, const std::string& title, const std::string& ylabel);

/// Level G with 10*4^G+2 == vertices, or -1.
int level_for_vertices(std::size_t vertices);

}  // namespace conalign::io
