#include "conalign/io.hpp"

#include "conalign/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace conalign::io {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

std::vector<std::vector<double>> read_rows(const fs::path& path, bool skip_header) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (skip_header && lineno == 1)) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

fs::path sidecar(const fs::path& path) {
  fs::path p = path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

int level_for_vertices(std::size_t vertices) {
  std::size_t count = 12;
  for (int g = 0; g <= geometry::Icosphere::kMaxLevel; ++g, count = 4 * count - 6) {
    if (count == vertices) return g;
  }
  return -1;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_density(const fs::path& path, const density::DensityField& f) {
  json meta;
  meta["domain"] = f.domain.describe();
  meta["symmetric"] = true;
  if (f.domain.kind() == density::DomainKind::Interval) {
    meta["n"] = f.domain.size();
  } else {
    meta["level"] = f.domain.level();
  }
  write_json(sidecar(path), meta);
  auto out = open_out(path);
  const auto n = f.values.rows();
  std::string line;
  for (Eigen::Index i = 0; i < n; ++i) {
    line.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j) line += ',';
      line += fmt(f.values(i, j));
    }
    out << line << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

density::DensityField read_density(const fs::path& path) {
  const json meta = read_json(sidecar(path));
  if (!meta.contains("domain") || !meta["domain"].is_string()) throw IoError(sidecar(path).string() + ": missing domain");
  density::DensityField f;
  try {
    f.domain = density::Domain::parse(meta["domain"].get<std::string>());
  } catch (const ValidationError& e) {
    throw IoError(sidecar(path).string() + ": " + e.what());
  }
  const auto rows = read_rows(path, false);
  const auto n = static_cast<Eigen::Index>(f.domain.size());
  if (static_cast<Eigen::Index>(rows.size()) != n) throw IoError(path.string() + ": expected " + std::to_string(n) + " rows");
  f.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
      throw IoError(path.string() + ": row " + std::to_string(i + 1) + " has the wrong length");
    }
    for (Eigen::Index j = 0; j < n; ++j) f.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return f;
}

void write_warp(const fs::path& path, const warp::Warp1D& w) {
  const auto grid = geometry::Grid1D::uniform(w.size());
  write_csv(path, {"x", "gamma"}, {grid.points, w.values()});
}

warp::Warp1D read_warp1d(const fs::path& path) {
  const auto rows = read_rows(path, true);
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.size() != 2) throw IoError(path.string() + ": expected two columns");
    v.push_back(r[1]);
  }
  try {
    return warp::Warp1D::from_values(std::move(v));
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

namespace {

void write_targets(const fs::path& path, const std::vector<const warp::SphereWarp*>& parts) {
  std::vector<double> idx, x, y, z;
  std::size_t k = 0;
  for (const auto* w : parts) {
    for (const auto& t : w->targets()) {
      idx.push_back(static_cast<double>(k++));
      x.push_back(t.x());
      y.push_back(t.y());
      z.push_back(t.z());
    }
  }
  write_csv(path, {"index", "x", "y", "z"}, {idx, x, y, z});
}

std::vector<geometry::Vec3> read_targets(const fs::path& path) {
  const auto rows = read_rows(path, true);
  std::vector<geometry::Vec3> t(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (r.size() != 4 || r[0] != static_cast<double>(k)) throw IoError(path.string() + ": malformed row " + std::to_string(k + 2));
    t[k] = geometry::Vec3(r[1], r[2], r[3]);
  }
  return t;
}

}  // namespace

void write_warp(const fs::path& path, const warp::SphereWarp& w) { write_targets(path, {&w}); }

void write_warp(const fs::path& path, const warp::DualWarp& w) { write_targets(path, {&w.first, &w.second}); }

warp::SphereWarp read_sphere_warp(const fs::path& path) {
  auto t = read_targets(path);
  const int level = level_for_vertices(t.size());
  if (level < 0) throw IoError(path.string() + ": row count is not an icosphere vertex count");
  return warp::SphereWarp(geometry::icosphere(level), std::move(t));
}

warp::DualWarp read_dual_warp(const fs::path& path) {
  auto t = read_targets(path);
  const int level = level_for_vertices(t.size() / 2);
  if (t.size() % 2 != 0 || level < 0) throw IoError(path.string() + ": row count is not twice an icosphere vertex count");
  auto ico = geometry::icosphere(level);
  const auto half = static_cast<std::ptrdiff_t>(t.size() / 2);
  return {warp::SphereWarp(ico, std::vector<geometry::Vec3>(t.begin(), t.begin() + half)),
          warp::SphereWarp(ico, std::vector<geometry::Vec3>(t.begin() + half, t.end()))};
}

void write_icosphere(const fs::path& path, const geometry::Icosphere& ico) {
  fs::path table = path;
  table += ".csv";
  write_json(path, {{"level", ico.level()}, {"V", ico.num_vertices()}, {"vertices", table.filename().string()}});
  std::vector<double> x, y, z;
  for (const auto& v : ico.vertices()) {
    x.push_back(v.x());
    y.push_back(v.y());
    z.push_back(v.z());
  }
  write_csv(table, {"x", "y", "z"}, {x, y, z});
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << fmt(columns[c][r]);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string svg_line_plot(const std::vector<double>& y, const std::string& title, const std::string& ylabel) {
  const double w = 480, h = 300, left = 60, right = 20, top = 30, bottom = 40;
  double lo = 0.0, hi = 1.0;
  if (!y.empty()) {
    lo = *std::min_element(y.begin(), y.end());
    hi = *std::max_element(y.begin(), y.end());
  }
  if (hi - lo < 1e-300) hi = lo + 1.0;
  const double nx = std::max<double>(1.0, static_cast<double>(y.size()) - 1.0);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 8 << "\" text-anchor=\"middle\" font-size=\"12\">iteration</text>\n";
  s << "<text x=\"14\" y=\"" << h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << h / 2 << ")\">" << ylabel
    << "</text>\n";
  s << "<text x=\"" << left - 4 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(hi).substr(0, 8)
    << "</text>\n";
  s << "<text x=\"" << left - 4 << "\" y=\"" << h - bottom << "\" text-anchor=\"end\" font-size=\"10\">"
    << fmt(lo).substr(0, 8) << "</text>\n";
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double px = left + (w - left - right) * static_cast<double>(i) / nx;
    const double py = h - bottom - (h - top - bottom) * (y[i] - lo) / (hi - lo);
    s << px << ',' << py << ' ';
  }
  s << "\"/>\n</svg>\n";
  return s.str();
}

}  // namespace conalign::io
