#include "tagalign/ingest.hpp"

#include <charconv>
#include <cstring>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace tagalign {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::int64_t parse_int(std::string_view tok, std::size_t line_no) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError("expected integer, got '" + std::string(tok) + "'", line_no);
  }
  return v;
}

double parse_double(std::string_view tok, std::size_t line_no) {
  // from_chars<double> is available on this toolchain but strtod keeps the
  // dependency surface minimal; token is bounded so copy is fine
  std::string buf(tok);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty()) {
    throw ParseError("expected number, got '" + buf + "'", line_no);
  }
  return v;
}

void append_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void append_le_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_le(out, bits);
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

float read_f32_le(const std::uint8_t* p) {
  const std::uint32_t bits = read_u32_le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double read_f64_le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

BinaryDescriptor decode_orb_descriptor(std::span<const int> values) {
  if (values.size() != BinaryDescriptor::kOctets) {
    throw BadLength("descriptor needs 32 values, got " +
                    std::to_string(values.size()));
  }
  std::array<std::uint8_t, BinaryDescriptor::kOctets> octets{};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int v = values[i];
    if (v < -128 || v > 255) {
      throw OutOfRange("descriptor value " + std::to_string(v) +
                       " outside [-128, 255]");
    }
    octets[i] = static_cast<std::uint8_t>(v & 0xff);
  }
  return BinaryDescriptor(octets);
}

// ---------------------------------------------------------------------------
// PLY

namespace {

enum class PlyScalar { kFloat32, kFloat64, kUchar };

struct PlyProperty {
  PlyScalar type;
  std::string name;
};

std::size_t scalar_size(PlyScalar t) {
  switch (t) {
    case PlyScalar::kFloat32: return 4;
    case PlyScalar::kFloat64: return 8;
    case PlyScalar::kUchar: return 1;
  }
  return 0;
}

}  // namespace

PointCloud parse_ply(std::span<const std::uint8_t> bytes) {
  std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const std::size_t header_end = text.find("end_header");
  if (header_end == std::string_view::npos) {
    throw MalformedHeader("missing end_header");
  }
  std::size_t body_start = text.find('\n', header_end);
  if (body_start == std::string_view::npos) {
    throw MalformedHeader("end_header line not terminated");
  }
  ++body_start;

  const auto lines = split_lines(text.substr(0, header_end));
  if (lines.empty() || split_ws(lines[0]).size() != 1 || lines[0].substr(0, 3) != "ply") {
    throw MalformedHeader("missing ply magic");
  }

  bool ascii = false;
  bool have_format = false;
  std::size_t vertex_count = 0;
  bool in_vertex = false, seen_vertex = false;
  std::vector<PlyProperty> props;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto toks = split_ws(lines[i]);
    if (toks.empty() || toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() != 3 || toks[2] != "1.0") {
        throw MalformedHeader("bad format line");
      }
      if (toks[1] == "ascii") ascii = true;
      else if (toks[1] == "binary_little_endian") ascii = false;
      else throw UnsupportedFormat("format " + std::string(toks[1]));
      have_format = true;
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw MalformedHeader("bad element line");
      if (toks[1] == "vertex") {
        vertex_count = static_cast<std::size_t>(parse_int(toks[2], i + 1));
        in_vertex = true;
        seen_vertex = true;
      } else {
        if (!seen_vertex && parse_int(toks[2], i + 1) > 0) {
          throw UnsupportedFormat("non-vertex element before vertex data");
        }
        in_vertex = false;
      }
    } else if (toks[0] == "property") {
      if (!in_vertex) continue;  // properties of trailing elements are ignored
      if (toks.size() != 3) throw UnsupportedFormat("list properties unsupported");
      PlyScalar type;
      if (toks[1] == "float" || toks[1] == "float32") type = PlyScalar::kFloat32;
      else if (toks[1] == "double" || toks[1] == "float64") type = PlyScalar::kFloat64;
      else if (toks[1] == "uchar" || toks[1] == "uint8") type = PlyScalar::kUchar;
      else throw UnsupportedFormat("property type " + std::string(toks[1]));
      props.push_back({type, std::string(toks[2])});
    } else {
      throw MalformedHeader("unrecognized header line: " + std::string(lines[i]));
    }
  }
  if (!have_format) throw MalformedHeader("missing format line");
  if (!seen_vertex) throw MalformedHeader("missing vertex element");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const auto& p = props[i];
    if (p.name == "x") ix = static_cast<int>(i);
    else if (p.name == "y") iy = static_cast<int>(i);
    else if (p.name == "z") iz = static_cast<int>(i);
    else if (p.name == "red") ir = static_cast<int>(i);
    else if (p.name == "green") ig = static_cast<int>(i);
    else if (p.name == "blue") ib = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw MalformedHeader("vertex lacks x/y/z");
  const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  if (has_color) cloud.colors.emplace();

  if (ascii) {
    std::istringstream body{std::string(text.substr(body_start))};
    std::vector<double> row(props.size());
    for (std::size_t v = 0; v < vertex_count; ++v) {
      for (std::size_t p = 0; p < props.size(); ++p) {
        if (!(body >> row[p])) throw TruncatedBody("ascii body ended early");
      }
      cloud.points.push_back({row[ix], row[iy], row[iz]});
      if (has_color) {
        cloud.colors->push_back({static_cast<std::uint8_t>(row[ir]),
                                 static_cast<std::uint8_t>(row[ig]),
                                 static_cast<std::uint8_t>(row[ib])});
      }
    }
  } else {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : props) {
      offsets.push_back(stride);
      stride += scalar_size(p.type);
    }
    if (body_start + vertex_count * stride > bytes.size()) {
      throw TruncatedBody("binary body shorter than declared vertex data");
    }
    auto read_scalar = [&](const std::uint8_t* base, std::size_t pi) -> double {
      const std::uint8_t* p = base + offsets[pi];
      switch (props[pi].type) {
        case PlyScalar::kFloat32: return read_f32_le(p);
        case PlyScalar::kFloat64: return read_f64_le(p);
        case PlyScalar::kUchar: return *p;
      }
      return 0.0;
    };
    for (std::size_t v = 0; v < vertex_count; ++v) {
      const std::uint8_t* base = bytes.data() + body_start + v * stride;
      cloud.points.push_back({read_scalar(base, ix), read_scalar(base, iy),
                              read_scalar(base, iz)});
      if (has_color) {
        cloud.colors->push_back(
            {static_cast<std::uint8_t>(read_scalar(base, ir)),
             static_cast<std::uint8_t>(read_scalar(base, ig)),
             static_cast<std::uint8_t>(read_scalar(base, ib))});
      }
    }
  }
  return cloud;
}

std::vector<std::uint8_t> write_ply(const PointCloud& cloud) {
  const bool has_color = cloud.colors.has_value();
  std::string header = "ply\nformat binary_little_endian 1.0\n";
  header += "element vertex " + std::to_string(cloud.points.size()) + "\n";
  header += "property float x\nproperty float y\nproperty float z\n";
  if (has_color) {
    header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  header += "end_header\n";

  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + cloud.points.size() * (has_color ? 15 : 12));
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Point3& p = cloud.points[i];
    append_le_f32(out, static_cast<float>(p.x));
    append_le_f32(out, static_cast<float>(p.y));
    append_le_f32(out, static_cast<float>(p.z));
    if (has_color) {
      const Rgb& c = (*cloud.colors)[i];
      out.push_back(c[0]);
      out.push_back(c[1]);
      out.push_back(c[2]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// MAPTXT

SlamMapExport parse_slam_export(std::string_view text) {
  SlamMapExport map;
  std::unordered_set<std::int64_t> seen;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = lines[i];
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 36) {
      throw ParseError("expected 36 tokens, got " + std::to_string(toks.size()),
                       line_no);
    }
    SlamMapExport::MapPoint pt;
    pt.point_id = parse_int(toks[0], line_no);
    if (!seen.insert(pt.point_id).second) {
      throw DuplicatePointId("duplicate point id " + std::to_string(pt.point_id) +
                             " at line " + std::to_string(line_no));
    }
    pt.coord = {parse_double(toks[1], line_no), parse_double(toks[2], line_no),
                parse_double(toks[3], line_no)};
    std::array<int, 32> vals{};
    for (std::size_t k = 0; k < 32; ++k) {
      const std::int64_t v = parse_int(toks[4 + k], line_no);
      if (v < -128 || v > 255) {
        throw ParseError("descriptor value " + std::to_string(v) +
                         " outside [-128, 255]", line_no);
      }
      vals[k] = static_cast<int>(v);
    }
    pt.descriptor = decode_orb_descriptor(vals);
    map.points.push_back(std::move(pt));
  }
  return map;
}

std::string write_slam_export(const SlamMapExport& map) {
  std::string out;
  for (const auto& pt : map.points) {
    out += std::to_string(pt.point_id);
    out += ' ';
    out += format_double(pt.coord.x);
    out += ' ';
    out += format_double(pt.coord.y);
    out += ' ';
    out += format_double(pt.coord.z);
    for (std::uint8_t o : pt.descriptor.octets()) {
      out += ' ';
      out += std::to_string(static_cast<int>(o));
    }
    out += '\n';
  }
  return out;
}

DescribedCloud SlamMapExport::to_described_cloud() const {
  DescribedCloud cloud;
  cloud.kind = DescriptorKind::kBinary;
  cloud.source = "slam";
  cloud.entries.reserve(points.size());
  for (const auto& pt : points) {
    cloud.entries.push_back({pt.coord, {pt.descriptor}, {}});
  }
  return cloud;
}

PointCloud SlamMapExport::to_point_cloud() const {
  PointCloud cloud;
  cloud.points.reserve(points.size());
  for (const auto& pt : points) cloud.points.push_back(pt.coord);
  return cloud;
}

// ---------------------------------------------------------------------------
// Reconstruction JSON

SfmReconstruction parse_reconstruction(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
  if (!doc.is_array()) {
    throw MalformedJson("top level must be a list of reconstructions");
  }

  SfmReconstruction rec;
  std::unordered_set<std::string> seen;
  for (const auto& obj : doc) {
    if (!obj.is_object()) throw MalformedJson("reconstruction entry not an object");
    if (!obj.contains("points")) continue;
    const auto& points = obj.at("points");
    if (!points.is_object()) throw MalformedJson("'points' must be an object");
    for (const auto& [track_id, value] : points.items()) {
      if (!seen.insert(track_id).second) continue;  // first occurrence wins
      if (!value.contains("coordinates")) {
        throw MissingField("point '" + track_id + "' lacks 'coordinates'");
      }
      const auto& coords = value.at("coordinates");
      if (!coords.is_array() || coords.size() != 3) {
        throw BadArity("'coordinates' of point '" + track_id +
                       "' must have 3 entries");
      }
      SfmPoint pt;
      try {
        pt.coord = {coords[0].get<double>(), coords[1].get<double>(),
                    coords[2].get<double>()};
        if (value.contains("color")) {
          const auto& color = value.at("color");
          if (!color.is_array() || color.size() != 3) {
            throw BadArity("'color' of point '" + track_id + "' must have 3 entries");
          }
          for (int i = 0; i < 3; ++i) {
            pt.color[i] = static_cast<std::uint8_t>(color[i].get<double>());
          }
        }
      } catch (const nlohmann::json::exception& e) {
        throw MalformedJson(e.what());
      }
      rec.points.emplace_back(track_id, pt);
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Tracks

TrackTable parse_tracks(std::string_view text) {
  TrackTable table;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.empty()) continue;
    if (i == 0 && line.starts_with("OPENSFM_TRACKS_VERSION")) continue;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 3) {
      throw ParseError("expected at least 3 tab-separated columns", i + 1);
    }
    const std::int64_t feature_id = parse_int(cols[2], i + 1);
    if (feature_id < 0) {
      throw NegativeFeatureId("feature id " + std::to_string(feature_id) +
                              " at line " + std::to_string(i + 1));
    }
    table.rows.push_back({std::string(cols[0]), std::string(cols[1]), feature_id});
  }
  return table;
}

// ---------------------------------------------------------------------------
// FEAT1

static constexpr char kFeatMagic[5] = {'F', 'E', 'A', 'T', '1'};

std::vector<FloatDescriptor> parse_feature_archive(
    std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kFeatMagic, 5) != 0) {
    throw BadMagic("missing FEAT1 magic");
  }
  if (bytes.size() < 13) throw TruncatedPayload("FEAT1 header truncated");
  const std::uint32_t n = read_u32_le(bytes.data() + 5);
  const std::uint32_t d = read_u32_le(bytes.data() + 9);
  if (n > 0 && d == 0) throw ZeroDimension("descriptor dimension is zero");
  const std::size_t need = 13 + static_cast<std::size_t>(n) * d * 4;
  if (bytes.size() < need) {
    throw TruncatedPayload("FEAT1 payload shorter than N*D*4 bytes");
  }
  std::vector<FloatDescriptor> out;
  out.reserve(n);
  const std::uint8_t* p = bytes.data() + 13;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::vector<double> vals(d);
    for (std::uint32_t j = 0; j < d; ++j, p += 4) vals[j] = read_f32_le(p);
    out.emplace_back(std::move(vals));
  }
  return out;
}

std::vector<std::uint8_t> write_feature_archive(
    const std::vector<FloatDescriptor>& descs) {
  const std::uint32_t n = static_cast<std::uint32_t>(descs.size());
  const std::uint32_t d = descs.empty() ? 0u : static_cast<std::uint32_t>(descs[0].dim());
  std::vector<std::uint8_t> out(kFeatMagic, kFeatMagic + 5);
  append_le(out, n);
  append_le(out, d);
  for (const auto& desc : descs) {
    for (double v : desc.values()) append_le_f32(out, static_cast<float>(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Join

DescribedCloud join_descriptors_to_points(const SfmReconstruction& rec,
                                          const TrackTable& tracks,
                                          const FeatureArchive& feats,
                                          JoinReport* report) {
  JoinReport local;
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(rec.points.size());
  for (std::size_t i = 0; i < rec.points.size(); ++i) {
    index.emplace(rec.points[i].first, i);
  }

  std::vector<std::vector<FloatDescriptor>> attached(rec.points.size());
  for (const TrackRow& row : tracks.rows) {
    const auto it = index.find(row.track_id);
    if (it == index.end()) {
      ++local.rows_missing_track;
      continue;
    }
    const auto img = feats.images.find(row.image_name);
    if (img == feats.images.end()) {
      ++local.rows_missing_image;
      continue;
    }
    if (static_cast<std::size_t>(row.feature_id) >= img->second.size()) {
      ++local.rows_feature_out_of_range;
      continue;
    }
    attached[it->second].push_back(img->second[row.feature_id]);
    ++local.rows_joined;
  }

  DescribedCloud cloud;
  cloud.kind = DescriptorKind::kFloat;
  cloud.source = "sfm";
  for (std::size_t i = 0; i < rec.points.size(); ++i) {
    if (attached[i].empty()) {
      ++local.points_excluded;
      continue;
    }
    cloud.entries.push_back({rec.points[i].second.coord, {}, std::move(attached[i])});
  }
  if (report) *report = local;
  return cloud;
}

}  // namespace tagalign
