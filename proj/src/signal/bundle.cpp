#include "brainage/bundle.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "brainage/error.hpp"

namespace brainage::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v & 0xff0000u) >> 8) | (v >> 24);
  }
  return v;
}

}  // namespace

bool is_bundle(const fs::path& dir) { return fs::exists(dir / "meta.json") && fs::exists(dir / "data.f32le"); }

Recording read_bundle(const fs::path& dir) {
  const json meta = read_json(dir / "meta.json");
  Recording rec;
  try {
    rec.subject_id = meta.at("subject_id").get<std::string>();
    if (!meta.at("age_years").is_null()) rec.age_years = meta.at("age_years").get<double>();
    rec.state = parse_state(meta.at("state").get<std::string>());
    rec.sampling_rate_hz = meta.at("sampling_rate_hz").get<double>();
    rec.channel_names = meta.at("channel_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kSchema, (dir / "meta.json").string() + ": " + e.what());
  }
  const fs::path data_path = dir / "data.f32le";
  const auto bytes = fs::file_size(data_path);
  const std::size_t n_ch = rec.channel_names.size();
  require(n_ch > 0, ErrorCode::kSchema, dir.string() + ": no channels");
  require(bytes % (4 * n_ch) == 0, ErrorCode::kSchema, data_path.string() + ": size is not channels x samples x 4");
  const std::size_t n_samp = bytes / (4 * n_ch);
  std::vector<std::uint32_t> raw(n_ch * n_samp);
  std::ifstream in(data_path, std::ios::binary);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  require(static_cast<bool>(in), ErrorCode::kIo, "short read on " + data_path.string());
  rec.data.resize(static_cast<Eigen::Index>(n_ch), static_cast<Eigen::Index>(n_samp));
  double* dst = rec.data.data();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::uint32_t v = to_le(raw[i]);
    float f;
    std::memcpy(&f, &v, 4);
    dst[i] = static_cast<double>(f);
  }
  rec.validate();
  return rec;
}

void write_bundle(const fs::path& dir, const Recording& rec) {
  rec.validate();
  fs::create_directories(dir);
  json meta;
  meta["subject_id"] = rec.subject_id;
  meta["age_years"] = rec.age_years ? json(*rec.age_years) : json(nullptr);
  meta["state"] = std::string(to_string(rec.state));
  meta["sampling_rate_hz"] = rec.sampling_rate_hz;
  meta["channel_names"] = rec.channel_names;
  write_json(dir / "meta.json", meta);

  std::vector<std::uint32_t> raw(static_cast<std::size_t>(rec.data.size()));
  const double* src = rec.data.data();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float f = static_cast<float>(src[i]);
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    raw[i] = to_le(v);
  }
  std::ofstream out(dir / "data.f32le", std::ios::binary);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + (dir / "data.f32le").string());
}

std::vector<fs::path> list_bundles(const fs::path& root) {
  require(fs::is_directory(root), ErrorCode::kIo, root.string() + " is not a directory");
  if (is_bundle(root)) return {root};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && is_bundle(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Montage read_montage(const fs::path& path) {
  const json j = read_json(path);
  Montage m;
  try {
    for (const auto& ch : j.at("channels")) {
      m.channel_names.push_back(ch.at("name").get<std::string>());
      const auto p = ch.at("position").get<std::vector<double>>();
      require(p.size() == 3, ErrorCode::kSchema, "montage position needs 3 coordinates");
      m.positions.emplace_back(p[0], p[1], p[2]);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void write_montage(const fs::path& path, const Montage& montage) {
  json channels = json::array();
  for (std::size_t i = 0; i < montage.channel_names.size(); ++i) {
    const auto& p = montage.positions[i];
    channels.push_back({{"name", montage.channel_names[i]}, {"position", {p.x(), p.y(), p.z()}}});
  }
  write_json(path, json{{"channels", channels}});
}

RegionMap read_regions(const fs::path& path) {
  const json j = read_json(path);
  RegionMap map;
  try {
    for (const auto& r : j.at("regions")) {
      map.regions.push_back({r.at("name").get<std::string>(), r.at("members").get<std::vector<std::string>>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
  map.validate();
  return map;
}

void write_regions(const fs::path& path, const RegionMap& map) {
  json regions = json::array();
  for (const auto& r : map.regions) regions.push_back({{"name", r.name}, {"members", r.members}});
  write_json(path, json{{"regions", regions}});
}

}  // namespace brainage::io
