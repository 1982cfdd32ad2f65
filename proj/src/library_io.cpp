#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rcd/hash.hpp"
#include "rcd/ingestion.hpp"
#include "rcd/io_util.hpp"

namespace rcd {
namespace {

using nlohmann::json;

json config_to_json(const IngestConfig& c) {
  return {{"bin_minutes", c.bin_minutes},
          {"block_hours", c.block_hours},
          {"bbox", {c.bbox.min_lat, c.bbox.min_lon, c.bbox.max_lat, c.bbox.max_lon}},
          {"mad_threshold", c.mad_threshold},
          {"mad_window", c.mad_window},
          {"holidays", c.holidays}};
}

IngestConfig config_from_json(const json& j) {
  IngestConfig c;
  c.bin_minutes = j.at("bin_minutes").get<int>();
  c.block_hours = j.at("block_hours").get<int>();
  const auto& b = j.at("bbox");
  c.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
            b.at(3).get<double>()};
  c.mad_threshold = j.at("mad_threshold").get<double>();
  c.mad_window = j.at("mad_window").get<int>();
  c.holidays = j.at("holidays").get<std::vector<std::string>>();
  return c;
}

json block_to_json(const RegimeBlock& b) {
  const auto& f = b.features;
  json events = json::array();
  for (const auto& e : b.events)
    events.push_back({{"start_bin", e.start_bin},
                      {"end_bin", e.end_bin},
                      {"peak_intensity", e.peak_intensity},
                      {"duration_bins", e.duration_bins},
                      {"pre_surge_features", e.pre_surge_features}});
  // OD pool is flattened: 5 numbers per trip.
  json pool = json::array();
  for (const auto& p : b.od_pool) {
    pool.push_back(p.pickup.lat);
    pool.push_back(p.pickup.lon);
    pool.push_back(p.dropoff.lat);
    pool.push_back(p.dropoff.lon);
    pool.push_back(p.offset_s);
  }
  return {{"block_id", b.block_id},
          {"demand_series", b.demand_series},
          {"features",
           {{"mean", f.mean},
            {"std", f.std},
            {"max", f.max},
            {"skewness", f.skewness},
            {"autocorr", f.autocorr}}},
          {"od_pool", std::move(pool)},
          {"events", std::move(events)},
          {"metadata",
           {{"month", b.metadata.month},
            {"day_type", to_string(b.metadata.day_type)},
            {"hour_block", b.metadata.hour_block}}}};
}

RegimeBlock block_from_json(const json& j) {
  RegimeBlock b;
  b.block_id = j.at("block_id").get<std::string>();
  b.demand_series = j.at("demand_series").get<std::vector<double>>();
  const auto& f = j.at("features");
  b.features.mean = f.at("mean").get<double>();
  b.features.std = f.at("std").get<double>();
  b.features.max = f.at("max").get<double>();
  b.features.skewness = f.at("skewness").get<double>();
  b.features.autocorr = f.at("autocorr").get<std::array<double, 3>>();
  const auto& pool = j.at("od_pool");
  if (pool.size() % 5 != 0) throw Error("library od_pool has a ragged layout");
  b.od_pool.reserve(pool.size() / 5);
  for (std::size_t i = 0; i < pool.size(); i += 5) {
    b.od_pool.push_back({{pool[i].get<double>(), pool[i + 1].get<double>()},
                         {pool[i + 2].get<double>(), pool[i + 3].get<double>()},
                         pool[i + 4].get<std::int32_t>()});
  }
  for (const auto& e : j.at("events")) {
    SurgeEvent ev;
    ev.start_bin = e.at("start_bin").get<int>();
    ev.end_bin = e.at("end_bin").get<int>();
    ev.peak_intensity = e.at("peak_intensity").get<double>();
    ev.duration_bins = e.at("duration_bins").get<int>();
    ev.pre_surge_features = e.at("pre_surge_features").get<std::vector<double>>();
    b.events.push_back(std::move(ev));
  }
  const auto& m = j.at("metadata");
  b.metadata.month = m.at("month").get<int>();
  b.metadata.day_type = day_type_from_string(m.at("day_type").get<std::string>());
  b.metadata.hour_block = m.at("hour_block").get<int>();
  return b;
}

}  // namespace

void save_library(const RegimeLibrary& lib, const std::filesystem::path& path) {
  json records = json::array();
  for (const auto& b : lib.records) records.push_back(block_to_json(b));
  json payload = {{"build_config", config_to_json(lib.build_config)},
                  {"records", std::move(records)}};
  const std::string body = payload.dump();
  json doc = {{"magic", kLibraryMagic},
              {"version", kLibraryVersion},
              {"checksum", sha256_hex(body)},
              {"payload", std::move(payload)}};
  write_file_atomic(path, doc.dump());
}

RegimeLibrary load_library(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open library file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();

  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error("library file is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (!doc.is_object() || doc.value("magic", "") != kLibraryMagic)
      throw Error("library file has a bad magic string");
    if (doc.at("version").get<int>() != kLibraryVersion)
      throw Error("library version mismatch: expected " +
                  std::to_string(kLibraryVersion));
    const auto& payload = doc.at("payload");
    if (sha256_hex(payload.dump()) != doc.at("checksum").get<std::string>())
      throw Error("library checksum mismatch");

    RegimeLibrary lib;
    lib.build_config = config_from_json(payload.at("build_config"));
    for (const auto& r : payload.at("records"))
      lib.records.push_back(block_from_json(r));
    return lib;
  } catch (const json::exception& e) {
    throw Error("library file is malformed: " + std::string(e.what()));
  }
}

}  // namespace rcd
