#include "coin/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "coin/io.hpp"

namespace coin {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(v) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) {
      throw ConfigError("config key '" + std::string(key) + "': value must be finite");
    }
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true/false, got '" +
                    std::string(v) + "'");
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Key {
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Key number_key(T& (*field)(RunConfig&)) {
  return {[field](RunConfig& c, std::string_view k, std::string_view v) {
            field(c) = parse_number<T>(k, v);
          },
          [field](const RunConfig& c) {
            return format_number(field(const_cast<RunConfig&>(c)));
          }};
}

Key bool_key(bool& (*field)(RunConfig&)) {
  return {[field](RunConfig& c, std::string_view k, std::string_view v) { field(c) = parse_bool(k, v); },
          [field](const RunConfig& c) {
            return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

Key path_key(std::filesystem::path& (*field)(RunConfig&)) {
  return {[field](RunConfig& c, std::string_view, std::string_view v) { field(c) = std::string(v); },
          [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)).string(); }};
}

#define COIN_FIELD(expr) +[](RunConfig& c) -> auto& { return c.expr; }

const std::map<std::string, Key, std::less<>>& keys() {
  static const std::map<std::string, Key, std::less<>> table = [] {
    std::map<std::string, Key, std::less<>> t;
    t["ot.lambda"] = number_key<double>(COIN_FIELD(coin.propagation.ot.lambda));
    t["ot.tol"] = number_key<double>(COIN_FIELD(coin.propagation.ot.tol));
    t["ot.max_iter"] = number_key<int>(COIN_FIELD(coin.propagation.ot.max_iter));
    t["ot.log_domain_below"] = number_key<double>(COIN_FIELD(coin.propagation.ot.log_domain_below));
    t["ot.enabled"] = bool_key(COIN_FIELD(coin.propagation.use_ot));
    t["patch.per_axis"] = number_key<int>(COIN_FIELD(coin.propagation.per_axis));
    t["morph.connectivity"] = number_key<int>(COIN_FIELD(coin.morph.connectivity));
    t["morph.min_distance"] = number_key<int>(COIN_FIELD(coin.morph.min_distance));
    t["morph.edge_dilate"] = number_key<int>(COIN_FIELD(coin.morph.edge_dilate));
    t["scoring.threshold_mode"] = {
        [](RunConfig& c, std::string_view k, std::string_view v) {
          if (v == "mean_plus_std") {
            c.coin.scoring.mode = ThresholdMode::kMeanPlusStd;
          } else if (v == "std_over_mean") {
            c.coin.scoring.mode = ThresholdMode::kStdOverMean;
          } else {
            throw ConfigError("config key '" + std::string(k) +
                              "': expected mean_plus_std or std_over_mean");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.coin.scoring.mode == ThresholdMode::kMeanPlusStd ? "mean_plus_std"
                                                                               : "std_over_mean");
        }};
    t["scoring.bypass"] = bool_key(COIN_FIELD(coin.scoring.bypass));
    t["distill.rounds"] = number_key<int>(COIN_FIELD(coin.distill.rounds));
    t["distill.epochs"] = number_key<int>(COIN_FIELD(coin.distill.epochs));
    t["distill.lr"] = number_key<double>(COIN_FIELD(coin.distill.lr));
    t["distill.hidden"] = number_key<int>(COIN_FIELD(coin.distill.hidden));
    t["distill.seed"] = number_key<std::uint64_t>(COIN_FIELD(coin.distill.seed));
    t["metrics.adjacent_radius"] = number_key<int>(COIN_FIELD(coin.metrics.adjacent_radius));
    t["metrics.adjacent_min_neighbors"] =
        number_key<int>(COIN_FIELD(coin.metrics.adjacent_min_neighbors));
    t["oracle.mode"] = {
        [](RunConfig& c, std::string_view k, std::string_view v) {
          if (v == "synthetic") {
            c.oracle_mode = OracleMode::kSynthetic;
          } else if (v == "bridge") {
            c.oracle_mode = OracleMode::kBridge;
          } else {
            throw ConfigError("config key '" + std::string(k) + "': expected synthetic or bridge");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.oracle_mode == OracleMode::kSynthetic ? "synthetic" : "bridge");
        }};
    t["oracle.bridge_dir"] = path_key(COIN_FIELD(bridge_dir));
    t["oracle.jitter"] = number_key<double>(COIN_FIELD(oracle.jitter));
    t["oracle.failure_fraction"] = number_key<double>(COIN_FIELD(oracle.failure_fraction));
    t["oracle.failure_rate"] = number_key<double>(COIN_FIELD(oracle.failure_rate));
    t["oracle.seed"] = number_key<std::uint64_t>(COIN_FIELD(oracle.seed));
    t["synth.seed"] = number_key<std::uint64_t>(COIN_FIELD(synth.seed));
    t["synth.images"] = number_key<int>(COIN_FIELD(synth.images));
    t["synth.test_images"] = number_key<int>(COIN_FIELD(synth.test_images));
    t["synth.size"] = number_key<int>(COIN_FIELD(synth.size));
    t["synth.cells"] = number_key<int>(COIN_FIELD(synth.cells));
    t["synth.radius_min"] = number_key<double>(COIN_FIELD(synth.radius_min));
    t["synth.radius_max"] = number_key<double>(COIN_FIELD(synth.radius_max));
    t["synth.overlap_prob"] = number_key<double>(COIN_FIELD(synth.overlap_prob));
    t["synth.depth"] = number_key<int>(COIN_FIELD(synth.depth));
    t["synth.noise"] = number_key<double>(COIN_FIELD(synth.noise));
    t["synth.erode"] = number_key<double>(COIN_FIELD(synth.erode));
    t["synth.drop"] = number_key<double>(COIN_FIELD(synth.drop));
    t["synth.blur"] = number_key<double>(COIN_FIELD(synth.blur));
    t["synth.affinity"] = number_key<double>(COIN_FIELD(synth.affinity));
    t["synth.affinity_scale"] = number_key<double>(COIN_FIELD(synth.affinity_scale));
    t["synth.blobs_large"] = number_key<int>(COIN_FIELD(synth.blobs_large));
    t["synth.blobs_small"] = number_key<int>(COIN_FIELD(synth.blobs_small));
    t["synth.blob_large_min"] = number_key<double>(COIN_FIELD(synth.blob_large_min));
    t["synth.blob_large_max"] = number_key<double>(COIN_FIELD(synth.blob_large_max));
    t["synth.blob_small_min"] = number_key<double>(COIN_FIELD(synth.blob_small_min));
    t["synth.blob_small_max"] = number_key<double>(COIN_FIELD(synth.blob_small_max));
    t["synth.blob_mix"] = number_key<double>(COIN_FIELD(synth.blob_mix));
    t["synth.blob_mix_spread"] = number_key<double>(COIN_FIELD(synth.blob_mix_spread));
    t["synth.blob_texture"] = number_key<double>(COIN_FIELD(synth.blob_texture));
    t["synth.gain"] = number_key<double>(COIN_FIELD(synth.gain));
    t["synth.membrane"] = number_key<double>(COIN_FIELD(synth.membrane));
    t["dataset"] = path_key(COIN_FIELD(dataset));
    t["output"] = path_key(COIN_FIELD(output));
    t["jobs"] = number_key<int>(COIN_FIELD(jobs));
    return t;
  }();
  return table;
}

#undef COIN_FIELD

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto it = keys().find(key);
  if (it == keys().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second.set(*this, key, trim(value));
}

void RunConfig::set_seed(std::uint64_t seed) {
  coin.distill.seed = seed;
  synth.seed = seed;
  oracle.seed = seed;
}

void RunConfig::validate() const {
  const auto& ot = coin.propagation.ot;
  require(ot.lambda > 0.0, "ot.lambda must be > 0");
  require(ot.tol > 0.0, "ot.tol must be > 0");
  require(ot.max_iter >= 1, "ot.max_iter must be >= 1");
  require(ot.log_domain_below >= 0.0, "ot.log_domain_below must be >= 0");
  require(coin.propagation.per_axis >= 1, "patch.per_axis must be >= 1");
  require(coin.morph.connectivity == 4 || coin.morph.connectivity == 8,
          "morph.connectivity must be 4 or 8");
  require(coin.morph.min_distance >= 1, "morph.min_distance must be >= 1");
  require(coin.morph.edge_dilate >= 0, "morph.edge_dilate must be >= 0");
  require(coin.distill.rounds >= 0, "distill.rounds must be >= 0");
  require(coin.distill.epochs >= 0, "distill.epochs must be >= 0");
  require(coin.distill.lr >= 0.0, "distill.lr must be >= 0");
  require(coin.distill.hidden >= 1, "distill.hidden must be >= 1");
  require(coin.metrics.adjacent_radius >= 1, "metrics.adjacent_radius must be >= 1");
  require(coin.metrics.adjacent_min_neighbors >= 1, "metrics.adjacent_min_neighbors must be >= 1");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  require(prob(oracle.jitter), "oracle.jitter must be in [0,1]");
  require(prob(oracle.failure_fraction), "oracle.failure_fraction must be in [0,1]");
  require(prob(oracle.failure_rate), "oracle.failure_rate must be in [0,1]");
  require(jobs >= 1, "jobs must be >= 1");
  try {
    synth.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [name, key] : keys()) out += name + " = " + key.get(*this) + "\n";
  return out;
}

std::vector<std::string> key_names() {
  std::vector<std::string> names;
  for (const auto& [name, key] : keys()) names.push_back(name);
  return names;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                   std::string_view origin) {
  std::vector<std::pair<std::string, std::string>> out;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
    }
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

void apply_config_text(RunConfig& config, std::string_view text, std::string_view origin) {
  for (const auto& [k, v] : parse_config_text(text, origin)) config.set(k, v);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::vector<std::byte> bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  RunConfig c;
  apply_config_text(c, {reinterpret_cast<const char*>(bytes.data()), bytes.size()}, path.string());
  return c;
}

SynthConfig clean_synth_config() {
  SynthConfig c;
  c.noise = 0.05;
  c.affinity = 0.0;
  c.blobs_large = 0;
  c.blobs_small = 0;
  c.membrane = 0.0;
  return c;
}

}  // namespace coin
