#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "dmoe/error.hpp"
#include "dmoe/harness.hpp"
#include "json.hpp"

namespace dmoe {

namespace {

using nlohmann::json;

// Typed access to one JSON object; every error names the dotted field path.
class Fields {
 public:
  Fields(const json& obj, std::string path, std::initializer_list<const char*> allowed)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "document" : path_, "must be an object");
    std::set<std::string> known(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj_.items()) {
      if (!known.contains(key)) fail(name(key), "is not a recognised field");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& at(const char* key) const { return obj_.at(key); }
  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const char* key, double& out) const {
    if (!has(key)) return;
    if (!at(key).is_number()) fail(name(key), "must be a number");
    out = at(key).get<double>();
  }
  void count(const char* key, std::size_t& out) const {
    if (!has(key)) return;
    if (!at(key).is_number_unsigned()) fail(name(key), "must be a non-negative integer");
    out = at(key).get<std::size_t>();
  }
  void seed(const char* key, std::uint64_t& out) const {
    if (!has(key)) return;
    if (!at(key).is_number_unsigned()) fail(name(key), "must be a non-negative integer");
    out = at(key).get<std::uint64_t>();
  }
  void flag(const char* key, bool& out) const {
    if (!has(key)) return;
    if (!at(key).is_boolean()) fail(name(key), "must be true or false");
    out = at(key).get<bool>();
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& what) {
    throw ScenarioError(field + " " + what);
  }

 private:
  const json& obj_;
  std::string path_;
};

const json& array_at(const json& value, const std::string& field) {
  if (!value.is_array()) Fields::fail(field, "must be an array");
  return value;
}

double number_at(const json& value, const std::string& field) {
  if (!value.is_number()) Fields::fail(field, "must be a number");
  return value.get<double>();
}

std::string index_name(const std::string& field, std::size_t i) {
  return field + "[" + std::to_string(i) + "]";
}

void require_positive(double value, const std::string& field) {
  if (!(value > 0.0)) Fields::fail(field, "must be > 0");
}

SystemConfig read_system(const json& j) {
  SystemConfig cfg;
  Fields f(j, "system",
           {"num_experts", "num_subcarriers", "num_layers", "subcarrier_bandwidth",
            "tx_power", "noise_power", "hidden_state_bits", "mean_path_loss"});
  f.count("num_experts", cfg.num_experts);
  f.count("num_subcarriers", cfg.num_subcarriers);
  f.count("num_layers", cfg.num_layers);
  f.number("subcarrier_bandwidth", cfg.subcarrier_bandwidth);
  f.number("tx_power", cfg.tx_power);
  f.number("noise_power", cfg.noise_power);
  f.number("hidden_state_bits", cfg.hidden_state_bits);
  f.number("mean_path_loss", cfg.mean_path_loss);
  return cfg;
}

std::vector<ExpertProfile> read_experts(const json& j) {
  std::vector<ExpertProfile> out;
  const json& arr = array_at(j, "experts");
  for (std::size_t e = 0; e < arr.size(); ++e) {
    ExpertProfile p;
    Fields f(arr[e], index_name("experts", e), {"comp_energy_per_token", "comp_energy_offset"});
    f.number("comp_energy_per_token", p.comp_energy_per_token);
    f.number("comp_energy_offset", p.comp_energy_offset);
    out.push_back(p);
  }
  return out;
}

GatingTensor read_scores(const json& j, const SystemConfig& cfg,
                         const std::vector<std::size_t>& tokens) {
  const std::string field = "gating.scores";
  const json& layers = array_at(j, field);
  if (layers.size() != cfg.num_layers) Fields::fail(field, "must have num_layers entries");
  GatingTensor g(cfg.num_layers, cfg.num_experts, tokens);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string lf = index_name(field, l);
    const json& sources = array_at(layers[l], lf);
    if (sources.size() != cfg.num_experts) Fields::fail(lf, "must have num_experts entries");
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const std::string sf = index_name(lf, i);
      const json& toks = array_at(sources[i], sf);
      if (toks.size() != tokens[i]) Fields::fail(sf, "must have tokens_per_expert entries");
      for (std::size_t n = 0; n < toks.size(); ++n) {
        const std::string tf = index_name(sf, n);
        const json& vec = array_at(toks[n], tf);
        if (vec.size() != cfg.num_experts) Fields::fail(tf, "must have num_experts entries");
        auto dst = g.scores(l + 1, i, n);
        for (std::size_t k = 0; k < vec.size(); ++k) dst[k] = number_at(vec[k], index_name(tf, k));
      }
    }
  }
  if (!g.is_valid()) Fields::fail(field, "must hold nonnegative vectors summing to 1");
  return g;
}

Array3<double> read_gains(const json& j, const SystemConfig& cfg) {
  const std::string field = "channel_gains";
  const std::size_t k = cfg.num_experts;
  Array3<double> gains(k, k, cfg.num_subcarriers, 0.0);
  const json& rows = array_at(j, field);
  if (rows.size() != k) Fields::fail(field, "must have num_experts entries");
  for (std::size_t a = 0; a < k; ++a) {
    const std::string af = index_name(field, a);
    const json& cols = array_at(rows[a], af);
    if (cols.size() != k) Fields::fail(af, "must have num_experts entries");
    for (std::size_t b = 0; b < k; ++b) {
      const std::string bf = index_name(af, b);
      const json& vec = array_at(cols[b], bf);
      if (vec.size() != cfg.num_subcarriers) Fields::fail(bf, "must have num_subcarriers entries");
      for (std::size_t m = 0; m < vec.size(); ++m) {
        const double v = number_at(vec[m], index_name(bf, m));
        if (!(v >= 0.0)) Fields::fail(index_name(bf, m), "must be >= 0");
        gains(a, b, m) = v;
      }
    }
  }
  return gains;
}

json scheme_list(const std::vector<SchemeKind>& schemes) {
  json out = json::array();
  for (const auto& s : schemes) out.push_back(scheme_label(s));
  return out;
}

}  // namespace

ScenarioSpec default_spec() {
  ScenarioSpec spec;
  spec.experts = default_profiles(spec.system.num_experts);
  spec.tokens_per_expert.assign(spec.system.num_experts, 16);
  spec.schemes = {TopK{2}, Jesa{0.9, 2}, LowerBound{0.9, 2}};
  for (std::uint64_t s = 1; s <= 50; ++s) spec.seeds.push_back(s);
  return spec;
}

void validate_spec(const ScenarioSpec& spec) {
  const SystemConfig& c = spec.system;
  if (c.num_experts < 2) Fields::fail("system.num_experts", "must be >= 2");
  if (c.num_subcarriers == 0) Fields::fail("system.num_subcarriers", "must be > 0");
  if (c.num_layers == 0) Fields::fail("system.num_layers", "must be > 0");
  require_positive(c.subcarrier_bandwidth, "system.subcarrier_bandwidth");
  require_positive(c.tx_power, "system.tx_power");
  require_positive(c.noise_power, "system.noise_power");
  require_positive(c.hidden_state_bits, "system.hidden_state_bits");
  require_positive(c.mean_path_loss, "system.mean_path_loss");
  if (spec.experts.size() != c.num_experts) Fields::fail("experts", "must have num_experts entries");
  for (std::size_t e = 0; e < spec.experts.size(); ++e) {
    require_positive(spec.experts[e].comp_energy_per_token,
                     index_name("experts", e) + ".comp_energy_per_token");
    if (!(spec.experts[e].comp_energy_offset >= 0.0)) {
      Fields::fail(index_name("experts", e) + ".comp_energy_offset", "must be >= 0");
    }
  }
  if (spec.tokens_per_expert.size() != c.num_experts) {
    Fields::fail("tokens_per_expert", "must have num_experts entries");
  }
  std::size_t total = 0;
  for (std::size_t n : spec.tokens_per_expert) total += n;
  if (total == 0) Fields::fail("tokens_per_expert", "must contain at least one token");
  if (!(spec.gating.concentration > 0.0)) Fields::fail("gating.concentration", "must be > 0");
  if (!(spec.gating.specialist_boost >= 1.0)) Fields::fail("gating.specialist_boost", "must be >= 1");
  try {
    spec.policy.validate();
  } catch (const DomainError& e) {
    Fields::fail("policy", e.what());
  }
  if (spec.policy.max_experts > c.num_experts) Fields::fail("policy.max_experts", "must be <= num_experts");
  for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
    try {
      validate_scheme(spec.schemes[s], c.num_experts);
    } catch (const DomainError& e) {
      Fields::fail(index_name("schemes", s), e.what());
    }
  }
  for (double g : spec.sweep.gamma0) {
    if (!(g > 0.0 && g <= 1.0)) Fields::fail("sweep.gamma0", "entries must lie in (0, 1]");
  }
  for (std::size_t k : spec.sweep.k) {
    if (k == 0 || k > c.num_experts) Fields::fail("sweep.k", "entries must lie in [1, num_experts]");
  }
  if (spec.max_iterations == 0) Fields::fail("max_iterations", "must be > 0");
  if (spec.channel_gains && (spec.channel_gains->extent0() != c.num_experts ||
                             spec.channel_gains->extent2() != c.num_subcarriers)) {
    Fields::fail("channel_gains", "shape must be num_experts x num_experts x num_subcarriers");
  }
}

ScenarioSpec parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  }
  Fields top(doc, "",
             {"schema_version", "system", "experts", "tokens_per_expert", "gating",
              "channel_gains", "policy", "schemes", "seeds", "sweep", "oracle",
              "max_iterations"});
  if (top.has("schema_version")) {
    const json& v = top.at("schema_version");
    if (!v.is_number_unsigned() || v.get<int>() != kSchemaVersion) {
      Fields::fail("schema_version", "must be " + std::to_string(kSchemaVersion));
    }
  }

  ScenarioSpec spec = default_spec();
  if (top.has("system")) spec.system = read_system(top.at("system"));
  const std::size_t k = spec.system.num_experts;
  spec.experts = top.has("experts") ? read_experts(top.at("experts")) : default_profiles(k);
  spec.tokens_per_expert.assign(k, 16);
  if (top.has("tokens_per_expert")) {
    const json& arr = array_at(top.at("tokens_per_expert"), "tokens_per_expert");
    spec.tokens_per_expert.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number_unsigned()) {
        Fields::fail(index_name("tokens_per_expert", i), "must be a non-negative integer");
      }
      spec.tokens_per_expert.push_back(arr[i].get<std::size_t>());
    }
  }
  if (top.has("gating")) {
    Fields f(top.at("gating"), "gating",
             {"concentration", "specialist_boost", "rng_seed", "scores"});
    f.number("concentration", spec.gating.concentration);
    f.number("specialist_boost", spec.gating.specialist_boost);
    f.seed("rng_seed", spec.gating.rng_seed);
    if (f.has("scores")) {
      if (spec.tokens_per_expert.size() != k) {
        Fields::fail("tokens_per_expert", "must have num_experts entries");
      }
      spec.injected_gating = read_scores(f.at("scores"), spec.system, spec.tokens_per_expert);
    }
  }
  if (top.has("channel_gains")) spec.channel_gains = read_gains(top.at("channel_gains"), spec.system);
  if (top.has("policy")) {
    Fields f(top.at("policy"), "policy", {"base_threshold", "gamma0", "max_experts", "mode"});
    f.number("base_threshold", spec.policy.base_threshold);
    f.number("gamma0", spec.policy.gamma0);
    f.count("max_experts", spec.policy.max_experts);
    if (f.has("mode")) {
      const json& m = f.at("mode");
      if (m == "geometric") {
        spec.policy.mode = QosMode::kGeometric;
      } else if (m == "homogeneous") {
        spec.policy.mode = QosMode::kHomogeneous;
      } else {
        Fields::fail("policy.mode", "must be \"geometric\" or \"homogeneous\"");
      }
    }
  }
  if (top.has("schemes")) {
    const json& arr = array_at(top.at("schemes"), "schemes");
    spec.schemes.clear();
    for (std::size_t s = 0; s < arr.size(); ++s) {
      const auto parsed = arr[s].is_string()
                              ? parse_scheme(arr[s].get<std::string>())
                              : std::nullopt;
      if (!parsed) Fields::fail(index_name("schemes", s), "is not a scheme label");
      spec.schemes.push_back(*parsed);
    }
  }
  if (top.has("seeds")) {
    const json& arr = array_at(top.at("seeds"), "seeds");
    spec.seeds.clear();
    for (std::size_t s = 0; s < arr.size(); ++s) {
      if (!arr[s].is_number_unsigned()) Fields::fail(index_name("seeds", s), "must be a non-negative integer");
      spec.seeds.push_back(arr[s].get<std::uint64_t>());
    }
  }
  if (top.has("sweep")) {
    Fields f(top.at("sweep"), "sweep", {"gamma0", "k"});
    if (f.has("gamma0")) {
      const json& arr = array_at(f.at("gamma0"), "sweep.gamma0");
      spec.sweep.gamma0.clear();
      for (std::size_t s = 0; s < arr.size(); ++s) {
        spec.sweep.gamma0.push_back(number_at(arr[s], index_name("sweep.gamma0", s)));
      }
    }
    if (f.has("k")) {
      const json& arr = array_at(f.at("k"), "sweep.k");
      spec.sweep.k.clear();
      for (std::size_t s = 0; s < arr.size(); ++s) {
        if (!arr[s].is_number_unsigned()) Fields::fail(index_name("sweep.k", s), "must be a positive integer");
        spec.sweep.k.push_back(arr[s].get<std::size_t>());
      }
    }
  }
  top.flag("oracle", spec.oracle);
  top.count("max_iterations", spec.max_iterations);
  validate_spec(spec);
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const ScenarioSpec& spec) {
  const SystemConfig& c = spec.system;
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["system"] = {{"num_experts", c.num_experts},
                   {"num_subcarriers", c.num_subcarriers},
                   {"num_layers", c.num_layers},
                   {"subcarrier_bandwidth", c.subcarrier_bandwidth},
                   {"tx_power", c.tx_power},
                   {"noise_power", c.noise_power},
                   {"hidden_state_bits", c.hidden_state_bits},
                   {"mean_path_loss", c.mean_path_loss}};
  doc["experts"] = json::array();
  for (const auto& p : spec.experts) {
    doc["experts"].push_back({{"comp_energy_per_token", p.comp_energy_per_token},
                              {"comp_energy_offset", p.comp_energy_offset}});
  }
  doc["tokens_per_expert"] = spec.tokens_per_expert;
  doc["gating"] = {{"concentration", spec.gating.concentration},
                   {"specialist_boost", spec.gating.specialist_boost},
                   {"rng_seed", spec.gating.rng_seed}};
  if (spec.injected_gating) {
    const GatingTensor& g = *spec.injected_gating;
    json layers = json::array();
    for (std::size_t l = 1; l <= g.num_layers(); ++l) {
      json sources = json::array();
      for (std::size_t i = 0; i < g.num_experts(); ++i) {
        json toks = json::array();
        for (std::size_t n = 0; n < g.tokens_per_expert()[i]; ++n) {
          const auto s = g.scores(l, i, n);
          toks.push_back(std::vector<double>(s.begin(), s.end()));
        }
        sources.push_back(std::move(toks));
      }
      layers.push_back(std::move(sources));
    }
    doc["gating"]["scores"] = std::move(layers);
  }
  if (spec.channel_gains) {
    const Array3<double>& h = *spec.channel_gains;
    json rows = json::array();
    for (std::size_t a = 0; a < h.extent0(); ++a) {
      json cols = json::array();
      for (std::size_t b = 0; b < h.extent1(); ++b) {
        const auto r = h.row(a, b);
        cols.push_back(std::vector<double>(r.begin(), r.end()));
      }
      rows.push_back(std::move(cols));
    }
    doc["channel_gains"] = std::move(rows);
  }
  doc["policy"] = {{"base_threshold", spec.policy.base_threshold},
                   {"gamma0", spec.policy.gamma0},
                   {"max_experts", spec.policy.max_experts},
                   {"mode", spec.policy.mode == QosMode::kGeometric ? "geometric" : "homogeneous"}};
  doc["schemes"] = scheme_list(spec.schemes);
  doc["seeds"] = spec.seeds;
  doc["sweep"] = {{"gamma0", spec.sweep.gamma0}, {"k", spec.sweep.k}};
  doc["oracle"] = spec.oracle;
  doc["max_iterations"] = spec.max_iterations;
  return doc.dump(2) + "\n";
}

void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << dump_scenario(spec);
  if (!out) throw Error("cannot write scenario " + path.string());
}

}  // namespace dmoe
