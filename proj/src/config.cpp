#include "clv/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "clv/error.hpp"

namespace clv {

namespace {

using json = nlohmann::json;

[[noreturn]] void field_error(const std::string& path, const std::string& msg) {
  throw ConfigError("field '" + path + "': " + msg);
}

// Typed access to one JSON object that remembers which keys were read, so
// unknown (usually misspelled) keys can be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) field_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) {
    if (!has(key)) field_error(path(key), "missing required field");
    return j_.at(key);
  }

  template <typename T>
  T require(const std::string& key) {
    return convert<T>(raw(key), path(key));
  }

  template <typename T>
  T optional(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return convert<T>(j_.at(key), path(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) field_error(path(key), "unknown field");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) field_error(path, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) field_error(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) field_error(path, "expected a number");
      return v.get<T>();
    } else {
      if (!v.is_number_integer()) field_error(path, "expected an integer");
      if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
      const auto s = v.get<std::int64_t>();
      if (s < 0) field_error(path, "must be non-negative");
      return static_cast<T>(s);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T>
std::vector<T> read_array(const json& v, const std::string& path) {
  if (!v.is_array()) field_error(path, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(ObjectReader::convert<T>(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

SamplerMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "batch" || s == "active") return SamplerMode::Batch;
  if (s == "sequential") return SamplerMode::Sequential;
  if (s == "passive") return SamplerMode::Passive;
  field_error(path, "unknown sampler mode '" + s + "' (batch, sequential, passive)");
}

mtl::IntervalReading parse_reading(const std::string& s, const std::string& path) {
  if (s == "simultaneous") return mtl::IntervalReading::Simultaneous;
  if (s == "literal") return mtl::IntervalReading::Literal;
  field_error(path, "unknown interval reading '" + s + "' (simultaneous, literal)");
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigError("syntax error at line " + std::to_string(line_of(text, at)) + ": " + e.what());
  }

  ExperimentConfig cfg;
  ObjectReader r(root, "");
  cfg.name = r.optional<std::string>("name", cfg.name);
  cfg.system = r.require<std::string>("system");
  cfg.formula = r.require<std::string>("formula");
  if (r.has("reading")) {
    cfg.reading = parse_reading(r.require<std::string>("reading"), "reading");
  }

  if (r.has("plant")) {
    ObjectReader pl(r.raw("plant"), "plant");
    if (pl.has("lyapunov")) {
      const auto basis = pl.require<std::string>("lyapunov");
      if (basis == "nominal") {
        cfg.gains.lyapunov_reference = false;
      } else if (basis == "reference") {
        cfg.gains.lyapunov_reference = true;
      } else {
        field_error("plant.lyapunov", "expected 'nominal' or 'reference'");
      }
    }
    cfg.gains.cancel_nominal = pl.optional<bool>("cancel_nominal", cfg.gains.cancel_nominal);
    pl.finish();
  }

  {
    ObjectReader g(r.raw("grid"), "grid");
    const auto mins = read_array<double>(g.raw("min"), "grid.min");
    const auto maxs = read_array<double>(g.raw("max"), "grid.max");
    const auto counts = read_array<std::size_t>(g.raw("count"), "grid.count");
    if (mins.size() != maxs.size() || mins.size() != counts.size()) {
      field_error("grid", "min, max and count must have the same length");
    }
    for (std::size_t d = 0; d < mins.size(); ++d) cfg.grid.axes.push_back({mins[d], maxs[d], counts[d]});
    g.finish();
  }

  // Horizon defaults follow the system: 30 s for vdp, 40 s for the MRAC cases.
  cfg.integrator.t_final = cfg.system == "vdp" ? 30.0 : 40.0;
  if (r.has("integrator")) {
    ObjectReader in(r.raw("integrator"), "integrator");
    cfg.integrator.step_h = in.optional<double>("step", cfg.integrator.step_h);
    cfg.integrator.t_final = in.optional<double>("t_final", cfg.integrator.t_final);
    cfg.integrator.divergence_radius =
        in.optional<double>("divergence_radius", cfg.integrator.divergence_radius);
    in.finish();
  }

  if (r.has("sampler")) {
    ObjectReader s(r.raw("sampler"), "sampler");
    if (s.has("mode")) cfg.sampler.mode = parse_mode(s.require<std::string>("mode"), "sampler.mode");
    cfg.sampler.batch_size = s.optional<std::size_t>("batch_size", cfg.sampler.batch_size);
    cfg.sampler.lambda = s.optional<double>("lambda", cfg.sampler.lambda);
    cfg.sampler.total = s.optional<std::size_t>("total", cfg.sampler.total);
    cfg.sampler.initial = s.optional<std::size_t>("initial", cfg.sampler.initial);
    s.finish();
  }

  if (r.has("svm")) {
    ObjectReader s(r.raw("svm"), "svm");
    cfg.svm.gamma = s.optional<double>("gamma", cfg.svm.gamma);
    cfg.svm.cost.c_fn = s.optional<double>("c_fn", cfg.svm.cost.c_fn);
    cfg.svm.cost.c_fp = s.optional<double>("c_fp", cfg.svm.cost.c_fp);
    cfg.svm.equality_constraint = s.optional<bool>("equality_constraint", cfg.svm.equality_constraint);
    cfg.svm.eps_kkt = s.optional<double>("eps_kkt", cfg.svm.eps_kkt);
    s.finish();
  }

  cfg.seed = r.optional<std::uint64_t>("seed", cfg.seed);
  cfg.replicates = r.optional<std::size_t>("replicates", cfg.replicates);
  cfg.output = r.optional<std::string>("output", cfg.output);
  cfg.cache_dir = r.optional<std::string>("cache_dir", cfg.cache_dir);
  cfg.jobs = r.optional<std::size_t>("jobs", cfg.jobs);

  if (r.has("estimators")) {
    ObjectReader e(r.raw("estimators"), "estimators");
    cfg.estimators.kfold = e.optional<bool>("kfold", cfg.estimators.kfold);
    cfg.estimators.k = e.optional<std::size_t>("k", cfg.estimators.k);
    cfg.estimators.validation = e.optional<bool>("validation", cfg.estimators.validation);
    e.finish();
  }

  if (r.has("post_costs")) {
    const json& arr = r.raw("post_costs");
    if (!arr.is_array()) field_error("post_costs", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader c(arr[i], "post_costs[" + std::to_string(i) + "]");
      cfg.post_costs.push_back({c.require<double>("c_fn"), c.require<double>("c_fp")});
      c.finish();
    }
  }
  r.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    ExperimentConfig cfg = parse_config(text);
    // Default the name to the file stem when the config gives none.
    if (json::parse(text, nullptr, false, true).count("name") == 0) cfg.name = path.stem().string();
    return cfg;
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  j["system"] = cfg.system;
  j["formula"] = cfg.formula;
  j["reading"] = cfg.reading == mtl::IntervalReading::Simultaneous ? "simultaneous" : "literal";
  j["plant"] = {{"lyapunov", cfg.gains.lyapunov_reference ? "reference" : "nominal"},
                {"cancel_nominal", cfg.gains.cancel_nominal}};
  nlohmann::ordered_json mins = nlohmann::ordered_json::array(), maxs = mins, counts = mins;
  for (const auto& a : cfg.grid.axes) {
    mins.push_back(a.min);
    maxs.push_back(a.max);
    counts.push_back(a.count);
  }
  j["grid"] = {{"min", mins}, {"max", maxs}, {"count", counts}};
  j["integrator"] = {{"step", cfg.integrator.step_h},
                     {"t_final", cfg.integrator.t_final},
                     {"divergence_radius", cfg.integrator.divergence_radius}};
  j["sampler"] = {{"mode", to_string(cfg.sampler.mode)},
                  {"batch_size", cfg.sampler.batch_size},
                  {"lambda", cfg.sampler.lambda},
                  {"total", cfg.sampler.total},
                  {"initial", cfg.sampler.initial}};
  j["svm"] = {{"gamma", cfg.svm.gamma},
              {"c_fn", cfg.svm.cost.c_fn},
              {"c_fp", cfg.svm.cost.c_fp},
              {"equality_constraint", cfg.svm.equality_constraint},
              {"eps_kkt", cfg.svm.eps_kkt}};
  j["seed"] = cfg.seed;
  j["replicates"] = cfg.replicates;
  j["output"] = cfg.output;
  j["cache_dir"] = cfg.cache_dir;
  j["jobs"] = cfg.jobs;
  j["estimators"] = {{"kfold", cfg.estimators.kfold},
                     {"k", cfg.estimators.k},
                     {"validation", cfg.estimators.validation}};
  nlohmann::ordered_json costs = nlohmann::ordered_json::array();
  for (const auto& c : cfg.post_costs) costs.push_back({{"c_fn", c.c_fn}, {"c_fp", c.c_fp}});
  j["post_costs"] = costs;
  return j.dump(2);
}

}  // namespace clv
