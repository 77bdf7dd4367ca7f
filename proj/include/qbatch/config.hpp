#pragma once

// Run configuration: JSON file, schema version 1. See docs/config.md.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qbatch/baselines.hpp"
#include "qbatch/common.hpp"
#include "qbatch/fqi.hpp"
#include "qbatch/io.hpp"
#include "qbatch/models/batch_ab.hpp"
#include "qbatch/models/fed_batch.hpp"
#include "qbatch/models/semi_batch.hpp"
#include "qbatch/scenario.hpp"

namespace qbatch {

using json = nlohmann::ordered_json;

inline constexpr int config_schema_version = 1;

class NotFoundError : public IoError {
 public:
  using IoError::IoError;
};

using AnyModel = std::variant<BatchABModel, FedBatchModel, SemiBatchModel>;

struct BaselineSettings {
  IdpConfig idp;
  CvpConfig cvp;
  std::size_t constant_levels = 101;
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  AnyModel model = BatchABModel{};
  std::size_t substeps_per_stage = 20;
  std::size_t n_episodes = 40;
  InitRegion init_region;           // empty means the model default
  std::vector<double> action_grid;  // empty means the model default
  std::optional<EngineMode> mode;   // unset means the model default
  std::size_t n_iterations = 30;
  double lambda = 1e-3;
  BaselineSettings baselines;
  std::vector<Disturbance> scenarios;
  std::string output_dir = "runs";
};

inline std::string model_kind(const AnyModel& m) {
  return std::visit([](const auto& x) { return std::string(std::decay_t<decltype(x)>::kind); }, m);
}

/// Terminal-yield models carry no clock in their state, so they learn one Q
/// per stage. The semi-batch state includes elapsed time and uses one
/// stationary Q.
inline EngineMode default_mode(const AnyModel& m) {
  return std::holds_alternative<SemiBatchModel>(m) ? EngineMode::stationary : EngineMode::finite_horizon;
}

/// Fills every defaulted field from the model so the config is fully explicit.
inline void resolve(RunConfig& cfg) {
  std::visit(
      [&](const auto& m) {
        m.validate();
        if (cfg.init_region.empty()) cfg.init_region = m.default_init_region();
        if (cfg.action_grid.empty()) cfg.action_grid = m.default_action_grid();
      },
      cfg.model);
  if (!cfg.mode) cfg.mode = default_mode(cfg.model);
}

inline SamplingConfig sampling_config(const RunConfig& cfg, std::size_t n_stages) {
  SamplingConfig s;
  s.n_episodes = cfg.n_episodes;
  s.n_stages = n_stages;
  s.seed = cfg.seed;
  s.init_region = cfg.init_region;
  s.action_grid = cfg.action_grid;
  return s;
}

inline EngineConfig engine_config(const RunConfig& cfg) {
  EngineConfig e;
  e.n_iterations = cfg.n_iterations;
  e.mode = cfg.mode.value_or(default_mode(cfg.model));
  e.lambda = cfg.lambda;
  return e;
}

inline const Disturbance& find_scenario(const RunConfig& cfg, const std::string& name) {
  for (const auto& d : cfg.scenarios)
    if (d.name == name) return d;
  std::string known;
  for (const auto& d : cfg.scenarios) known += (known.empty() ? "" : ", ") + d.name;
  throw ConfigError("no scenario named '" + name + "' (known: " + (known.empty() ? "none" : known) + ")");
}

// ---------------------------------------------------------------------------
// JSON reading

namespace detail {

/// Typed access into a JSON object with full key paths in error messages and
/// a record of which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  bool contains(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.at(key), sub(key));
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(sub(key) + ": wrong type (" + j_.at(key).dump() + ")");
    }
  }

  void get_size(const std::string& key, std::size_t& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(sub(key) + ": expected a non-negative integer, got " + v.dump());
    out = v.get<std::size_t>();
  }

  void reject_unknown() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key " + sub(k));
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <std::size_t N>
void get_array(Reader& r, const std::string& key, std::array<double, N>& out) {
  std::vector<double> v;
  r.get(key, v);
  if (v.size() != N)
    throw ConfigError(r.sub(key) + ": expected " + std::to_string(N) + " values, got " + std::to_string(v.size()));
  std::copy(v.begin(), v.end(), out.begin());
}

inline BatchABModel read_batch_ab(Reader p) {
  BatchABModel m;
  p.get("T_min", m.T_min);
  p.get("T_max", m.T_max);
  p.get("t_f", m.t_f);
  p.get_size("n_stages", m.stages);
  p.get("k_a", m.k_a);
  p.get("E_a", m.E_a);
  p.get("k_b", m.k_b);
  p.get("E_b", m.E_b);
  if (p.has("x0")) get_array(p, "x0", m.x0);
  p.reject_unknown();
  return m;
}

inline FedBatchModel read_fed_batch(Reader p) {
  FedBatchModel m;
  auto& q = m.params;
  p.get("k1", q.k1);
  p.get("k2", q.k2);
  p.get("b_feed", q.b_feed);
  p.get("u_min", q.u_min);
  p.get("u_max", q.u_max);
  p.get("V_max", q.V_max);
  p.get("t_f", q.t_f);
  p.get_size("n_stages", q.n_stages);
  if (p.has("initial")) get_array(p, "initial", q.initial);
  p.get("sourced", q.sourced);
  p.get("source_note", q.source_note);
  p.reject_unknown();
  return m;
}

inline SemiBatchModel read_semi_batch(Reader p) {
  SemiBatchModel m;
  auto& q = m.params;
  p.get("k", q.k);
  p.get("cB_in", q.cB_in);
  p.get("cA0", q.cA0);
  p.get("cB0", q.cB0);
  p.get("cC0", q.cC0);
  p.get("V0", q.V0);
  p.get("V_max", q.V_max);
  p.get("u_max", q.u_max);
  p.get("target_cC", q.target_cC);
  p.get("t_max", q.t_max);
  p.get_size("n_stages", q.n_stages);
  if (p.has("safety")) {
    Reader s = p.child("safety");
    SafetyBlock b;
    s.get("dH", b.dH);
    s.get("rho", b.rho);
    s.get("cp", b.cp);
    s.get("T", b.T);
    s.get("T_max", b.T_max);
    s.reject_unknown();
    q.safety = b;
  } else if (p.contains("safety")) {
    p.raw("safety");  // explicit null: use cB_max directly
    q.safety.reset();
  }
  p.get("cB_max", q.cB_max_value);
  p.reject_unknown();
  return m;
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  using detail::Reader;
  Reader r(j, "");
  int version = 0;
  if (!j.contains("schema_version")) throw ConfigError("missing key schema_version");
  r.get("schema_version", version);
  if (version != config_schema_version)
    throw ConfigError("schema_version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(config_schema_version) + ")");

  RunConfig cfg;
  r.get("name", cfg.name);
  r.get("seed", cfg.seed);
  r.get("output_dir", cfg.output_dir);

  if (!j.contains("model")) throw ConfigError("missing key model");
  Reader m = r.child("model");
  std::string kind;
  if (!m.has("kind")) throw ConfigError("missing key model.kind");
  m.get("kind", kind);
  static const json no_params = json::object();
  Reader params = m.has("params") ? m.child("params") : Reader(no_params, "model.params");
  if (kind == BatchABModel::kind)
    cfg.model = detail::read_batch_ab(params);
  else if (kind == FedBatchModel::kind)
    cfg.model = detail::read_fed_batch(params);
  else if (kind == SemiBatchModel::kind)
    cfg.model = detail::read_semi_batch(params);
  else
    throw ConfigError("model.kind: unknown model '" + kind + "' (expected batch_ab, fed_batch or semi_batch)");
  m.reject_unknown();

  if (r.has("integrator")) {
    Reader s = r.child("integrator");
    s.get_size("substeps_per_stage", cfg.substeps_per_stage);
    s.reject_unknown();
  }

  if (r.has("sampling")) {
    Reader s = r.child("sampling");
    s.get_size("n_episodes", cfg.n_episodes);
    s.get("action_grid", cfg.action_grid);
    if (s.has("init_region")) {
      std::vector<std::array<double, 2>> boxes;
      s.get("init_region", boxes);
      for (const auto& b : boxes) cfg.init_region.push_back({b[0], b[1]});
    }
    s.reject_unknown();
  }

  if (r.has("engine")) {
    Reader s = r.child("engine");
    if (s.has("mode")) {
      std::string mode;
      s.get("mode", mode);
      try {
        cfg.mode = engine_mode_from(mode);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("engine.mode: ") + e.what());
      }
    }
    s.get_size("n_iterations", cfg.n_iterations);
    s.get("lambda", cfg.lambda);
    s.reject_unknown();
  }

  if (r.has("baselines")) {
    Reader b = r.child("baselines");
    if (b.has("idp")) {
      Reader s = b.child("idp");
      s.get_size("candidates_per_stage", cfg.baselines.idp.candidates_per_stage);
      s.get_size("passes", cfg.baselines.idp.passes);
      s.get("contraction", cfg.baselines.idp.contraction);
      s.get("first_pass_grid", cfg.baselines.idp.first_pass_grid);
      s.reject_unknown();
    }
    if (b.has("cvp")) {
      Reader s = b.child("cvp");
      s.get_size("restarts", cfg.baselines.cvp.restarts);
      s.get("tolerance", cfg.baselines.cvp.tolerance);
      s.get_size("max_evaluations", cfg.baselines.cvp.max_evaluations);
      s.reject_unknown();
    }
    b.get_size("constant_levels", cfg.baselines.constant_levels);
    b.reject_unknown();
  }

  if (r.has("scenarios")) {
    const json& list = r.raw("scenarios");
    if (!list.is_array()) throw ConfigError("scenarios must be an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
      Reader s(list[i], "scenarios[" + std::to_string(i) + "]");
      Disturbance d;
      if (!s.has("name") || !s.has("window") || !s.has("forced_value"))
        throw ConfigError(s.where() + " needs name, window and forced_value");
      s.get("name", d.name);
      std::array<double, 2> w{};
      s.get("window", w);
      d.t_start = w[0];
      d.t_end = w[1];
      s.get("forced_value", d.forced_value);
      s.reject_unknown();
      if (d.name.empty() || d.name.find_first_of("/\\ ,") != std::string::npos)
        throw ConfigError(s.sub("name") + ": must be non-empty without spaces, commas or slashes");
      if (!names.insert(d.name).second) throw ConfigError("duplicate scenario name '" + d.name + "'");
      cfg.scenarios.push_back(d);
    }
  }
  r.reject_unknown();

  if (cfg.substeps_per_stage < 1) throw ConfigError("integrator.substeps_per_stage must be >= 1");
  if (cfg.baselines.constant_levels < 2) throw ConfigError("baselines.constant_levels must be >= 2");
  resolve(cfg);
  engine_config(cfg).validate();
  cfg.baselines.idp.validate();
  cfg.baselines.cvp.validate();
  std::visit(
      [&](const auto& model) {
        const auto sc = sampling_config(cfg, model.n_stages());
        sc.validate();
        check_region(cfg.init_region, model.dimension, std::string(model.kind));
        const IntegratorConfig ic{cfg.substeps_per_stage, model.stage_duration()};
        for (const auto& d : cfg.scenarios) {
          try {
            (void)snap_window(d, ic.stage_duration, model.n_stages());
          } catch (const ConfigError& e) {
            throw ConfigError(std::string("scenarios: ") + e.what());
          }
        }
      },
      cfg.model);
  return cfg;
}

// ---------------------------------------------------------------------------
// JSON writing

inline json model_params_json(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        json p;
        if constexpr (std::is_same_v<T, BatchABModel>) {
          p["T_min"] = m.T_min;
          p["T_max"] = m.T_max;
          p["t_f"] = m.t_f;
          p["n_stages"] = m.stages;
          p["k_a"] = m.k_a;
          p["E_a"] = m.E_a;
          p["k_b"] = m.k_b;
          p["E_b"] = m.E_b;
          p["x0"] = m.x0;
        } else if constexpr (std::is_same_v<T, FedBatchModel>) {
          const auto& q = m.params;
          p["k1"] = q.k1;
          p["k2"] = q.k2;
          p["b_feed"] = q.b_feed;
          p["u_min"] = q.u_min;
          p["u_max"] = q.u_max;
          p["V_max"] = q.V_max;
          p["t_f"] = q.t_f;
          p["n_stages"] = q.n_stages;
          p["initial"] = q.initial;
          p["sourced"] = q.sourced;
          p["source_note"] = q.source_note;
        } else {
          const auto& q = m.params;
          p["k"] = q.k;
          p["cB_in"] = q.cB_in;
          p["cA0"] = q.cA0;
          p["cB0"] = q.cB0;
          p["cC0"] = q.cC0;
          p["V0"] = q.V0;
          p["V_max"] = q.V_max;
          p["u_max"] = q.u_max;
          p["target_cC"] = q.target_cC;
          p["t_max"] = q.t_max;
          p["n_stages"] = q.n_stages;
          if (q.safety) {
            p["safety"] = {{"dH", q.safety->dH}, {"rho", q.safety->rho}, {"cp", q.safety->cp},
                           {"T", q.safety->T},   {"T_max", q.safety->T_max}};
          } else {
            p["safety"] = nullptr;
          }
          p["cB_max"] = q.cB_max_value;
        }
        return p;
      },
      model);
}

inline json config_to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = config_schema_version;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["model"] = {{"kind", model_kind(cfg.model)}, {"params", model_params_json(cfg.model)}};
  j["integrator"] = {{"substeps_per_stage", cfg.substeps_per_stage}};
  json region = json::array();
  for (const auto& iv : cfg.init_region) region.push_back({iv.lo, iv.hi});
  j["sampling"] = {{"n_episodes", cfg.n_episodes}, {"init_region", region}, {"action_grid", cfg.action_grid}};
  j["engine"] = {{"mode", to_string(cfg.mode.value_or(default_mode(cfg.model)))},
                 {"n_iterations", cfg.n_iterations},
                 {"lambda", cfg.lambda}};
  const auto& b = cfg.baselines;
  j["baselines"] = {{"idp",
                     {{"candidates_per_stage", b.idp.candidates_per_stage},
                      {"passes", b.idp.passes},
                      {"contraction", b.idp.contraction},
                      {"first_pass_grid", b.idp.first_pass_grid}}},
                    {"cvp",
                     {{"restarts", b.cvp.restarts},
                      {"tolerance", b.cvp.tolerance},
                      {"max_evaluations", b.cvp.max_evaluations}}},
                    {"constant_levels", b.constant_levels}};
  json sc = json::array();
  for (const auto& d : cfg.scenarios)
    sc.push_back({{"name", d.name}, {"window", {d.t_start, d.t_end}}, {"forced_value", d.forced_value}});
  j["scenarios"] = sc;
  return j;
}

inline std::string config_text(const RunConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

/// Hash over the resolved config minus the output directory, which does not
/// affect results.
inline std::string config_hash(const RunConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output_dir");
  return to_hex(fnv1a64(j.dump()));
}

inline RunConfig config_from_text(const std::string& text, const std::string& origin = "config") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("config file not found: " + path.string());
  return config_from_text(read_text_file(path), path.string());
}

}  // namespace qbatch
