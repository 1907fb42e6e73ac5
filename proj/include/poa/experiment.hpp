#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "poa/algorithms.hpp"
#include "poa/factories.hpp"
#include "poa/format.hpp"
#include "poa/hypotest.hpp"
#include "poa/metrics.hpp"

namespace poa {

using json = nlohmann::json;

/// Invalid configuration; the message names the offending field or position.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SweepConfig {
  std::string name;
  std::optional<MetaClass> meta;  ///< derived from the instance tags when absent
  std::vector<std::string> instances;
};

struct HypotestConfig {
  std::vector<double> p = {0.05, 0.1, 0.25, 0.5};
  std::vector<long long> T = {1, 2, 4, 8, 16};
  long long search_n = 32;
  long long search_T = 64;
  std::vector<SearchPolicy> policies = {SearchPolicy::Bisection, SearchPolicy::FixedGrid, SearchPolicy::Random};
  long long search_trials = 100000;
};

struct ExperimentConfig {
  std::string experiment = "experiment";
  std::string mode = "poa";  ///< "poa" or "hypotest"
  ErrorKind metric = ErrorKind::expected();
  std::vector<long long> T;
  long long trials = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string output_dir;
  std::vector<std::string> algorithms;
  std::vector<SweepConfig> sweeps;
  HypotestConfig hypotest;
};

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

inline double json_number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return SpecString::parse_number(j.get<std::string>(), path);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("field '") + path + "': " + e.what());
    }
  }
  throw ConfigError("field '" + path + "': expected a number");
}

inline long long json_integer(const json& j, const std::string& path, long long lo) {
  long long v = 0;
  if (j.is_number_integer()) {
    v = j.get<long long>();
  } else {
    const double d = json_number(j, path);
    if (d != std::floor(d) || std::abs(d) > 9e15) throw ConfigError("field '" + path + "': expected an integer");
    v = static_cast<long long>(d);
  }
  if (v < lo) throw ConfigError("field '" + path + "': must be >= " + std::to_string(lo));
  return v;
}

inline std::uint64_t json_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec == std::errc() && r.ptr == s.data() + s.size()) return v;
  }
  throw ConfigError("field '" + path + "': expected an unsigned 64-bit integer");
}

inline std::string json_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError("field '" + path + "': expected a string");
  return j.get<std::string>();
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError("field '" + path + key + "': required");
  return obj.at(key);
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("field '" + path + k + "': unknown field");
  }
}

inline std::string position_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object at top level");
  reject_unknown(j, {"experiment", "mode", "metric", "T", "trials", "seed", "workers", "output_dir", "algorithms", "sweeps",
                     "instances", "meta", "hypotest"},
                 "");
  ExperimentConfig c;
  if (j.contains("experiment")) c.experiment = json_string(j["experiment"], "experiment");
  if (j.contains("mode")) {
    c.mode = json_string(j["mode"], "mode");
    if (c.mode != "poa" && c.mode != "hypotest") throw ConfigError("field 'mode': expected \"poa\" or \"hypotest\"");
  }
  if (j.contains("seed")) c.seed = json_u64(j["seed"], "seed");
  if (j.contains("workers")) c.workers = static_cast<unsigned>(json_integer(j["workers"], "workers", 1));
  if (j.contains("output_dir")) c.output_dir = json_string(j["output_dir"], "output_dir");

  if (c.mode == "hypotest") {
    if (j.contains("hypotest")) {
      const json& h = j["hypotest"];
      if (!h.is_object()) throw ConfigError("field 'hypotest': expected an object");
      reject_unknown(h, {"p", "T", "search"}, "hypotest.");
      if (h.contains("p")) {
        c.hypotest.p.clear();
        for (std::size_t i = 0; i < h["p"].size(); ++i) {
          const std::string path = "hypotest.p[" + std::to_string(i) + "]";
          const double p = json_number(h["p"][i], path);
          if (!(p > 0.0 && p <= 0.5)) throw ConfigError("field '" + path + "': must lie in (0, 1/2]");
          c.hypotest.p.push_back(p);
        }
      }
      if (h.contains("T")) {
        c.hypotest.T.clear();
        for (std::size_t i = 0; i < h["T"].size(); ++i) {
          c.hypotest.T.push_back(json_integer(h["T"][i], "hypotest.T[" + std::to_string(i) + "]", 0));
        }
      }
      if (h.contains("search")) {
        const json& s = h["search"];
        reject_unknown(s, {"n", "T", "policies", "trials"}, "hypotest.search.");
        if (s.contains("n")) c.hypotest.search_n = json_integer(s["n"], "hypotest.search.n", 2);
        if (s.contains("T")) c.hypotest.search_T = json_integer(s["T"], "hypotest.search.T", 1);
        if (s.contains("trials")) c.hypotest.search_trials = json_integer(s["trials"], "hypotest.search.trials", 1);
        if (s.contains("policies")) {
          c.hypotest.policies.clear();
          for (std::size_t i = 0; i < s["policies"].size(); ++i) {
            const std::string path = "hypotest.search.policies[" + std::to_string(i) + "]";
            try {
              c.hypotest.policies.push_back(parse_search_policy(json_string(s["policies"][i], path)));
            } catch (const ConfigError&) {
              throw;
            } catch (const std::invalid_argument& e) {
              throw ConfigError("field '" + path + "': " + e.what());
            }
          }
        }
      }
    }
    return c;
  }

  const json& metric = require(j, "metric", "");
  if (!metric.is_object()) throw ConfigError("field 'metric': expected an object");
  reject_unknown(metric, {"kind", "delta"}, "metric.");
  const std::string kind = json_string(require(metric, "kind", "metric."), "metric.kind");
  if (kind == "expected") {
    c.metric = ErrorKind::expected();
  } else if (kind == "quantile") {
    const double d = json_number(require(metric, "delta", "metric."), "metric.delta");
    if (!(d > 0.0 && d < 0.5)) throw ConfigError("field 'metric.delta': must lie in (0, 1/2)");
    c.metric = ErrorKind::quantile(d);
  } else {
    throw ConfigError("field 'metric.kind': expected \"expected\" or \"quantile\"");
  }

  const json& Ts = require(j, "T", "");
  if (Ts.is_array()) {
    if (Ts.empty()) throw ConfigError("field 'T': empty list");
    for (std::size_t i = 0; i < Ts.size(); ++i) c.T.push_back(json_integer(Ts[i], "T[" + std::to_string(i) + "]", 1));
  } else {
    c.T.push_back(json_integer(Ts, "T", 1));
  }
  c.trials = json_integer(require(j, "trials", ""), "trials", 1);

  const json& algs = require(j, "algorithms", "");
  if (!algs.is_array() || algs.empty()) throw ConfigError("field 'algorithms': expected a non-empty list");
  for (std::size_t i = 0; i < algs.size(); ++i) {
    const std::string path = "algorithms[" + std::to_string(i) + "]";
    c.algorithms.push_back(json_string(algs[i], path));
    try {
      (void)make_algorithm(c.algorithms.back());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("field '" + path + "': " + e.what());
    }
  }

  auto parse_meta = [](const json& m, const std::string& path) {
    if (!m.is_object()) throw ConfigError("field '" + path + "': expected an object");
    reject_unknown(m, {"kind", "ell", "rho", "l_lo", "r_lo"}, path + ".");
    MetaClass meta;
    try {
      meta.kind = parse_class_kind(json_string(require(m, "kind", path + "."), path + ".kind"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError("field '" + path + ".kind': " + e.what());
    }
    meta.ell = json_number(require(m, "ell", path + "."), path + ".ell");
    meta.rho = json_number(require(m, "rho", path + "."), path + ".rho");
    if (m.contains("l_lo")) meta.l_lo = json_number(m["l_lo"], path + ".l_lo");
    if (m.contains("r_lo")) meta.r_lo = json_number(m["r_lo"], path + ".r_lo");
    if (!(meta.l_lo > 0 && meta.l_lo <= meta.ell)) throw ConfigError("field '" + path + "': need 0 < l_lo <= ell");
    if (!(meta.r_lo > 0 && meta.r_lo <= meta.rho)) throw ConfigError("field '" + path + "': need 0 < r_lo <= rho");
    return meta;
  };
  auto parse_instances = [](const json& list, const std::string& path) {
    if (!list.is_array() || list.empty()) throw ConfigError("field '" + path + "': expected a non-empty list");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < list.size(); ++i) out.push_back(json_string(list[i], path + "[" + std::to_string(i) + "]"));
    return out;
  };

  if (j.contains("sweeps")) {
    if (j.contains("instances")) throw ConfigError("field 'instances': give either 'sweeps' or top-level 'instances'");
    const json& sw = j["sweeps"];
    if (!sw.is_array() || sw.empty()) throw ConfigError("field 'sweeps': expected a non-empty list");
    for (std::size_t i = 0; i < sw.size(); ++i) {
      const std::string path = "sweeps[" + std::to_string(i) + "]";
      if (!sw[i].is_object()) throw ConfigError("field '" + path + "': expected an object");
      reject_unknown(sw[i], {"name", "meta", "instances"}, path + ".");
      SweepConfig s;
      s.name = sw[i].contains("name") ? json_string(sw[i]["name"], path + ".name") : "sweep" + std::to_string(i);
      if (sw[i].contains("meta")) s.meta = parse_meta(sw[i]["meta"], path + ".meta");
      s.instances = parse_instances(require(sw[i], "instances", path + "."), path + ".instances");
      c.sweeps.push_back(std::move(s));
    }
  } else {
    SweepConfig s;
    s.name = "main";
    if (j.contains("meta")) s.meta = parse_meta(j["meta"], "meta");
    s.instances = parse_instances(require(j, "instances", ""), "instances");
    c.sweeps.push_back(std::move(s));
  }

  // Every instance must build at every horizon.
  for (std::size_t i = 0; i < c.sweeps.size(); ++i) {
    for (std::size_t k = 0; k < c.sweeps[i].instances.size(); ++k) {
      const std::string path = "sweeps[" + std::to_string(i) + "].instances[" + std::to_string(k) + "]";
      for (long long T : c.T) {
        try {
          const Instance inst = make_instance(c.sweeps[i].instances[k], T);
          if (c.sweeps[i].meta && !c.sweeps[i].meta->contains(inst.class_tag())) {
            throw ConfigError("field '" + path + "': instance " + inst.id() + " lies outside the meta-class");
          }
        } catch (const ConfigError&) {
          throw;
        } catch (const std::invalid_argument& e) {
          throw ConfigError("field '" + path + "': " + e.what());
        }
      }
    }
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config syntax error at " + detail::position_of(text, e.byte) + ": " + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Built-in recipes.

inline std::vector<std::pair<std::string, std::string>> recipe_list() {
  return {{"thm41_sweep", "coin-bias pairs over rho in {e^2, e^4, e^8}; expected error; SGD tuned at (1,1) vs trivial"},
          {"thm42_sweep", "noisy-binary-search families over rho in {e^4, e^8, e^16}; expected error"},
          {"thm43_sweep", "rare-event pairs at ell = rho = 16, delta = 0.05; 0.95-quantile error; all built-ins"},
          {"thmB1_clipped", "clipped SGD on the heavy-tailed rare-event instance, T in {1e3, 1e4}; 0.95-quantile"},
          {"lemmaD_verify", "exact enumeration grid for the skewed binary test and noisy binary search simulation"}};
}

inline json builtin_recipe(const std::string& name) {
  if (name == "thm41_sweep") {
    json sweeps = json::array();
    for (int e : {2, 4, 8}) {
      const std::string rho = "e^" + std::to_string(e);
      sweeps.push_back({{"name", "rho=" + rho},
                        {"meta", {{"kind", "Lip"}, {"ell", 1}, {"rho", rho}}},
                        {"instances", {"coin_bias(rho=" + rho + ",v=0)", "coin_bias(rho=" + rho + ",v=1)"}}});
    }
    return {{"experiment", name}, {"metric", {{"kind", "expected"}}}, {"T", {800}}, {"trials", 10000}, {"seed", 41},
            {"algorithms", {"sgd_fixed(L=1,R=1)", "trivial_alg"}}, {"sweeps", sweeps}};
  }
  if (name == "thm42_sweep") {
    json sweeps = json::array();
    for (int e : {4, 8, 16}) {
      const std::string rho = "e^" + std::to_string(e);
      json inst = json::array();
      for (int k = 1; k <= e; ++k) inst.push_back("noisy_binary_search(rho=" + rho + ",k=" + std::to_string(k) + ")");
      sweeps.push_back({{"name", "rho=" + rho}, {"meta", {{"kind", "Lip"}, {"ell", 1}, {"rho", rho}}}, {"instances", inst}});
    }
    return {{"experiment", name}, {"metric", {{"kind", "expected"}}}, {"T", {800}}, {"trials", 2000}, {"seed", 42},
            {"algorithms", {"sgd_fixed(L=1,R=1)", "trivial_alg"}}, {"sweeps", sweeps}};
  }
  if (name == "thm43_sweep") {
    json sweeps = json::array();
    for (const char* kind : {"SM-Lip", "Lip"}) {
      const std::string k = kind;
      sweeps.push_back({{"name", k},
                        {"meta", {{"kind", k}, {"ell", 16}, {"rho", 16}}},
                        {"instances",
                         {"rare_event(ell=16,rho=16,delta=0.05,v=0,kind=" + k + ")",
                          "rare_event(ell=16,rho=16,delta=0.05,v=1,kind=" + k + ")"}}});
    }
    return {{"experiment", name},
            {"metric", {{"kind", "quantile"}, {"delta", 0.05}}},
            {"T", {256}},
            {"trials", 10000},
            {"seed", 43},
            {"algorithms", {"sgd_fixed(L=1,R=1)", "adagrad_norm_sgd(D=16)", "clipped_sgd(L=1,R=1,delta=0.05)", "trivial_alg"}},
            {"sweeps", sweeps}};
  }
  if (name == "thmB1_clipped") {
    return {{"experiment", name},
            {"metric", {{"kind", "quantile"}, {"delta", 0.05}}},
            {"T", {1000, 10000}},
            {"trials", 10000},
            {"seed", 101},
            {"algorithms", {"clipped_sgd(L=10,R=1,delta=0.05)"}},
            {"sweeps",
             {{{"name", "heavy"},
               {"meta", {{"kind", "SM-Lip"}, {"ell", 10}, {"rho", 10}}},
               {"instances", {"rare_event(ell=10,rho=10,delta=0.05,v=1,kind=SM-Lip)"}}}}}};
  }
  if (name == "lemmaD_verify") {
    return {{"experiment", name},
            {"mode", "hypotest"},
            {"seed", 7},
            {"hypotest",
             {{"p", {0.05, 0.1, 0.25, 0.5}},
              {"T", {1, 2, 4, 8, 16}},
              {"search", {{"n", 32}, {"T", 64}, {"policies", {"bisection", "fixed-grid", "random"}}, {"trials", 100000}}}}}};
  }
  throw ConfigError("unknown recipe '" + name + "'");
}

// ---------------------------------------------------------------------------
// Execution.

struct CellResult {
  std::string sweep;
  long long T = 0;
  std::string algorithm;
  PoAReport report;
  bool has_estimates = false;  ///< false when the trial count is below the estimator minimum
  std::vector<std::vector<double>> gaps;
};

struct SearchRow {
  SearchResult result;
  double capacity_bound = 0.0;  ///< exact upper bound on I over all policies
  double fano_floor = 0.0;      ///< Fano floor from the capacity bound
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<EntropyReport> skewed;
  std::vector<SearchRow> search;
  std::vector<std::string> files;
};

struct RunOverrides {
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<long long> trials;
};

/// Worker count: explicit override, then POA_WORKERS, then the config.
inline unsigned resolve_workers(const ExperimentConfig& c, std::optional<unsigned> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("POA_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) throw ConfigError("POA_WORKERS: expected a positive integer");
    return static_cast<unsigned>(v);
  }
  return c.workers;
}

inline void apply_overrides(ExperimentConfig& c, const RunOverrides& o) {
  c.workers = resolve_workers(c, o.workers);
  if (o.seed) c.seed = *o.seed;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.trials) {
    if (*o.trials < 1) throw ConfigError("--trials: must be >= 1");
    c.trials = *o.trials;
    c.hypotest.search_trials = *o.trials;
  }
}

inline constexpr unsigned kMaxWorkers = 1024;
inline constexpr double kMaxOracleCalls = 2e11;
inline constexpr long long kMaxTrials = 100000000;

inline void check_resources(const ExperimentConfig& c) {
  if (c.workers > kMaxWorkers) throw InfeasibleRequest("workers=" + std::to_string(c.workers) + " exceeds " + std::to_string(kMaxWorkers));
  if (c.mode == "hypotest") {
    for (long long T : c.hypotest.T) check_enumerable(skewed_binary_channel(0.5, 0.0, T));
    if (c.hypotest.search_trials > kMaxTrials) throw InfeasibleRequest("search trials exceed the memory budget");
    return;
  }
  if (c.trials > kMaxTrials) throw InfeasibleRequest("trials=" + std::to_string(c.trials) + " exceeds the memory budget");
  double calls = 0.0;
  std::size_t rows = 0;
  for (const auto& s : c.sweeps) rows += s.instances.size();
  for (long long T : c.T) calls += static_cast<double>(T) * static_cast<double>(c.trials) * static_cast<double>(rows) *
                                   static_cast<double>(c.algorithms.size());
  if (calls > kMaxOracleCalls) throw InfeasibleRequest("the experiment needs " + format_g17(calls) + " oracle calls, above the budget");
}

/// Seed of sweep `sweep` at horizon T; rows then use row_seed(., i).
inline std::uint64_t sweep_seed(std::uint64_t seed, long long T, std::size_t sweep) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(T)), sweep);
}

inline MetaClass derive_meta(const std::vector<Instance>& insts) {
  MetaClass m{ClassKind::Lip, 1.0, 1.0, 1.0, 1.0};
  for (const auto& i : insts) {
    if (i.class_tag().kind == ClassKind::SMLip) m.kind = ClassKind::SMLip;
    m.ell = std::max(m.ell, i.class_tag().L);
    m.rho = std::max(m.rho, i.class_tag().R);
    m.l_lo = std::min(m.l_lo, i.class_tag().L);
    m.r_lo = std::min(m.r_lo, i.class_tag().R);
  }
  return m;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline json meta_json(const MetaClass& m) {
  return {{"kind", std::string(to_string(m.kind))}, {"l_lo", m.l_lo}, {"ell", m.ell}, {"r_lo", m.r_lo}, {"rho", m.rho}};
}

inline json metric_json(const ErrorKind& k) {
  json j{{"kind", std::string(to_string(k.metric))}};
  if (k.metric == Metric::Quantile) j["delta"] = k.delta;
  return j;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InfeasibleRequest("cannot write '" + p.string() + "'");
  out << content;
  if (!out) throw InfeasibleRequest("failed writing '" + p.string() + "'");
}

}  // namespace detail

inline json report_json(const CellResult& cell) {
  const PoAReport& r = cell.report;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json jr{{"instance_id", row.instance_id},
            {"class_tag", {{"kind", std::string(to_string(row.tag.kind))}, {"L", row.tag.L}, {"R", row.tag.R}}},
            {"seed", row.seed},
            {"reference", row.reference.value}};
    if (cell.has_estimates) {
      jr["estimate"] = {{"point", row.estimate.point},
                        {"ci_lo", row.estimate.ci_lo},
                        {"ci_hi", row.estimate.ci_hi},
                        {"trimmed_mean", row.estimate.trimmed_mean},
                        {"trials", row.estimate.trials}};
      jr["ratio"] = row.ratio;
      jr["ratio_ci"] = {row.ratio_lo, row.ratio_hi};
      jr["ci_straddles_one"] = row.straddles_one;
    } else {
      jr["estimate"] = nullptr;
      jr["ratio"] = nullptr;
    }
    rows.push_back(jr);
  }
  json j{{"sweep", cell.sweep}, {"algorithm", cell.algorithm}, {"T", cell.T}, {"meta", detail::meta_json(r.meta)},
         {"metric", detail::metric_json(r.kind)}, {"trials", r.trials}, {"seed", r.seed}, {"rows", rows}};
  if (cell.has_estimates) {
    j["poa_estimate"] = r.poa_estimate;
    j["argmax"] = r.argmax;
  } else {
    j["poa_estimate"] = nullptr;
    j["note"] = "trial count below the estimator minimum; per-trial gaps only";
  }
  return j;
}

inline json entropy_json(const EntropyReport& r) {
  return {{"p", r.p}, {"T", r.T}, {"eps", r.eps}, {"H_V", r.H_V}, {"I_exact", r.I_exact}, {"bound_general", r.bound_general},
          {"bound_skewed", r.bound_skewed}, {"bound", r.bound}, {"map_error", r.map_error}, {"fano_floor", r.fano_floor},
          {"threshold_error", r.threshold_error}};
}

inline json search_json(const SearchRow& s) {
  const auto& r = s.result;
  return {{"n", r.n}, {"T", r.T}, {"eps", r.eps}, {"policy", std::string(to_string(r.policy))}, {"trials", r.trials},
          {"map_error", r.error}, {"map_error_ci_half", r.error_ci_half}, {"information_estimate", r.information},
          {"information_ci_half", r.information_ci_half}, {"capacity_bound", s.capacity_bound}, {"fano_floor", s.fano_floor}};
}

inline std::vector<EntropyReport> skewed_grid(const HypotestConfig& h) {
  std::vector<EntropyReport> out;
  for (double p : h.p) {
    for (long long T : h.T) out.push_back(skewed_test_report(p, T));
  }
  return out;
}

inline ExperimentResult run_hypotest(const ExperimentConfig& c) {
  ExperimentResult res;
  res.skewed = skewed_grid(c.hypotest);
  for (std::size_t i = 0; i < c.hypotest.policies.size(); ++i) {
    SearchRow row;
    row.result = noisy_binary_search_error(c.hypotest.search_n, c.hypotest.search_T, c.hypotest.policies[i],
                                           c.hypotest.search_trials, derive_seed(c.seed, i), c.workers);
    row.capacity_bound = channel_capacity_bound(row.result.eps, c.hypotest.search_T);
    row.fano_floor = fano_floor(std::log(static_cast<double>(c.hypotest.search_n)), row.capacity_bound, c.hypotest.search_n);
    res.search.push_back(row);
  }
  if (!c.output_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);
    json j{{"experiment", c.experiment}, {"seed", c.seed}, {"skewed_test", json::array()}, {"noisy_binary_search", json::array()}};
    std::string csv = "p,T,eps,H_V,I_exact,bound,map_error,fano_floor,threshold_error\n";
    for (const auto& r : res.skewed) {
      j["skewed_test"].push_back(entropy_json(r));
      csv += format_g17(r.p) + "," + std::to_string(r.T) + "," + format_g17(r.eps) + "," + format_g17(r.H_V) + "," +
             format_g17(r.I_exact) + "," + format_g17(r.bound) + "," + format_g17(r.map_error) + "," +
             format_g17(r.fano_floor) + "," + format_g17(r.threshold_error) + "\n";
    }
    for (const auto& s : res.search) j["noisy_binary_search"].push_back(search_json(s));
    const fs::path dir(c.output_dir);
    detail::write_file(dir / "hypotest_report.json", j.dump(2) + "\n");
    detail::write_file(dir / "hypotest.csv", csv);
    res.files = {(dir / "hypotest_report.json").string(), (dir / "hypotest.csv").string()};
  }
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  check_resources(c);
  if (c.mode == "hypotest") return run_hypotest(c);

  ExperimentResult res;
  std::vector<AlgorithmSpec> algs;
  for (const auto& a : c.algorithms) algs.push_back(make_algorithm(a));
  bool enough = true;
  try {
    check_trial_count(c.trials, c.metric);
  } catch (const std::invalid_argument&) {
    enough = false;
  }

  for (long long T : c.T) {
    for (std::size_t si = 0; si < c.sweeps.size(); ++si) {
      const SweepConfig& sw = c.sweeps[si];
      std::vector<Instance> insts;
      for (const auto& spec : sw.instances) insts.push_back(make_instance(spec, T));
      const MetaClass meta = sw.meta ? *sw.meta : derive_meta(insts);
      const std::uint64_t seed = sweep_seed(c.seed, T, si);
      for (const auto& alg : algs) {
        CellResult cell{sw.name, T, alg.name, {}, enough, {}};
        if (enough) {
          cell.report = poa_sweep(meta, alg, T, c.metric, insts, c.trials, seed, c.workers, &cell.gaps);
        } else {
          cell.report = PoAReport{alg.name, meta, T, c.metric, c.trials, seed, {}, 0.0, 0};
          for (std::size_t i = 0; i < insts.size(); ++i) {
            const std::uint64_t rs = row_seed(seed, i);
            cell.gaps.push_back(run_trials(insts[i], alg, T, c.trials, rs, c.workers));
            PoARow row{insts[i].id(), insts[i].class_tag(), {}, reference_rate(insts[i].class_tag(), T, c.metric),
                       0.0, 0.0, 0.0, false, rs};
            row.estimate.kind = c.metric;
            cell.report.rows.push_back(row);
          }
        }
        res.cells.push_back(std::move(cell));
      }
    }
  }

  if (!c.output_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output_dir);
    const fs::path dir(c.output_dir);
    std::string trials = "instance_id,class_kind,L,R,T,algorithm,trial,seed,gap\n";
    std::string estimates =
        "sweep,instance_id,class_kind,L,R,T,algorithm,metric,delta,trials,seed,point,ci_lo,ci_hi,trimmed_mean,reference,"
        "ratio,ratio_lo,ratio_hi,ci_straddles_one\n";
    json reports = json::array();
    for (const auto& cell : res.cells) {
      for (std::size_t i = 0; i < cell.report.rows.size(); ++i) {
        const PoARow& row = cell.report.rows[i];
        const std::string prefix = detail::csv_field(row.instance_id) + "," + std::string(to_string(row.tag.kind)) + "," +
                                   format_g17(row.tag.L) + "," + format_g17(row.tag.R) + "," + std::to_string(cell.T) +
                                   "," + detail::csv_field(cell.algorithm) + ",";
        for (std::size_t t = 0; t < cell.gaps[i].size(); ++t) {
          trials += prefix + std::to_string(t) + "," + std::to_string(derive_seed(row.seed, t)) + "," +
                    format_g17(cell.gaps[i][t]) + "\n";
        }
        if (cell.has_estimates) {
          const auto& e = row.estimate;
          estimates += detail::csv_field(cell.sweep) + "," + detail::csv_field(row.instance_id) + "," +
                       std::string(to_string(row.tag.kind)) + "," + format_g17(row.tag.L) + "," + format_g17(row.tag.R) +
                       "," + std::to_string(cell.T) + "," + detail::csv_field(cell.algorithm) + "," +
                       std::string(to_string(e.kind.metric)) + "," + format_g17(e.kind.delta) + "," +
                       std::to_string(e.trials) + "," + std::to_string(row.seed) + "," + format_g17(e.point) + "," +
                       format_g17(e.ci_lo) + "," + format_g17(e.ci_hi) + "," + format_g17(e.trimmed_mean) + "," +
                       format_g17(row.reference.value) + "," + format_g17(row.ratio) + "," + format_g17(row.ratio_lo) +
                       "," + format_g17(row.ratio_hi) + "," + (row.straddles_one ? "1" : "0") + "\n";
        }
      }
      reports.push_back(report_json(cell));
    }
    json j{{"experiment", c.experiment}, {"metric", detail::metric_json(c.metric)}, {"trials", c.trials},
           {"seed", c.seed}, {"reports", reports}};
    detail::write_file(dir / "trials.csv", trials);
    detail::write_file(dir / "estimates.csv", estimates);
    detail::write_file(dir / "poa_report.json", j.dump(2) + "\n");
    res.files = {(dir / "trials.csv").string(), (dir / "estimates.csv").string(), (dir / "poa_report.json").string()};
  }
  return res;
}

// ---------------------------------------------------------------------------
// Verification suites.

struct VerifyOutcome {
  int checks = 0;
  std::vector<std::string> failures;
  std::string log;
  bool ok() const noexcept { return failures.empty(); }
};

namespace detail {
struct Checker {
  VerifyOutcome& out;
  void operator()(bool cond, const std::string& what) {
    ++out.checks;
    if (!cond) out.failures.push_back(what);
  }
};

inline std::vector<Instance> invariant_instances() {
  std::vector<Instance> v;
  for (double rho : {1.0, 4.0, std::exp(2.0), std::exp(8.0)}) {
    for (int b : {0, 1}) v.push_back(make_coin_bias({rho, 100, b, std::nullopt}));
  }
  for (long long k = 1; k <= 4; ++k) v.push_back(make_noisy_binary_search({std::exp(4.0), 10, k, std::nullopt}));
  for (ClassKind kind : {ClassKind::Lip, ClassKind::SMLip}) {
    for (int b : {0, 1}) v.push_back(make_rare_event({10, 10, 100, 1.0 / 32, b, kind}));
  }
  v.push_back(make_product_instance({2.0, 3.0, 0.2, 50, 4, {0, 1, 1, 0}}));
  v.push_back(make_product_instance({1.0, 1.0, 0.1, 50, 1, {1}}));
  return v;
}
}  // namespace detail

inline VerifyOutcome verify_invariants() {
  VerifyOutcome out;
  detail::Checker check{out};
  for (const auto& inst : detail::invariant_instances()) {
    const auto cert = check_membership(inst, inst.class_tag());
    check(cert.member, inst.id() + ": membership under its own tag (" + cert.violation + ")");
    for (const auto& c : inst.coordinates()) {
      for (const auto& f : c.objectives) {
        check(std::is_sorted(f.slopes().begin(), f.slopes().end()), inst.id() + ": slopes non-decreasing");
      }
    }
    const Point xs = inst.minimizer_point();
    check(gap(inst, xs) <= 1e-12, inst.id() + ": gap at the declared minimizer is zero");
    Point x(inst.dimension());
    bool nonneg = true;
    for (int g = -50; g <= 150; ++g) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = xs[i] + 0.05 * g * (1.0 + static_cast<double>(i));
      nonneg = nonneg && population_objective(inst, x) - inst.optimal_value() >= -1e-12;
    }
    check(nonneg, inst.id() + ": gap non-negative on a grid");
    // scale identity
    const Instance sc = scale_instance(inst, 2.0, 3.0);
    bool scaled_ok = true;
    for (int g = -20; g <= 20; ++g) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.37 * g;
      Point y = x;
      for (double& yi : y) yi *= 3.0;
      // Gaps are differences of objective values, so rounding scales with |F|.
      const double a = gap(sc, y), b = 6.0 * gap(inst, x);
      scaled_ok = scaled_ok && std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(population_objective(sc, y)));
    }
    check(scaled_ok, inst.id() + ": scaled gap identity");
    // determinism and transcript validity
    const auto a1 = run_algorithm(inst, sgd_fixed(0.1), 50, 99, Access::SFO, true);
    const auto a2 = run_algorithm(inst, sgd_fixed(0.1), 50, 99, Access::SFO, true);
    check(a1.x == a2.x && a1.transcript == a2.transcript, inst.id() + ": replay determinism");
    check(a1.queries == 50, inst.id() + ": SFO query count equals T");
    const SamplePath path = draw_path(inst, 50, 99);
    bool valid = true;
    for (std::size_t q = 0; q < a1.transcript.queries.size(); ++q) {
      const auto& qq = a1.transcript.queries[q];
      const auto s = path.at(qq.t);
      for (std::size_t i = 0; i < inst.dimension(); ++i) {
        const auto& f = inst.coordinate(i).objective_for(s[i]);
        const double g = a1.transcript.responses[q][i];
        valid = valid && f.left_slope(qq.x[i]) <= g && g <= f.right_slope(qq.x[i]);
      }
    }
    check(valid, inst.id() + ": transcript responses are subgradients");
  }
  // Closed-form identities.
  {
    const NoisyBinarySearchParams p{std::exp(4.0), 10, 3, std::nullopt};
    const Instance nbs = make_noisy_binary_search(p);
    const CoinBiasParams cp{4.0, 100, 0, 0.1};
    const Instance coin = make_coin_bias(cp);
    const RareEventParams rp{10, 10, 100, 1.0 / 32, 1, ClassKind::Lip};
    const Instance rare = make_rare_event(rp);
    bool nbs_ok = true, coin_ok = true, rare_ok = true;
    for (int i = 0; i < 200; ++i) {
      const double x = -5.0 + 20.0 * i / 199.0;
      nbs_ok = nbs_ok && std::abs(gap(nbs, x) - p.epsilon() * std::abs(x - p.r_k())) <= 1e-12;
      const double xc = 4.0 * i / 199.0;
      coin_ok = coin_ok && std::abs(gap(coin, xc) - 0.1 * xc) <= 1e-12;
      rare_ok = rare_ok && gap(rare, x) >= rp.alpha() * std::abs(x) - 1e-12;
    }
    check(nbs_ok, "noisy_binary_search: gap = eps |x - r_k|");
    check(coin_ok, "coin_bias v=0: gap = eps x on [0, rho]");
    check(rare_ok, "rare_event v=1: gap >= alpha |x|");
  }
  out.log = std::to_string(out.checks) + " invariant checks, " + std::to_string(out.failures.size()) + " failed\n";
  return out;
}

inline VerifyOutcome verify_hypotest(std::vector<EntropyReport>* reports = nullptr) {
  VerifyOutcome out;
  detail::Checker check{out};
  const auto grid = skewed_grid(HypotestConfig{});
  constexpr double kSlack = 1e-12;
  std::ostringstream log;
  log << "     p    T        eps        I_exact     eps^2 T    4p eps^2 T   MAP error   p/2      Fano floor\n";
  for (const auto& r : grid) {
    const std::string tag = "p=" + format_double(r.p) + ",T=" + std::to_string(r.T);
    check(r.I_exact <= r.bound_general + kSlack, tag + ": I <= eps^2 T");
    check(r.I_exact <= r.bound_skewed + kSlack, tag + ": I <= 4 p eps^2 T");
    check(r.map_error >= r.p / 2 - kSlack, tag + ": MAP error >= p/2");
    check(r.map_error >= r.fano_floor - kSlack, tag + ": MAP error >= Fano floor");
    check(r.map_error <= r.threshold_error + kSlack, tag + ": MAP error <= threshold estimator error");
    check(r.I_exact <= r.H_V + kSlack, tag + ": I <= H(V)");
    char line[256];
    std::snprintf(line, sizeof line, "%6.3f %4lld  %10.6f  %11.8f  %10.6f  %10.6f  %10.6f  %7.4f  %10.6f\n", r.p, r.T, r.eps,
                  r.I_exact, r.bound_general, r.bound_skewed, r.map_error, r.p / 2, r.fano_floor);
    log << line;
  }
  // Noisy binary search, exact at small sizes.
  for (long long n : {2LL, 4LL, 8LL}) {
    for (long long T : {1LL, 4LL, 8LL}) {
      const double eps = search_epsilon(n, T);
      for (SearchPolicy pol : {SearchPolicy::Bisection, SearchPolicy::FixedGrid}) {
        const auto e = enumerate_channel(noisy_binary_search_channel(static_cast<std::size_t>(n), eps, T, pol));
        const std::string tag = "search n=" + std::to_string(n) + ",T=" + std::to_string(T) + "," + std::string(to_string(pol));
        check(e.mutual_information <= channel_capacity_bound(eps, T) + kSlack, tag + ": I <= T C(eps)");
        check(e.mutual_information <= general_information_bound(eps, T) + kSlack, tag + ": I <= eps^2 T");
        check(e.map_error >= fano_floor_exact(e.H_V, e.mutual_information, n) - kSlack, tag + ": MAP error >= Fano floor");
      }
    }
  }
  log << std::to_string(out.checks) << " hypothesis-test checks, " << out.failures.size() << " failed\n";
  out.log = log.str();
  if (reports) *reports = grid;
  return out;
}

inline VerifyOutcome verify_scaling(unsigned workers = 1) {
  VerifyOutcome out;
  detail::Checker check{out};
  const double rho = std::exp(2.0);
  const std::vector<Instance> base = {make_coin_bias({rho, 100, 0, std::nullopt}), make_coin_bias({rho, 100, 1, std::nullopt})};
  const std::vector<AlgorithmSpec> algs = {sgd_fixed_tuned(1, 1), adagrad_norm_sgd(rho), clipped_sgd(1, 1, 0.05), trivial_alg()};
  std::ostringstream log;
  for (const auto& [l1, r1] : std::vector<std::pair<double, double>>{{2, 3}, {1, 5}}) {
    for (const auto& alg : algs) {
      for (ErrorKind k : {ErrorKind::expected(), ErrorKind::quantile(0.05)}) {
        const auto sc = scaling_equivalence_test(alg, ClassKind::Lip, l1, l1, r1, r1 * rho, base, 100, k, 400, 17, workers);
        const std::string tag = alg.name + " (l1=" + format_double(l1) + ",r1=" + format_double(r1) + "," +
                                std::string(to_string(k.metric)) + ")";
        check(sc.equal, tag + ": paired reports differ by " + format_g17(sc.max_abs_diff));
        log << tag << ": max |diff| = " << format_g17(sc.max_abs_diff) << "\n";
      }
    }
  }
  out.log = log.str();
  return out;
}

}  // namespace poa
