#include "roughvol/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace roughvol::cli {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& v) {
  std::string out = "invalid configuration:";
  for (const auto& s : v) out += "\n  " + s;
  return out;
}

// Walks one JSON object, recording problems instead of throwing, so that a
// single pass reports every bad key.
class Reader {
 public:
  Reader(const json* obj, std::string prefix, std::vector<std::string>& errs)
      : obj_(obj), prefix_(std::move(prefix)), errs_(errs) {}

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    if (!obj_) return nullptr;
    auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  void error(const std::string& key, const std::string& msg) { errs_.push_back(path(key) + ": " + msg); }

  template <class Pred>
  void number(const std::string& key, double& out, Pred ok, const char* requirement) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number()) return error(key, "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || !ok(x)) return error(key, requirement);
    out = x;
  }

  void count(const std::string& key, std::size_t& out, std::size_t min_value) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer()) return error(key, "expected an integer");
    if (v->is_number_unsigned() ? v->get<std::uint64_t>() < min_value
                                : v->get<std::int64_t>() < static_cast<std::int64_t>(min_value))
      return error(key, "must be at least " + std::to_string(min_value));
    out = v->get<std::size_t>();
  }

  void integer(const std::string& key, int& out, int min_value, int max_value) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer()) return error(key, "expected an integer");
    const auto x = v->get<std::int64_t>();
    if (x < min_value || x > max_value)
      return error(key, "must lie in [" + std::to_string(min_value) + ", " + std::to_string(max_value) + "]");
    out = static_cast<int>(x);
  }

  void choice(const std::string& key, std::string& out, const std::vector<std::string>& allowed) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_string()) return error(key, "expected a string");
    const auto s = v->get<std::string>();
    for (const auto& a : allowed)
      if (s == a) {
        out = s;
        return;
      }
    std::string msg = "must be one of";
    for (const auto& a : allowed) msg += " " + a;
    error(key, msg);
  }

  const json* object(const std::string& key) {
    const json* v = find(key);
    if (v && !v->is_object()) {
      error(key, "expected an object");
      return nullptr;
    }
    return v;
  }

  const json* array(const std::string& key) {
    const json* v = find(key);
    if (v && !v->is_array()) {
      error(key, "expected an array");
      return nullptr;
    }
    return v;
  }

  void finish() {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it)
      if (!used_.count(it.key())) error(it.key(), "unknown key");
  }

 private:
  const json* obj_;
  std::string prefix_;
  std::vector<std::string>& errs_;
  std::set<std::string> used_;
};

const std::vector<std::string> kModels{"rbergomi", "abergomi", "bergomi2f", "bs"};

void read_size_list(Reader& r, const std::string& key, std::vector<std::size_t>& out, std::size_t min_value) {
  const json* a = r.array(key);
  if (!a) return;
  std::vector<std::size_t> v;
  bool ok = !a->empty();
  for (const auto& e : *a) {
    if (!e.is_number_integer() || e.get<std::int64_t>() < static_cast<std::int64_t>(min_value)) {
      ok = false;
      break;
    }
    v.push_back(e.get<std::size_t>());
  }
  if (!ok) return r.error(key, "expected a non-empty array of integers >= " + std::to_string(min_value));
  out = std::move(v);
}

}  // namespace

SchemaError::SchemaError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

RunConfig parse_config(const json& doc) {
  std::vector<std::string> errs;
  RunConfig c;
  if (!doc.is_object()) throw SchemaError({"<root>: expected a JSON object"});
  Reader root(&doc, "", errs);

  const json* ver = root.find("schema_version");
  if (!ver)
    root.error("schema_version", "missing (expected " + std::to_string(kSchemaVersion) + ")");
  else if (!ver->is_number_integer() || ver->get<std::int64_t>() != kSchemaVersion)
    root.error("schema_version", "unsupported (expected " + std::to_string(kSchemaVersion) + ")");

  root.choice("model", c.model, kModels);

  {
    Reader r(root.object("params"), "params", errs);
    r.number("xi0", c.params.xi0, [](double x) { return x > 0.0; }, "must be positive");
    r.number("eta", c.params.eta, [](double x) { return x > 0.0; }, "must be positive");
    r.number("H", c.params.H, [](double x) { return x > 0.0 && x < 0.5; }, "must lie in (0, 0.5)");
    r.number("rho", c.params.rho, [](double x) { return std::abs(x) <= 1.0; }, "must lie in [-1, 1]");
    r.finish();
  }
  {
    Reader r(root.object("grid"), "grid", errs);
    r.number("T", c.T, [](double x) { return x > 0.0; }, "must be positive");
    r.count("steps", c.steps, 2);
    r.finish();
  }
  root.count("paths", c.paths, 1);
  {
    const json* s = root.find("seed");
    if (s) {
      if (!s->is_number_integer() || (s->is_number_integer() && !s->is_number_unsigned() && s->get<std::int64_t>() < 0))
        root.error("seed", "expected a non-negative integer");
      else
        c.seed = s->get<std::uint64_t>();
    }
  }
  root.integer("threads", c.threads, 0, 4096);
  root.integer("repetitions", c.repetitions, 1, 100);

  {
    Reader r(root.object("kernel"), "kernel", errs);
    r.count("n", c.kernel.n, 1);
    std::string method = c.kernel.method == KernelMethod::closed_form ? "closed-form" : "least-squares";
    r.choice("method", method, {"closed-form", "least-squares"});
    c.kernel.method = method == "closed-form" ? KernelMethod::closed_form : KernelMethod::least_squares;
    if (const json* g = r.find("N_grid"); g && !g->is_null()) {
      if (!g->is_number_integer() || g->get<std::int64_t>() < 2)
        r.error("N_grid", "expected null or an integer >= 2");
      else
        c.kernel.n_grid = g->get<std::size_t>();
    }
    r.integer("max_iterations", c.kernel.max_iterations, 1, 100000);
    r.number("subgrid_weight", c.kernel.subgrid_weight,
             [](double x) { return x >= 0.0 && std::isfinite(x); }, "must be finite and non-negative");
    r.finish();
  }
  {
    Reader r(root.object("abergomi"), "abergomi", errs);
    auto& a = c.abergomi;
    if (const json* m = r.find("mult_factor")) {
      if (m->is_string() && m->get<std::string>() == "table")
        a.table_factor = true;
      else if (m->is_number() && m->get<double>() > 0.0 && std::isfinite(m->get<double>())) {
        a.table_factor = false;
        a.mult_factor = m->get<double>();
      } else
        r.error("mult_factor", "expected \"table\" or a positive number");
    }
    std::string placement = a.placement == MultPlacement::exponent ? "exponent" : "smile";
    r.choice("placement", placement, {"exponent", "smile"});
    a.placement = placement == "exponent" ? MultPlacement::exponent : MultPlacement::smile;
    if (const json* t = r.find("theta"); t && !t->is_null()) {
      if (!t->is_number() || !(t->get<double>() > 0.0))
        r.error("theta", "expected null or a positive number");
      else
        a.theta = t->get<double>();
    }
    std::string comp = a.exact_compensator ? "exact" : "power";
    r.choice("compensator", comp, {"power", "exact"});
    a.exact_compensator = comp == "exact";
    std::string stepping = a.stepping == FactorStepping::exponential ? "exponential" : "euler";
    r.choice("stepping", stepping, {"exponential", "euler"});
    a.stepping = stepping == "exponential" ? FactorStepping::exponential : FactorStepping::euler;
    r.finish();
  }
  {
    Reader r(root.object("strikes"), "strikes", errs);
    r.number("k_min", c.strikes.k_min, [](double) { return true; }, "");
    r.number("k_max", c.strikes.k_max, [](double) { return true; }, "");
    r.count("count", c.strikes.count, 1);
    if (!(c.strikes.k_min < c.strikes.k_max) && c.strikes.count > 1)
      r.error("k_max", "must exceed k_min");
    r.finish();
  }
  {
    Reader r(root.object("hybrid"), "hybrid", errs);
    std::string near = c.near_field == NearField::exact ? "exact" : "midpoint";
    r.choice("near_field", near, {"exact", "midpoint"});
    c.near_field = near == "exact" ? NearField::exact : NearField::midpoint;
    r.finish();
  }
  {
    Reader r(root.object("bs"), "bs", errs);
    r.number("vol", c.bs_vol, [](double x) { return x > 0.0; }, "must be positive");
    r.finish();
  }
  {
    Reader r(root.object("bergomi2f"), "bergomi2f", errs);
    auto& p = c.bergomi2f;
    auto any = [](double) { return true; };
    r.number("omega", p.omega, any, "");
    r.number("theta", p.theta, any, "");
    r.number("kappa_x", p.kappa_x, any, "");
    r.number("kappa_y", p.kappa_y, any, "");
    r.number("rho_sx", p.rho_sx, any, "");
    r.number("rho_sy", p.rho_sy, any, "");
    r.number("rho_xy", p.rho_xy, any, "");
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      errs.push_back(std::string("bergomi2f: ") + e.what());
    }
    r.finish();
  }
  {
    Reader r(root.object("skew"), "skew", errs);
    if (const json* m = r.array("maturities")) {
      std::vector<double> v;
      bool ok = true;
      for (const auto& e : *m) {
        if (!e.is_number() || !(e.get<double>() > 0.0)) {
          ok = false;
          break;
        }
        v.push_back(e.get<double>());
      }
      if (!ok)
        r.error("maturities", "expected an array of positive numbers");
      else
        c.skew.maturities = std::move(v);
    }
    r.number("bump", c.skew.bump, [](double x) { return x > 0.0 && x < 1.0; }, "must lie in (0, 1)");
    r.count("steps", c.skew.steps, 2);
    r.finish();
  }
  {
    Reader r(root.object("compare"), "compare", errs);
    read_size_list(r, "terms", c.compare.terms, 1);
    read_size_list(r, "steps", c.compare.steps, 2);
    r.finish();
  }
  {
    Reader r(root.object("smile"), "smile", errs);
    if (const json* m = r.array("models")) {
      std::vector<std::string> v;
      bool ok = !m->empty();
      for (const auto& e : *m) {
        if (!e.is_string() || std::find(kModels.begin(), kModels.end(), e.get<std::string>()) == kModels.end()) {
          ok = false;
          break;
        }
        v.push_back(e.get<std::string>());
      }
      if (!ok)
        r.error("models", "expected a non-empty array drawn from rbergomi, abergomi, bergomi2f, bs");
      else
        c.smile.models = std::move(v);
    }
    read_size_list(r, "steps", c.smile.steps, 2);
    r.finish();
  }
  root.finish();

  // The tabulated multiplication factor exists only for some step counts.
  if (c.abergomi.table_factor) {
    auto check = [&](std::size_t n, const std::string& where) {
      try {
        table2_mult_factor_squared(n);
      } catch (const std::invalid_argument&) {
        errs.push_back(where + ": no tabulated multiplication factor for " + std::to_string(n) +
                       " steps (set abergomi.mult_factor to a number)");
      }
    };
    if (c.model == "abergomi") check(c.steps, "grid.steps");
    for (auto n : c.compare.steps) check(n, "compare.steps");
    if (std::find(c.smile.models.begin(), c.smile.models.end(), "abergomi") != c.smile.models.end())
      for (auto n : c.smile.steps) check(n, "smile.steps");
  }
  if (c.abergomi.theta && *c.abergomi.theta > c.T)
    errs.push_back("abergomi.theta: must not exceed grid.T");

  if (!errs.empty()) throw SchemaError(std::move(errs));
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = c.model;
  j["params"] = {{"xi0", c.params.xi0}, {"eta", c.params.eta}, {"H", c.params.H}, {"rho", c.params.rho}};
  j["grid"] = {{"T", c.T}, {"steps", c.steps}};
  j["paths"] = c.paths;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["repetitions"] = c.repetitions;
  j["kernel"] = {{"n", c.kernel.n},
                 {"method", c.kernel.method == KernelMethod::closed_form ? "closed-form" : "least-squares"},
                 {"N_grid", c.kernel.n_grid ? json(c.kernel.n_grid) : json(nullptr)},
                 {"max_iterations", c.kernel.max_iterations},
                 {"subgrid_weight", c.kernel.subgrid_weight}};
  const auto& a = c.abergomi;
  j["abergomi"] = {{"mult_factor", a.table_factor ? json("table") : json(a.mult_factor)},
                   {"placement", a.placement == MultPlacement::exponent ? "exponent" : "smile"},
                   {"theta", a.theta ? json(*a.theta) : json(nullptr)},
                   {"compensator", a.exact_compensator ? "exact" : "power"},
                   {"stepping", a.stepping == FactorStepping::exponential ? "exponential" : "euler"}};
  j["strikes"] = {{"k_min", c.strikes.k_min}, {"k_max", c.strikes.k_max}, {"count", c.strikes.count}};
  j["hybrid"] = {{"near_field", c.near_field == NearField::exact ? "exact" : "midpoint"}};
  j["bs"] = {{"vol", c.bs_vol}};
  const auto& p = c.bergomi2f;
  j["bergomi2f"] = {{"omega", p.omega},     {"theta", p.theta},   {"kappa_x", p.kappa_x}, {"kappa_y", p.kappa_y},
                    {"rho_sx", p.rho_sx},   {"rho_sy", p.rho_sy}, {"rho_xy", p.rho_xy}};
  j["skew"] = {{"maturities", c.skew.maturities}, {"bump", c.skew.bump}, {"steps", c.skew.steps}};
  j["compare"] = {{"terms", c.compare.terms}, {"steps", c.compare.steps}};
  j["smile"] = {{"models", c.smile.models}, {"steps", c.smile.steps}};
  return j;
}

std::string config_hash(const json& doc) {
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  const std::string s = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw SchemaError({std::string("<file>: malformed JSON: ") + e.what()});
  }
}

}  // namespace roughvol::cli
