#ifndef REDMAP_IO_HPP
#define REDMAP_IO_HPP

// Parameter files, reports and table writers. Numbers are written with 10
// significant digits.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "redmap/equilibrium.hpp"
#include "redmap/errors.hpp"
#include "redmap/model.hpp"
#include "redmap/stability.hpp"
#include "redmap/sweep.hpp"

namespace redmap::io {

using json = nlohmann::ordered_json;

/// Parameter keys of a params file, in file order.
inline const std::vector<std::string>& parameter_keys() {
  static const std::vector<std::string> keys{"N",   "K",     "C",     "d",     "M",     "B",
                                             "p_max", "q_min", "q_max", "w", "alpha", "beta"};
  return keys;
}

struct Parameters {
  SystemParams system;
  ControlParams control;
};

/// Reads a params object. Requires exactly the 12 keys, all numeric.
inline Parameters parameters_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("params: expected a JSON object");
  const auto& keys = parameter_keys();
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw DomainError("params: unknown key '" + item.key() + "'");
  }
  auto get = [&](const std::string& k) {
    if (!j.contains(k)) throw DomainError("params: missing key '" + k + "'");
    if (!j.at(k).is_number()) throw DomainError("params: key '" + k + "' must be a number");
    return j.at(k).get<double>();
  };
  SystemParams sys{get("N"), get("K"), get("C"), get("d"), get("M"), get("B")};
  ControlParams ctl{get("p_max"), get("q_min"), get("q_max"), get("w"),
                    BetaShape(get("alpha"), get("beta"))};
  return {sys, ctl};
}

inline Parameters read_parameters(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("params: ") + e.what());
  }
  return parameters_from_json(j);
}

inline json parameters_to_json(const SystemParams& s, const ControlParams& c) {
  return json{{"N", s.connections}, {"K", s.tcp_constant}, {"C", s.capacity},
              {"d", s.rtt},         {"M", s.packet_size},  {"B", s.buffer},
              {"p_max", c.p_max},   {"q_min", c.q_min},    {"q_max", c.q_max},
              {"w", c.w},           {"alpha", c.shape.alpha()}, {"beta", c.shape.beta()}};
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// JSON value of v rounded to 10 significant digits; non-finite values
/// become strings.
inline json number_json(double v) {
  if (!std::isfinite(v)) return format_number(v);
  return std::strtod(format_number(v).c_str(), nullptr);
}

using Field = std::variant<std::monostate, double, std::int64_t, bool, std::string>;

/// Flat ordered key/value report.
struct Report {
  std::vector<std::pair<std::string, Field>> fields;

  void add(std::string key, Field value) { fields.emplace_back(std::move(key), std::move(value)); }
};

inline json field_json(const Field& f) {
  struct Visitor {
    json operator()(std::monostate) const { return nullptr; }
    json operator()(double v) const { return number_json(v); }
    json operator()(std::int64_t v) const { return v; }
    json operator()(bool v) const { return v; }
    json operator()(const std::string& v) const { return v; }
  };
  return std::visit(Visitor{}, f);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string field_text(const Field& f) {
  struct Visitor {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(double v) const { return format_number(v); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
    std::string operator()(const std::string& v) const { return csv_escape(v); }
  };
  return std::visit(Visitor{}, f);
}

inline json report_json(const Report& r) {
  json j = json::object();
  for (const auto& [k, v] : r.fields) j[k] = field_json(v);
  return j;
}

/// Header line with the keys, one line with the values.
inline void write_report_csv(std::ostream& out, const Report& r) {
  for (std::size_t i = 0; i < r.fields.size(); ++i) {
    out << (i ? "," : "") << csv_escape(r.fields[i].first);
  }
  out << "\n";
  for (std::size_t i = 0; i < r.fields.size(); ++i) {
    out << (i ? "," : "") << field_text(r.fields[i].second);
  }
  out << "\n";
}

inline void write_report_json(std::ostream& out, const Report& r) {
  out << report_json(r).dump(2) << "\n";
}

inline Report model_report(const DerivedModel& m) {
  Report r;
  r.add("A1", m.a1);
  r.add("A2", m.a2);
  r.add("nu", m.nu);
  r.add("p1", m.p1);
  r.add("p2", m.p2);
  r.add("theta_l", m.theta_l);
  r.add("theta_r", m.theta_r);
  r.add("continuous_at_theta_r", m.continuous_at_theta_r);
  r.add("w_mon", w_mon(m));
  r.add("w_inv", w_inv(m));
  r.add("has_fixed_point", m.has_fixed_point);
  return r;
}

inline void add_bifurcation(Report& r, const std::string& prefix, const BifurcationPoint& bp) {
  r.add(prefix, bp.value);
  r.add(prefix + "_residual", bp.residual);
  r.add(prefix + "_iterations", static_cast<std::int64_t>(bp.iterations));
  r.add(prefix + "_strategy", std::string(to_string(bp.strategy)));
}

inline json condition_json(const Condition& c) {
  return json{{"name", c.name},
              {"value", number_json(c.value)},
              {"bound", number_json(c.bound)},
              {"passed", c.passed}};
}

inline json certificate_json(const StabilityCertificate& c) {
  json j;
  j["globally_stable"] = to_string(c.globally_stable);
  j["theorem"] = to_string(c.theorem);
  j["two_cycle_endpoint_excluded"] = c.two_cycle_endpoint_excluded;
  j["convexity"] = json{{"status", to_string(c.convexity.status)},
                        {"rule", to_string(c.convexity.rule)}};
  json shape{{"kind", to_string(c.shape.kind)}, {"evidence", to_string(c.shape.evidence)}};
  shape["q_c"] = c.shape.q_c ? number_json(*c.shape.q_c) : json(nullptr);
  j["shape"] = shape;
  if (c.equilibrium) {
    j["q_star"] = number_json(c.equilibrium->q_star);
    j["f_prime_at_star"] = number_json(c.equilibrium->f_prime_at_star);
  } else {
    j["q_star"] = nullptr;
    j["f_prime_at_star"] = nullptr;
  }
  json conds = json::array();
  for (const auto& cond : c.conditions_checked) conds.push_back(condition_json(cond));
  j["conditions"] = conds;
  j["note"] = c.note;
  return j;
}

/// Conditions as a table: name, value, bound, passed.
inline void write_certificate_csv(std::ostream& out, const StabilityCertificate& c) {
  out << "name,value,bound,passed\n";
  for (const auto& cond : c.conditions_checked) {
    out << csv_escape(cond.name) << "," << format_number(cond.value) << ","
        << format_number(cond.bound) << "," << (cond.passed ? "true" : "false") << "\n";
  }
  out << "verdict," << "," << "," << to_string(c.globally_stable) << "\n";
}

inline std::string cell_text(const Cell& c) {
  struct Visitor {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(double v) const { return format_number(v); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(const std::string& v) const { return csv_escape(v); }
  };
  return std::visit(Visitor{}, c);
}

inline json cell_json(const Cell& c) {
  struct Visitor {
    json operator()(std::monostate) const { return nullptr; }
    json operator()(double v) const { return number_json(v); }
    json operator()(std::int64_t v) const { return v; }
    json operator()(const std::string& v) const { return v; }
  };
  return std::visit(Visitor{}, c);
}

inline void write_table_csv(std::ostream& out, const SweepTable& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << csv_escape(t.columns[i]);
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell_text(row[i]);
    out << "\n";
  }
}

/// One JSON object per row.
inline void write_table_jsonl(std::ostream& out, const SweepTable& t) {
  for (const auto& row : t.rows) {
    json j = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) j[t.columns[i]] = cell_json(row[i]);
    out << j.dump() << "\n";
  }
}

}  // namespace redmap::io

#endif  // REDMAP_IO_HPP
