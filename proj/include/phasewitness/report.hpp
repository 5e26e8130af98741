#pragma once

#include "majorization.hpp"
#include "sampling.hpp"
#include "state_spec.hpp"
#include "witnesses.hpp"

#include <cstdio>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#ifndef PHASEWITNESS_VERSION
#define PHASEWITNESS_VERSION "0.1.0"
#endif

namespace phasewitness {

inline constexpr const char* kVersion = PHASEWITNESS_VERSION;

/// Shortest round-trip text of a double (%.17g); inf/nan spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json witness_id_to_json(const WitnessId& id) {
  json j{{"label", id.label()}, {"kind", WitnessId::kind_name(id.kind)}};
  if (id.kind == WitnessKind::Discretized) j["base"] = WitnessId::kind_name(id.base);
  const WitnessKind k = id.kind == WitnessKind::Discretized ? id.base : id.kind;
  if (k == WitnessKind::RenyiWehrl || k == WitnessKind::DetVChi) j["beta"] = id.p1;
  if (k == WitnessKind::TsallisWehrl) j["gamma"] = id.p1;
  if (k == WitnessKind::STW) {
    j["alpha"] = id.p1;
    j["beta"] = std::isinf(id.p2) ? json("inf") : json(id.p2);
  }
  return j;
}

inline json report_to_json(const WitnessReport& r) {
  return json{{"witness", witness_id_to_json(r.id)},   {"frame", frame_to_json(r.frame)},
              {"value", r.value},                      {"entangled", r.entangled},
              {"method", to_string(r.method)},         {"error_estimate", r.error_estimate}};
}

inline json stats_to_json(const ExperimentStats& s) {
  return json{{"beta", s.beta},
              {"repetitions", s.repetitions},
              {"failures", s.failures},
              {"mean", s.mean},
              {"std", s.std},
              {"sigma_level", s.sigma_level},
              {"fraction_within", {{"1", s.fraction_within[1]}, {"2", s.fraction_within[2]}, {"3", s.fraction_within[3]}}},
              {"snr", std::isinf(s.snr) ? json("inf") : json(s.snr)}};
}

inline json majorization_to_json(const MajorizationResult& m) {
  json probes = json::array();
  for (const auto& p : m.probes)
    probes.push_back({{"function", p.name}, {"param", p.param}, {"lhs", p.lhs}, {"rhs", p.rhs}, {"tolerance", p.tolerance}});
  return json{{"verdict", to_string(m.verdict)}, {"probes", probes}};
}

/// CSV table with a leading metadata comment line and a header row.
class CsvTable {
 public:
  using Cell = std::variant<double, long long, std::string>;

  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  /// Metadata entries printed as "# phasewitness <version> key=value ...".
  void meta(const std::string& key, const std::string& value) { meta_.emplace_back(key, value); }
  void meta(const std::string& key, double value) { meta_.emplace_back(key, format_double(value)); }

  void row(std::vector<Cell> cells) {
    if (cells.size() != columns_.size()) throw InvalidArgument("CSV row width does not match the header");
    rows_.push_back(std::move(cells));
  }
  std::size_t rows() const { return rows_.size(); }

  void write(std::ostream& out) const {
    out << "# phasewitness " << kVersion;
    for (const auto& [k, v] : meta_) out << ' ' << k << '=' << v;
    out << '\n';
    for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out << ',';
        if (const auto* d = std::get_if<double>(&r[i])) out << format_double(*d);
        else if (const auto* n = std::get_if<long long>(&r[i])) out << *n;
        else out << std::get<std::string>(r[i]);
      }
      out << '\n';
    }
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace phasewitness
