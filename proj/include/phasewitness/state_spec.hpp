#pragma once

#include "densities.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

namespace phasewitness {

using json = nlohmann::json;

inline json frame_to_json(const NonLocalFrame& f) {
  return json{{"a1", f.a1()},         {"b1", f.b1()},   {"a2", f.a2()}, {"b2", f.b2()},
              {"theta1", f.theta1()}, {"theta2", f.theta2()}, {"phi", f.phi()}, {"xi", f.xi()},
              {"branch", to_string(f.branch())}};
}

inline NonLocalFrame frame_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("frame must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (k != "a1" && k != "b1" && k != "a2" && k != "b2" && k != "theta1" && k != "theta2" && k != "phi" &&
        k != "xi" && k != "branch")
      throw InvalidArgument("unknown frame field '" + k + "'");
  auto num = [&](const char* k, double def) {
    if (!j.contains(k)) return def;
    if (!j.at(k).is_number()) throw InvalidArgument(std::string("frame field '") + k + "' must be a number");
    return j.at(k).get<double>();
  };
  if (j.contains("branch") && !j.at("branch").is_string()) throw InvalidArgument("frame field 'branch' must be a string");
  const Branch b = j.contains("branch") ? branch_from_string(j.at("branch").get<std::string>()) : Branch::Plus;
  return NonLocalFrame(num("a1", 1), num("b1", 1), num("a2", 1), num("b2", 1), num("theta1", 0), num("theta2", 0),
                       num("phi", 0), num("xi", 1), b);
}

/// Declarative state description: a family, its parameters, a frame and an
/// optional phase-space displacement of the Husimi density.
struct StateSpec {
  std::string family = "vacuum";  // vacuum, tmsv, gaussian_normal_form, example, mixture, coherent, fock1
  double lambda = 0;
  double r = 0, p = 0;
  double sigma_plus = 1, sigma_minus = 1;
  GaussianNormalForm normal_form;
  NonLocalFrame frame;
  Eigen::Vector2d displacement = Eigen::Vector2d::Zero();

  /// Husimi density in the given frame.
  Density2D build(const NonLocalFrame& f) const {
    Density2D d;
    if (family == "vacuum") d = vacuum_husimi(f);
    else if (family == "tmsv") d = tmsv_husimi(lambda, f);
    else if (family == "gaussian_normal_form") d = gaussian_husimi(normal_form, f);
    else if (family == "example") d = example_state({sigma_plus, sigma_minus}, f).second;
    else if (family == "mixture") d = mixture_husimi({lambda, r, p}, f);
    else if (family == "coherent") d = coherent_husimi();
    else if (family == "fock1") d = fock1_husimi();
    else throw InvalidArgument("unknown state family '" + family + "'");
    return displace(d, displacement);
  }
  Density2D build() const { return build(frame); }

  /// {"family": ..., "params": {...}, "frame": {...}}
  json to_json() const {
    json params = json::object();
    if (family == "tmsv") params["lambda"] = lambda;
    if (family == "mixture") {
      params["lambda"] = lambda;
      params["r"] = r;
      params["p"] = p;
    }
    if (family == "example") {
      params["sigma_plus"] = sigma_plus;
      params["sigma_minus"] = sigma_minus;
    }
    if (family == "gaussian_normal_form") {
      params["m1"] = normal_form.m1;
      params["m2"] = normal_form.m2;
      params["mplus"] = normal_form.mplus;
      params["mminus"] = normal_form.mminus;
    }
    if (!displacement.isZero(0.0)) params["displacement"] = {displacement.x(), displacement.y()};
    return json{{"family", family}, {"params", params}, {"frame", frame_to_json(frame)}};
  }

  static StateSpec from_json(const json& j) {
    if (!j.is_object()) throw InvalidArgument("state spec must be a JSON object");
    for (const auto& [k, v] : j.items())
      if (k != "family" && k != "params" && k != "frame") throw InvalidArgument("unknown state spec field '" + k + "'");
    if (!j.contains("family") || !j.at("family").is_string()) throw InvalidArgument("state spec needs a 'family' string");
    StateSpec s;
    s.family = j.at("family").get<std::string>();
    const json params = j.contains("params") ? j.at("params") : json::object();
    if (!params.is_object()) throw InvalidArgument("'params' must be a JSON object");
    std::vector<std::string> required;
    if (s.family == "tmsv") required = {"lambda"};
    else if (s.family == "mixture") required = {"lambda", "r", "p"};
    else if (s.family == "example") required = {"sigma_plus", "sigma_minus"};
    else if (s.family == "gaussian_normal_form") required = {"m1", "m2", "mplus", "mminus"};
    else if (s.family != "vacuum" && s.family != "coherent" && s.family != "fock1")
      throw InvalidArgument("unknown state family '" + s.family + "'");
    for (const auto& [k, v] : params.items()) {
      if (k == "displacement") continue;
      if (std::find(required.begin(), required.end(), k) == required.end())
        throw InvalidArgument("unknown parameter '" + k + "' for family '" + s.family + "'");
    }
    auto num = [&](const std::string& k) {
      if (!params.contains(k)) throw InvalidArgument("state family '" + s.family + "' needs parameter '" + k + "'");
      if (!params.at(k).is_number()) throw InvalidArgument("parameter '" + k + "' must be a number");
      return params.at(k).get<double>();
    };
    if (s.family == "tmsv") s.lambda = num("lambda");
    if (s.family == "mixture") {
      s.lambda = num("lambda");
      s.r = num("r");
      s.p = num("p");
    }
    if (s.family == "example") {
      s.sigma_plus = num("sigma_plus");
      s.sigma_minus = num("sigma_minus");
    }
    if (s.family == "gaussian_normal_form") s.normal_form = {num("m1"), num("m2"), num("mplus"), num("mminus")};
    if (params.contains("displacement")) {
      const auto& d = params.at("displacement");
      if (!d.is_array() || d.size() != 2 || !d[0].is_number() || !d[1].is_number())
        throw InvalidArgument("displacement must be [dr, ds]");
      s.displacement = {d[0].get<double>(), d[1].get<double>()};
    }
    if (j.contains("frame")) s.frame = frame_from_json(j.at("frame"));
    return s;
  }

  static StateSpec load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open state spec '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw InvalidArgument("malformed state spec '" + path + "': " + e.what());
    }
    return from_json(j);
  }
};

}  // namespace phasewitness
