#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sarprec/errors.hpp"
#include "sarprec/experiments.hpp"

namespace sarprec::experiments {

using nlohmann::json;

namespace {

// Collects every validation problem so the user sees them all at once.
class Issues {
 public:
  void add(const std::string& field, const std::string& what) { items_.push_back(field + ": " + what); }
  bool empty() const { return items_.empty(); }

  [[noreturn]] void raise() const {
    std::string msg = "invalid scenario:";
    for (const auto& i : items_) msg += "\n  - " + i;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> items_;
};

std::optional<double> get_number(const json& j, const std::string& key, Issues& issues, bool required = true) {
  if (!j.contains(key)) {
    if (required) issues.add(key, "missing");
    return std::nullopt;
  }
  const auto& v = j.at(key);
  if (!v.is_number()) {
    issues.add(key, "expected a number");
    return std::nullopt;
  }
  const double x = v.get<double>();
  if (!std::isfinite(x)) {
    issues.add(key, "must be finite");
    return std::nullopt;
  }
  return x;
}

// A scalar broadcast to every user, or a list with one entry per user.
std::vector<double> get_per_user(const json& j, const std::string& key, std::size_t users, Issues& issues) {
  if (!j.contains(key)) {
    issues.add(key, "missing");
    return {};
  }
  const auto& v = j.at(key);
  if (v.is_number()) return std::vector<double>(users, v.get<double>());
  if (!v.is_array()) {
    issues.add(key, "expected a number or a list of numbers");
    return {};
  }
  if (v.size() != users) {
    issues.add(key, "expected " + std::to_string(users) + " entries, got " + std::to_string(v.size()));
    return {};
  }
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) {
      issues.add(key, "entries must be numbers");
      return {};
    }
    out.push_back(e.get<double>());
  }
  for (const double x : out) {
    if (!std::isfinite(x)) {
      issues.add(key, "entries must be finite");
      return {};
    }
  }
  return out;
}

Matrix parse_complex_matrix(const json& j, const std::string& field, Issues& issues) {
  if (!j.is_array() || j.empty()) {
    issues.add(field, "expected a non-empty list of rows");
    return {};
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().is_array() ? j.front().size() : 0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      issues.add(field, "rows must be lists of equal length");
      return {};
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& e = row[static_cast<std::size_t>(c)];
      if (e.is_number()) {
        m(r, c) = Complex(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
      } else {
        issues.add(field, "entries must be [re, im] pairs");
        return {};
      }
    }
  }
  return m;
}

json complex_matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

std::vector<sar::SarConstraint> parse_sar_list(const json& list, const std::string& field, Issues& issues) {
  std::vector<sar::SarConstraint> out;
  if (!list.is_array()) {
    issues.add(field, "expected a list");
    return out;
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    const auto& e = list[i];
    if (!e.is_object()) {
      issues.add(f, "expected an object");
      continue;
    }
    sar::SarConstraint c;
    c.name = e.value("name", "R" + std::to_string(i + 1));
    if (!e.contains("entries")) {
      issues.add(f + ".entries", "missing");
      continue;
    }
    c.matrix = parse_complex_matrix(e.at("entries"), f + ".entries", issues);
    Issues local;
    const auto limit = get_number(e, "limit_w_per_kg", local);
    if (!limit) {
      issues.add(f + ".limit_w_per_kg", "missing or not a number");
      continue;
    }
    if (!(*limit > 0.0)) issues.add(f + ".limit_w_per_kg", "must be > 0");
    c.limit = *limit;
    out.push_back(std::move(c));
  }
  return out;
}

void parse_solver(const json& j, optimizer::Options& o, Issues& issues) {
  if (!j.is_object()) {
    issues.add("solver", "expected an object");
    return;
  }
  auto positive = [&](const char* key, double& target) {
    if (const auto v = get_number(j, key, issues, false)) {
      if (*v > 0.0) {
        target = *v;
      } else {
        issues.add(std::string("solver.") + key, "must be > 0");
      }
    }
  };
  auto count = [&](const char* key, int& target) {
    if (const auto v = get_number(j, key, issues, false)) {
      if (*v >= 1.0 && std::floor(*v) == *v) {
        target = static_cast<int>(*v);
      } else {
        issues.add(std::string("solver.") + key, "must be a positive integer");
      }
    }
  };
  positive("eta_tol", o.eta_tol);
  positive("dual_tol", o.dual_tol);
  positive("dual_accept_tol", o.dual_accept_tol);
  positive("ao_tol", o.ao_tol);
  positive("ao_step_tol", o.ao_step_tol);
  positive("price_floor", o.price_floor);
  positive("fixed_point_tol", o.fixed_point.tol);
  count("max_outer", o.max_outer);
  count("max_dual", o.max_dual);
  count("max_ao", o.max_ao);
  count("fixed_point_max_iter", o.fixed_point.max_iter);
  if (const auto v = get_number(j, "subgradient_step", issues, false)) {
    if (*v >= 0.0) {
      o.subgradient_step = *v;
    } else {
      issues.add("solver.subgradient_step", "must be >= 0");
    }
  }
  if (j.contains("dual_method")) {
    const auto m = j.at("dual_method");
    if (m == "newton") {
      o.dual_method = optimizer::DualMethod::kFrozenGammaNewton;
    } else if (m == "subgradient") {
      o.dual_method = optimizer::DualMethod::kProjectedSubgradient;
    } else {
      issues.add("solver.dual_method", "expected \"newton\" or \"subgradient\"");
    }
  }
}

std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

double to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

}  // namespace

metrics::PowerModel ScenarioConfig::power_model() const {
  metrics::PowerModel pm;
  pm.amplifier_inefficiency = amplifier_inefficiency;
  pm.static_user_power = static_user_power;
  pm.static_bs_power = static_bs_power;
  pm.bandwidth = bandwidth;
  pm.noise_power = noise_power;
  pm.power_budget = max_power;
  return pm;
}

metrics::PowerModel ScenarioConfig::power_model(double max_power_w) const {
  metrics::PowerModel pm = power_model();
  std::fill(pm.power_budget.begin(), pm.power_budget.end(), max_power_w);
  return pm;
}

channel::ChannelStatistics ScenarioConfig::statistics() const {
  if (channel.statistics_file) {
    auto stats = load_statistics(*channel.statistics_file);
    if (stats.num_receive != num_receive || stats.transmit_dims() != num_transmit) {
      throw ConfigError("statistics file dimensions do not match the scenario");
    }
    return stats;
  }
  return channel::make_statistics(num_receive, num_transmit, path_loss_db, channel.decay, channel.seed);
}

ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario parse error at " + locate(text, e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");

  Issues issues;
  ScenarioConfig cfg;
  static const std::set<std::string> kKnown{
      "receive_antennas", "users", "transmit_antennas", "bandwidth_hz", "noise_power_dbm", "path_loss_db",
      "amplifier_inefficiency", "static_user_power_dbm", "static_bs_power_dbm", "max_power_dbm", "sar",
      "channel", "solver", "monte_carlo_samples", "master_seed"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) cfg.warnings.push_back("unknown key '" + key + "' ignored");
  }

  if (const auto m = get_number(j, "receive_antennas", issues)) {
    if (*m >= 1 && std::floor(*m) == *m) {
      cfg.num_receive = static_cast<Eigen::Index>(*m);
    } else {
      issues.add("receive_antennas", "must be a positive integer");
    }
  }

  std::size_t users = 0;
  if (j.contains("users")) {
    const auto& u = j.at("users");
    if (u.is_number_integer() && u.get<long long>() >= 1) {
      users = static_cast<std::size_t>(u.get<long long>());
    } else {
      issues.add("users", "must be a positive integer");
    }
  }
  if (!j.contains("transmit_antennas")) {
    issues.add("transmit_antennas", "missing");
  } else {
    const auto& t = j.at("transmit_antennas");
    if (t.is_number_integer()) {
      if (users == 0) issues.add("users", "required when transmit_antennas is a scalar");
      cfg.num_transmit.assign(users, t.get<long long>());
    } else if (t.is_array()) {
      for (const auto& e : t) cfg.num_transmit.push_back(e.is_number_integer() ? e.get<long long>() : 0);
      if (users != 0 && users != cfg.num_transmit.size()) {
        issues.add("transmit_antennas", "length disagrees with users");
      }
    } else {
      issues.add("transmit_antennas", "expected an integer or a list of integers");
    }
    for (const auto n : cfg.num_transmit) {
      if (n < 1) {
        issues.add("transmit_antennas", "entries must be positive integers");
        break;
      }
    }
    if (cfg.num_transmit.empty() && users == 0) issues.add("transmit_antennas", "no users");
  }
  users = cfg.num_transmit.size();

  if (const auto w = get_number(j, "bandwidth_hz", issues)) {
    if (*w > 0.0) {
      cfg.bandwidth = *w;
    } else {
      issues.add("bandwidth_hz", "must be > 0");
    }
  }
  if (const auto n = get_number(j, "noise_power_dbm", issues)) cfg.noise_power = metrics::dbm_to_watts(*n);
  if (const auto pl = get_number(j, "path_loss_db", issues)) cfg.path_loss_db = *pl;

  cfg.amplifier_inefficiency = get_per_user(j, "amplifier_inefficiency", users, issues);
  for (const double xi : cfg.amplifier_inefficiency) {
    if (xi < 0.0) {
      issues.add("amplifier_inefficiency", "must be >= 0");
      break;
    }
  }
  for (const double p : get_per_user(j, "static_user_power_dbm", users, issues)) {
    cfg.static_user_power.push_back(metrics::dbm_to_watts(p));
  }
  if (const auto p = get_number(j, "static_bs_power_dbm", issues)) cfg.static_bs_power = metrics::dbm_to_watts(*p);
  for (const double p : get_per_user(j, "max_power_dbm", users, issues)) {
    cfg.max_power.push_back(metrics::dbm_to_watts(p));
  }

  cfg.sar = sar::SarConstraintSet::none(users);
  if (j.contains("sar")) {
    const auto& s = j.at("sar");
    if (!s.is_object()) {
      issues.add("sar", "expected an object");
    } else if (s.contains("per_user")) {
      const auto& pu = s.at("per_user");
      if (!pu.is_array() || pu.size() != users) {
        issues.add("sar.per_user", "expected one list per user");
      } else {
        for (std::size_t k = 0; k < users; ++k) {
          cfg.sar.users[k] = parse_sar_list(pu[k], "sar.per_user[" + std::to_string(k) + "]", issues);
        }
      }
    } else if (s.contains("matrices")) {
      cfg.sar = sar::SarConstraintSet::shared(users, parse_sar_list(s.at("matrices"), "sar.matrices", issues));
    } else {
      issues.add("sar", "expected \"matrices\" or \"per_user\"");
    }
  }

  if (j.contains("channel")) {
    const auto& c = j.at("channel");
    if (!c.is_object()) {
      issues.add("channel", "expected an object");
    } else {
      if (c.contains("statistics_file")) {
        if (c.at("statistics_file").is_string()) {
          cfg.channel.statistics_file = base_dir / c.at("statistics_file").get<std::string>();
        } else {
          issues.add("channel.statistics_file", "expected a string");
        }
      }
      if (const auto d = get_number(c, "decay", issues, false)) {
        if (*d >= 0.0) {
          cfg.channel.decay = *d;
        } else {
          issues.add("channel.decay", "must be >= 0");
        }
      }
      if (c.contains("seed")) {
        if (c.at("seed").is_number_unsigned()) {
          cfg.channel.seed = c.at("seed").get<std::uint64_t>();
        } else {
          issues.add("channel.seed", "expected a nonnegative integer");
        }
      }
    }
  }

  if (j.contains("solver")) parse_solver(j.at("solver"), cfg.solver, issues);
  if (const auto n = get_number(j, "monte_carlo_samples", issues, false)) {
    if (*n >= 1.0 && std::floor(*n) == *n) {
      cfg.monte_carlo_samples = static_cast<int>(*n);
    } else {
      issues.add("monte_carlo_samples", "must be a positive integer");
    }
  }
  if (j.contains("master_seed")) {
    if (j.at("master_seed").is_number_unsigned()) {
      cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    } else {
      issues.add("master_seed", "expected a nonnegative integer");
    }
  }

  if (issues.empty() && cfg.num_receive >= 1) {
    try {
      for (auto& w : cfg.sar.validate(cfg.num_transmit)) cfg.warnings.push_back(std::move(w));
    } catch (const InvalidInput& e) {
      issues.add("sar", e.what());
    }
  }
  if (!issues.empty()) issues.raise();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string describe_scenario(const ScenarioConfig& cfg) {
  json j;
  j["receive_antennas"] = cfg.num_receive;
  j["transmit_antennas"] = cfg.num_transmit;
  j["bandwidth_hz"] = cfg.bandwidth;
  j["noise_power_dbm"] = to_dbm(cfg.noise_power);
  j["path_loss_db"] = cfg.path_loss_db;
  j["amplifier_inefficiency"] = cfg.amplifier_inefficiency;
  std::vector<double> pc;
  for (const double p : cfg.static_user_power) pc.push_back(to_dbm(p));
  j["static_user_power_dbm"] = pc;
  j["static_bs_power_dbm"] = to_dbm(cfg.static_bs_power);
  std::vector<double> pmax;
  for (const double p : cfg.max_power) pmax.push_back(to_dbm(p));
  j["max_power_dbm"] = pmax;
  json sar = json::array();
  for (const auto& user : cfg.sar.users) {
    json list = json::array();
    for (const auto& c : user) {
      list.push_back({{"name", c.name}, {"limit_w_per_kg", c.limit}, {"entries", complex_matrix_json(c.matrix)}});
    }
    sar.push_back(list);
  }
  j["sar"] = {{"per_user", sar}};
  if (cfg.channel.statistics_file) {
    j["channel"] = {{"statistics_file", cfg.channel.statistics_file->string()}};
  } else {
    j["channel"] = {{"decay", cfg.channel.decay}, {"seed", cfg.channel.seed}};
  }
  const auto& o = cfg.solver;
  j["solver"] = {{"eta_tol", o.eta_tol},
                 {"dual_tol", o.dual_tol},
                 {"dual_accept_tol", o.dual_accept_tol},
                 {"ao_tol", o.ao_tol},
                 {"ao_step_tol", o.ao_step_tol},
                 {"price_floor", o.price_floor},
                 {"fixed_point_tol", o.fixed_point.tol},
                 {"max_outer", o.max_outer},
                 {"max_dual", o.max_dual},
                 {"max_ao", o.max_ao},
                 {"fixed_point_max_iter", o.fixed_point.max_iter},
                 {"subgradient_step", o.subgradient_step},
                 {"dual_method", o.dual_method == optimizer::DualMethod::kFrozenGammaNewton ? "newton" : "subgradient"}};
  j["monte_carlo_samples"] = cfg.monte_carlo_samples;
  j["master_seed"] = cfg.master_seed;
  return j.dump(2);
}

channel::ChannelStatistics load_statistics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read statistics file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": parse error: " + e.what());
  }
  Issues issues;
  channel::ChannelStatistics stats;
  if (const auto m = get_number(j, "receive_antennas", issues)) stats.num_receive = static_cast<Eigen::Index>(*m);
  if (!j.contains("users") || !j.at("users").is_array()) {
    issues.add("users", "expected a list");
  } else {
    for (std::size_t k = 0; k < j.at("users").size(); ++k) {
      const auto& u = j.at("users")[k];
      const std::string f = "users[" + std::to_string(k) + "]";
      channel::UserStatistics us;
      if (!u.is_object() || !u.contains("receive_basis") || !u.contains("transmit_basis") || !u.contains("coupling")) {
        issues.add(f, "needs receive_basis, transmit_basis and coupling");
        continue;
      }
      us.receive_basis = parse_complex_matrix(u.at("receive_basis"), f + ".receive_basis", issues);
      us.transmit_basis = parse_complex_matrix(u.at("transmit_basis"), f + ".transmit_basis", issues);
      const Matrix omega = parse_complex_matrix(u.at("coupling"), f + ".coupling", issues);
      us.coupling = omega.real();
      stats.users.push_back(std::move(us));
    }
  }
  if (!issues.empty()) issues.raise();
  try {
    stats.validate(1e-8);
  } catch (const InvalidInput& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return stats;
}

void save_statistics(const channel::ChannelStatistics& stats, const std::filesystem::path& path) {
  json j;
  j["receive_antennas"] = stats.num_receive;
  j["users"] = json::array();
  for (const auto& u : stats.users) {
    json coupling = json::array();
    for (Eigen::Index r = 0; r < u.coupling.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < u.coupling.cols(); ++c) row.push_back(u.coupling(r, c));
      coupling.push_back(row);
    }
    j["users"].push_back({{"receive_basis", complex_matrix_json(u.receive_basis)},
                          {"transmit_basis", complex_matrix_json(u.transmit_basis)},
                          {"coupling", coupling}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write statistics file " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace sarprec::experiments
