#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sarprec/errors.hpp"
#include "sarprec/experiments.hpp"

namespace sarprec::experiments {

namespace {

// 17 significant digits round-trip every double exactly.
std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", x);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(',', start);
    out.push_back(line.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::runtime_error(where + ": bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": bad integer '" + s + "'");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace

std::string format_csv(const SweepResult& result) {
  std::string text = std::string(kCsvHeader) + "\n";
  for (const auto& r : result.rows) {
    if (r.ok() && r.q && r.context) {
      const auto report = sar::check_constraints(*r.q, r.context->sar, r.context->power_budget, 1e-6);
      if (!report.pass) {
        throw NumericConsistency("row " + r.scheme + " at " + fmt(r.sweep_value) + " violates its constraints");
      }
    }
    text += r.sweep_var + "," + fmt(r.sweep_value) + "," + r.scheme + "," + fmt(r.ee_asymptotic) + "," +
            fmt(r.ee_mc) + "," + fmt(r.ee_mc_stderr) + "," + fmt(r.se_asymptotic) + "," + fmt(r.tx_power) + "," +
            (r.alpha ? fmt(*r.alpha) : std::string()) + "," + std::to_string(r.outer_iters) + "," +
            std::to_string(r.dual_iters) + "," + std::to_string(r.ao_iters) + "," + fmt(r.wall_ms) + "," +
            sanitize(r.status) + "\n";
  }
  return text;
}

void write_csv(const SweepResult& result, const std::filesystem::path& path) { write_text(path, format_csv(result)); }

SweepResult read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error(path.string() + ": unexpected header");
  SweepResult result;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = split(line);
    if (f.size() != 14) throw std::runtime_error(where + ": expected 14 fields, got " + std::to_string(f.size()));
    SweepRow r;
    r.sweep_var = f[0];
    r.sweep_value = parse_double(f[1], where);
    r.scheme = f[2];
    r.ee_asymptotic = parse_double(f[3], where);
    r.ee_mc = parse_double(f[4], where);
    r.ee_mc_stderr = parse_double(f[5], where);
    r.se_asymptotic = parse_double(f[6], where);
    r.tx_power = parse_double(f[7], where);
    if (!f[8].empty()) r.alpha = parse_double(f[8], where);
    r.outer_iters = parse_int(f[9], where);
    r.dual_iters = parse_int(f[10], where);
    r.ao_iters = parse_int(f[11], where);
    r.wall_ms = parse_double(f[12], where);
    r.status = f[13];
    result.rows.push_back(std::move(r));
  }
  return result;
}

void write_de_csv(const DeValidationReport& report, const std::filesystem::path& path) {
  std::string text = "index,se_asymptotic_bits_s_hz,se_mc_bits_s_hz,se_mc_stderr,relative_error,tx_power_w\n";
  for (const auto& r : report.rows) {
    text += std::to_string(r.index) + "," + fmt(r.se_asymptotic) + "," + fmt(r.se_mc) + "," + fmt(r.se_mc_stderr) +
            "," + fmt(r.relative_error) + "," + fmt(r.tx_power) + "\n";
  }
  write_text(path, text);
}

}  // namespace sarprec::experiments
