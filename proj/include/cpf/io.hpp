// Run configuration (INI-style sections of key = value) and the text output
// formats: ledger CSV and field snapshots. All numbers are written in the
// shortest decimal form that round-trips, independent of locale.
#pragma once

#include "cpf/constitutive.hpp"
#include "cpf/diagnostics.hpp"
#include "cpf/errors.hpp"
#include "cpf/state.hpp"
#include "cpf/stepper.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cpf {

// ---------------------------------------------------------------------------
// Number formatting.

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), end);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Run configuration.

enum class InitialKind { constant, noise, cosine, tanh, snapshot };

struct InitialSpec {
  InitialKind kind = InitialKind::noise;
  double psi_mean = 0.0;
  double amplitude = 0.05;  // noise half-width, cosine amplitude, or tanh amplitude
  double theta = 1.0;       // initial theta (constant field); must be > 0
  double width = 0.5;       // tanh interface width
  double position = 0.5;    // tanh interface location as a fraction of Lx
  int mode = 1;             // cosine mode along x
  std::uint64_t seed = 0;
  std::string path;         // snapshot file
};

struct RunSpec {
  double t_end = 1.0;
  int ledger_every = 1;     // steps between CSV rows (first and last rows always written)
  int snapshot_every = 0;   // steps between snapshots; 0 writes only initial and final
  std::optional<double> convergence_tol;
  int convergence_window = 1;
  double kappa_star = 0.0;  // H3 band [1/kappa*, kappa*]; 0 disables the flag
};

struct SteadySpec {
  std::optional<double> m0;  // default: mean of the initial psi
  std::optional<double> h0;  // default: F of the initial state
  std::string guess = "constant";  // constant | initial
  double tol = 1e-11;
  int probe_modes = 8;
};

struct SweepSpec {
  std::string parameter = "dt";  // dt | m0h0
  std::vector<double> values;    // dt values
  std::vector<double> m0_values;
  std::vector<double> h0_values;
  int workers = 0;  // 0: hardware concurrency
};

struct RunConfig {
  int dim = 1;
  std::array<int, 2> cells{64, 1};
  std::array<double, 2> lengths{1.0, 1.0};
  ModelConfig model;
  InitialSpec initial;
  StepperConfig stepper;
  RunSpec run;
  SteadySpec steady;
  SweepSpec sweep;
  int verify_samples = 20;
  std::string output_dir = "out";
  std::filesystem::path base_dir;  // directory of the config file, for relative paths

  Grid grid() const { return dim == 1 ? Grid::line(cells[0], lengths[0]) : Grid::rect(cells[0], cells[1], lengths[0], lengths[1]); }
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source) : source_(std::move(source)) {
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(source_ + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    // Line numbers for field-level messages.
    std::istringstream scan(text);
    std::string line, section;
    for (int no = 1; std::getline(scan, line); ++no) {
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == ';' || line[first] == '#') continue;
      if (line[first] == '[') {
        section = line.substr(first + 1, line.find(']') - first - 1);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(first, eq - first);
      key.erase(key.find_last_not_of(" \t") + 1);
      lines_[section + "." + key] = no;
    }
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(section + "." + key, '.'));
    if (!v) return std::nullopt;
    return *v;
  }

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) const {
    const auto it = lines_.find(section + "." + key);
    const std::string where = it == lines_.end() ? source_ : source_ + ":" + std::to_string(it->second);
    throw ConfigError(where + ": [" + section + "] " + key + ": " + msg);
  }

  double real(const std::string& section, const std::string& key, double fallback) {
    const auto s = raw(section, key);
    if (!s) return fallback;
    const auto v = parse_double(*s);
    if (!v || !std::isfinite(*v)) fail(section, key, "expected a real number, got '" + *s + "'");
    return *v;
  }

  std::optional<double> optional_real(const std::string& section, const std::string& key) {
    if (!raw(section, key)) return std::nullopt;
    return real(section, key, 0.0);
  }

  long long integer(const std::string& section, const std::string& key, long long fallback) {
    const auto s = raw(section, key);
    if (!s) return fallback;
    long long v = 0;
    std::string t = *s;
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t\r") + 1);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
      fail(section, key, "expected an integer, got '" + *s + "'");
    return v;
  }

  std::vector<double> reals(const std::string& section, const std::string& key, std::vector<double> fallback) {
    const auto s = raw(section, key);
    if (!s) return fallback;
    std::vector<double> out;
    std::string item;
    std::string text = *s;
    for (char& c : text)
      if (c == ',') c = ' ';
    std::istringstream in(text);
    while (in >> item) {
      const auto v = parse_double(item);
      if (!v || !std::isfinite(*v)) fail(section, key, "expected a list of real numbers, got '" + *s + "'");
      out.push_back(*v);
    }
    if (out.empty()) fail(section, key, "empty list");
    return out;
  }

  std::string word(const std::string& section, const std::string& key, const std::string& fallback,
                   const std::vector<std::string>& allowed = {}) {
    const auto s = raw(section, key);
    if (!s) return fallback;
    std::string t = *s;
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t\r") + 1);
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), t) == allowed.end()) {
      std::string options;
      for (const auto& a : allowed) options += (options.empty() ? "" : ", ") + a;
      fail(section, key, "unknown selector '" + t + "' (expected one of: " + options + ")");
    }
    return t;
  }

  bool boolean(const std::string& section, const std::string& key, bool fallback) {
    const std::string w = word(section, key, fallback ? "true" : "false", {"true", "false", "1", "0", "yes", "no"});
    return w == "true" || w == "1" || w == "yes";
  }

  /// Every key in the file must have been consumed.
  void reject_unknown() const {
    for (const auto& [sec, sub] : tree_) {
      if (sub.empty() && !sub.data().empty()) {
        const auto it = lines_.find("." + sec);
        throw ConfigError(source_ + (it == lines_.end() ? "" : ":" + std::to_string(it->second)) +
                          ": key '" + sec + "' outside of any section");
      }
      for (const auto& [key, val] : sub) {
        if (!used_.count(sec + "." + key)) {
          const auto it = lines_.find(sec + "." + key);
          throw ConfigError(source_ + (it == lines_.end() ? "" : ":" + std::to_string(it->second)) + ": [" + sec +
                            "] unknown key '" + key + "'");
        }
      }
    }
  }

 private:
  std::string source_;
  boost::property_tree::ptree tree_;
  std::map<std::string, int> lines_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Parses configuration text. `source` names the origin in error messages.
inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>",
                              const std::filesystem::path& base_dir = {}) {
  detail::ConfigReader r(text, source);
  RunConfig c;
  c.base_dir = base_dir;

  c.dim = static_cast<int>(r.integer("grid", "dim", 1));
  if (c.dim != 1 && c.dim != 2) r.fail("grid", "dim", "must be 1 or 2");
  {
    const auto cells = r.reals("grid", "cells", {64.0});
    const auto lengths = r.reals("grid", "lengths", {1.0});
    if (cells.size() != static_cast<std::size_t>(c.dim)) r.fail("grid", "cells", "expected one count per axis");
    if (lengths.size() != static_cast<std::size_t>(c.dim)) r.fail("grid", "lengths", "expected one length per axis");
    for (int a = 0; a < c.dim; ++a) {
      if (!(cells[a] >= 1.0) || cells[a] != std::floor(cells[a]) || cells[a] > 1e7)
        r.fail("grid", "cells", "cell counts must be positive integers");
      if (!(lengths[a] > 0.0)) r.fail("grid", "lengths", "lengths must be positive");
      c.cells[a] = static_cast<int>(cells[a]);
      c.lengths[a] = lengths[a];
    }
  }

  {
    const std::string phi = r.word("model", "phi", "double_well", {"double_well", "polynomial"});
    c.model.phi = phi == "double_well" ? PhiKind::double_well : PhiKind::polynomial;
    if (c.model.phi == PhiKind::polynomial) {
      c.model.phi_coeffs = r.reals("model", "phi_coeffs", {});
      if (c.model.phi_coeffs.empty()) r.fail("model", "phi_coeffs", "required when phi = polynomial");
    } else {
      r.raw("model", "phi_coeffs");
    }
    c.model.lambda_coeffs = r.reals("model", "lambda", {0.0, 0.0, 1.0});
    if (c.model.lambda_coeffs.size() > 3) r.fail("model", "lambda", "lambda is a polynomial of degree at most 2");
    const std::string b = r.word("model", "b", "inverse", {"inverse", "log"});
    c.model.b = b == "inverse" ? BKind::inverse : BKind::log;
    try {
      (void)make_model(c.model);
    } catch (const std::invalid_argument& e) {
      r.fail("model", "phi", e.what());
    }
  }

  {
    auto& in = c.initial;
    const std::string kind = r.word("initial", "type", "noise", {"constant", "noise", "cosine", "tanh", "snapshot"});
    in.kind = kind == "constant" ? InitialKind::constant
              : kind == "noise"  ? InitialKind::noise
              : kind == "cosine" ? InitialKind::cosine
              : kind == "tanh"   ? InitialKind::tanh
                                 : InitialKind::snapshot;
    in.psi_mean = r.real("initial", "psi_mean", 0.0);
    in.amplitude = r.real("initial", "amplitude", 0.05);
    in.theta = r.real("initial", "theta", 1.0);
    if (!(in.theta > 0.0)) r.fail("initial", "theta", "initial theta must be strictly positive");
    in.width = r.real("initial", "width", 0.5);
    if (!(in.width > 0.0)) r.fail("initial", "width", "must be positive");
    in.position = r.real("initial", "position", 0.5);
    in.mode = static_cast<int>(r.integer("initial", "mode", 1));
    const long long seed = r.integer("initial", "seed", 0);
    if (seed < 0) r.fail("initial", "seed", "must be nonnegative");
    in.seed = static_cast<std::uint64_t>(seed);
    in.path = r.word("initial", "path", "");
    if (in.kind == InitialKind::snapshot && in.path.empty()) r.fail("initial", "path", "required when type = snapshot");
  }

  {
    auto& s = c.stepper;
    const std::string scheme = r.word("stepper", "scheme", "implicit", {"implicit", "imex"});
    s.scheme = scheme == "implicit" ? Scheme::fully_implicit : Scheme::imex;
    s.dt = r.real("stepper", "dt", 1e-3);
    if (!(s.dt > 0.0)) r.fail("stepper", "dt", "must be positive");
    s.newton_tol = r.real("stepper", "newton_tol", 1e-10);
    if (!(s.newton_tol > 0.0)) r.fail("stepper", "newton_tol", "must be positive");
    s.max_newton_iters = static_cast<int>(r.integer("stepper", "max_newton_iters", 25));
    if (s.max_newton_iters < 1) r.fail("stepper", "max_newton_iters", "must be at least 1");
    s.linear_tol = r.real("stepper", "linear_tol", 1e-12);
    if (!(s.linear_tol > 0.0)) r.fail("stepper", "linear_tol", "must be positive");
  }

  {
    auto& run = c.run;
    run.t_end = r.real("run", "t_end", 1.0);
    if (!(run.t_end >= 0.0)) r.fail("run", "t_end", "must be nonnegative");
    run.ledger_every = static_cast<int>(r.integer("run", "ledger_every", 1));
    if (run.ledger_every < 1) r.fail("run", "ledger_every", "must be at least 1");
    run.snapshot_every = static_cast<int>(r.integer("run", "snapshot_every", 0));
    if (run.snapshot_every < 0) r.fail("run", "snapshot_every", "must be nonnegative");
    run.convergence_tol = r.optional_real("run", "convergence_tol");
    if (run.convergence_tol && !(*run.convergence_tol > 0.0)) r.fail("run", "convergence_tol", "must be positive");
    run.convergence_window = static_cast<int>(r.integer("run", "convergence_window", 1));
    if (run.convergence_window < 1) r.fail("run", "convergence_window", "must be at least 1");
    run.kappa_star = r.real("run", "kappa", 0.0);
    if (run.kappa_star != 0.0 && !(run.kappa_star > 1.0)) r.fail("run", "kappa", "must exceed 1 (or 0 to disable)");
  }

  {
    auto& st = c.steady;
    st.m0 = r.optional_real("steady", "m0");
    st.h0 = r.optional_real("steady", "h0");
    st.guess = r.word("steady", "guess", "constant", {"constant", "initial"});
    st.tol = r.real("steady", "tol", 1e-11);
    if (!(st.tol > 0.0)) r.fail("steady", "tol", "must be positive");
    st.probe_modes = static_cast<int>(r.integer("steady", "probe_modes", 8));
    if (st.probe_modes < 1) r.fail("steady", "probe_modes", "must be at least 1");
  }

  {
    auto& sw = c.sweep;
    sw.parameter = r.word("sweep", "parameter", "dt", {"dt", "m0h0"});
    sw.values = r.reals("sweep", "values", {});
    for (double v : sw.values)
      if (!(v > 0.0)) r.fail("sweep", "values", "dt values must be positive");
    sw.m0_values = r.reals("sweep", "m0_values", {});
    sw.h0_values = r.reals("sweep", "h0_values", {});
    sw.workers = static_cast<int>(r.integer("sweep", "workers", 0));
    if (sw.workers < 0) r.fail("sweep", "workers", "must be nonnegative");
  }

  {
    const long long samples = r.integer("verify", "samples", 20);
    if (samples < 0) r.fail("verify", "samples", "must be nonnegative");
    c.verify_samples = static_cast<int>(samples);
  }

  c.output_dir = r.word("output", "dir", "out");
  r.reject_unknown();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Snapshots.

struct Snapshot {
  State state;
  double time = 0.0;
};

/// Text snapshot: header with grid metadata and time, then psi and theta, one value per line, row-major.
inline std::string format_snapshot(const State& s, double time) {
  const Grid& g = s.grid();
  std::string out = "cpf-snapshot 1\n";
  out += "dim " + std::to_string(g.dim()) + "\n";
  out += "cells";
  for (int a = 0; a < g.dim(); ++a) out += " " + std::to_string(g.cells(a));
  out += "\nlengths";
  for (int a = 0; a < g.dim(); ++a) out += " " + format_double(g.length(a));
  out += "\ntime " + format_double(time) + "\n";
  out += "psi\n";
  for (double v : s.psi.values()) out += format_double(v) + "\n";
  out += "theta\n";
  for (double v : s.theta.values()) out += format_double(v) + "\n";
  return out;
}

inline Snapshot parse_snapshot(const std::string& text, const std::string& source = "<snapshot>") {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw std::runtime_error(source + ": unexpected end of snapshot");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto bad = [&](const std::string& msg) { return std::runtime_error(source + ":" + std::to_string(line_no) + ": " + msg); };
  auto fields = [&](const std::string& expect) {
    std::istringstream ls(next());
    std::string tag;
    ls >> tag;
    if (tag != expect) throw bad("expected '" + expect + "'");
    std::vector<std::string> items;
    for (std::string w; ls >> w;) items.push_back(w);
    return items;
  };
  auto num = [&](const std::string& w) {
    const auto v = parse_double(w);
    if (!v) throw bad("malformed number '" + w + "'");
    return *v;
  };

  if (next() != "cpf-snapshot 1") throw bad("not a cpf snapshot (missing 'cpf-snapshot 1' header)");
  const auto dim_f = fields("dim");
  if (dim_f.size() != 1 || (dim_f[0] != "1" && dim_f[0] != "2")) throw bad("dim must be 1 or 2");
  const int dim = dim_f[0] == "1" ? 1 : 2;
  const auto cells = fields("cells");
  const auto lengths = fields("lengths");
  if (cells.size() != static_cast<std::size_t>(dim) || lengths.size() != static_cast<std::size_t>(dim))
    throw bad("expected one entry per axis");
  std::array<int, 2> n{1, 1};
  std::array<double, 2> l{1.0, 1.0};
  for (int a = 0; a < dim; ++a) {
    const double c = num(cells[a]);
    if (!(c >= 1.0) || c != std::floor(c)) throw bad("cell counts must be positive integers");
    n[a] = static_cast<int>(c);
    l[a] = num(lengths[a]);
  }
  const Grid g = dim == 1 ? Grid::line(n[0], l[0]) : Grid::rect(n[0], n[1], l[0], l[1]);
  const auto time_f = fields("time");
  if (time_f.size() != 1) throw bad("time expects one value");
  const double time = num(time_f[0]);

  auto read_field = [&](const std::string& name) {
    if (next() != name) throw bad("expected '" + name + "'");
    std::vector<double> v(g.size());
    for (auto& x : v) x = num(next());
    return Field(g, std::move(v));
  };
  Field psi = read_field("psi");
  Field theta = read_field("theta");
  try {
    return {State(std::move(psi), std::move(theta)), time};
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(source + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Snapshot read_snapshot(const std::filesystem::path& path) { return parse_snapshot(read_text_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Ledger CSV.

inline constexpr const char* kLedgerHeader =
    "t,mass,enthalpy,energy,lagrangian,dissipation,identity_residual,theta_min,theta_max,grad_mu,grad_theta,"
    "newton_iters";

inline std::string format_ledger_row(const LedgerRow& r) {
  std::string s;
  for (double v : {r.t, r.mass, r.enthalpy, r.energy, r.lagrangian, r.dissipation, r.identity_residual, r.theta_min,
                   r.theta_max, r.grad_mu, r.grad_theta}) {
    s += format_double(v);
    s += ',';
  }
  s += std::to_string(r.newton_iters);
  return s;
}

/// Rows at indices 0, every, 2*every, ... and always the last row.
inline std::string format_ledger_csv(const Ledger& ledger, int every = 1) {
  std::string out = std::string(kLedgerHeader) + "\n";
  const std::size_t n = ledger.size();
  for (std::size_t i = 0; i < n; ++i)
    if (i % static_cast<std::size_t>(std::max(every, 1)) == 0 || i + 1 == n) out += format_ledger_row(ledger[i]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Initial data.

inline State make_initial_state(const RunConfig& c) {
  const Grid g = c.grid();
  const InitialSpec& in = c.initial;
  switch (in.kind) {
    case InitialKind::constant: return State::constant(g, in.psi_mean, in.theta);
    case InitialKind::noise: {
      std::mt19937_64 rng(in.seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Field psi(g);
      for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = in.psi_mean + in.amplitude * u(rng);
      return State(std::move(psi), Field(g, in.theta));
    }
    case InitialKind::cosine: {
      const double k = in.mode * std::numbers::pi / g.length(0);
      return State(Field::sample(g, [&](double x, double) { return in.psi_mean + in.amplitude * std::cos(k * x); }),
                   Field(g, in.theta));
    }
    case InitialKind::tanh: {
      const double x0 = in.position * g.length(0);
      return State(
          Field::sample(g, [&](double x, double) { return in.psi_mean + in.amplitude * std::tanh((x - x0) / in.width); }),
          Field(g, in.theta));
    }
    case InitialKind::snapshot: {
      std::filesystem::path p = in.path;
      if (p.is_relative() && !c.base_dir.empty()) p = c.base_dir / p;
      Snapshot snap = read_snapshot(p);
      if (!(snap.state.grid() == g)) throw ConfigError("[initial] path: snapshot grid does not match [grid]");
      return snap.state;
    }
  }
  throw ConfigError("[initial] type: unsupported");
}

}  // namespace cpf
