// SPDX-License-Identifier: Apache-2.0
#include "cornersim/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <sstream>

#include "cornersim/errors.hpp"

namespace cornersim {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& value, int line, const std::string& key) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError("line " + std::to_string(line) + ": '" + key + "' expects a real, got '" +
                          value + "'",
                      line, key);
  }
  return out;
}

long long parse_integer(const std::string& value, int line, const std::string& key) {
  long long out = 0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("line " + std::to_string(line) + ": '" + key +
                          "' expects an integer, got '" + value + "'",
                      line, key);
  }
  return out;
}

bool parse_bool(const std::string& value, int line, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("line " + std::to_string(line) + ": '" + key + "' expects true or false",
                    line, key);
}

[[noreturn]] void fail(int line, const std::string& key, const std::string& why) {
  std::string where = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
  throw ConfigError(where + key + ": " + why, line, key);
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

bool source_admits_ring(const SourceSpec& source, const Ring& ring) {
  if (const auto* an = std::get_if<Annular>(&source)) return ring.r_hi <= an->r_inner;
  return false;
}

}  // namespace

void SweepConfig::validate() const {
  if (!(delta_min > 0.0 && delta_min < delta_max && delta_max < 1.0)) {
    fail(0, "delta_min", "need 0 < delta_min < delta_max < 1");
  }
  if (num_delta < 2) fail(0, "num_delta", "need at least 2 points");
  if (n_t < 1) fail(0, "n_t", "must be >= 1");
  if (n_theta < 4 || n_theta % 4 != 0) fail(0, "n_theta", "must be a positive multiple of 4");
  if (threads < 1) fail(0, "threads", "must be >= 1");
  const Regime regime = classify_contrast(contrast);
  if (regime == Regime::LimitMinusOne || regime == Regime::LimitMinusThird) {
    fail(0, "kappa", std::string("limit contrast excluded (") + to_string(regime) + ")");
  }
  try {
    validate_source(source);
  } catch (const ParamError& e) {
    fail(0, "source", e.what());
  }
  if (ring && !(ring->r_lo > 0.0 && ring->r_lo < ring->r_hi && ring->r_hi < 1.0)) {
    fail(0, "ring_r_lo", "need 0 < ring_r_lo < ring_r_hi < 1");
  }
}

SweepConfig parse_config(const std::string& text) {
  std::map<std::string, std::pair<std::string, int>> entries;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'", line, body);
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key", line, key);
    if (value.empty()) fail(line, key, "empty value");
    if (!entries.emplace(key, std::make_pair(value, line)).second) {
      fail(line, key, "duplicate key");
    }
  }

  static const char* const kKnown[] = {
      "sigma_plus", "sigma_minus", "kappa",      "delta_min",        "delta_max",
      "num_delta",  "grid_scale",  "n_t",        "n_theta",          "source",
      "source_threshold", "source_r_inner", "source_amplitude", "ring_r_lo", "ring_r_hi",
      "output_dir", "seed",        "write_vtk",  "threads"};
  for (const auto& [key, entry] : entries) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown),
                     [&](const char* k) { return key == k; }) == std::end(kKnown)) {
      fail(entry.second, key, "unknown key");
    }
  }

  auto has = [&](const char* key) { return entries.count(key) > 0; };
  auto real = [&](const char* key) {
    const auto& e = entries.at(key);
    return parse_real(e.first, e.second, key);
  };
  auto integer = [&](const char* key, long long lo, long long hi) {
    const auto& e = entries.at(key);
    const long long v = parse_integer(e.first, e.second, key);
    if (v < lo || v > hi) fail(e.second, key, "out of range");
    return v;
  };
  auto line_of = [&](const char* key) { return has(key) ? entries.at(key).second : 0; };

  SweepConfig cfg;
  const double sigma_plus = has("sigma_plus") ? real("sigma_plus") : 1.0;
  if (!(sigma_plus > 0.0)) fail(line_of("sigma_plus"), "sigma_plus", "must be positive");
  if (has("sigma_minus") == has("kappa")) {
    fail(std::max(line_of("sigma_minus"), line_of("kappa")), "kappa",
         "give exactly one of sigma_minus or kappa");
  }
  const char* contrast_key = has("kappa") ? "kappa" : "sigma_minus";
  const double sigma_minus = has("kappa") ? real("kappa") * sigma_plus : real("sigma_minus");
  if (!(sigma_minus < 0.0)) fail(line_of(contrast_key), contrast_key, "must be negative");
  cfg.contrast = Contrast(sigma_plus, sigma_minus);
  const Regime regime = classify_contrast(cfg.contrast);
  if (regime == Regime::LimitMinusOne || regime == Regime::LimitMinusThird) {
    fail(line_of(contrast_key), contrast_key,
         std::string("limit contrast excluded (") + to_string(regime) + ")");
  }

  if (has("delta_min")) cfg.delta_min = real("delta_min");
  if (has("delta_max")) cfg.delta_max = real("delta_max");
  if (!(cfg.delta_min > 0.0 && cfg.delta_min < 1.0)) {
    fail(line_of("delta_min"), "delta_min", "must lie in (0, 1)");
  }
  if (!(cfg.delta_max > 0.0 && cfg.delta_max < 1.0)) {
    fail(line_of("delta_max"), "delta_max", "must lie in (0, 1)");
  }
  if (!(cfg.delta_min < cfg.delta_max)) {
    fail(std::max(line_of("delta_min"), line_of("delta_max")), "delta_max",
         "must exceed delta_min");
  }
  if (has("num_delta")) cfg.num_delta = static_cast<int>(integer("num_delta", 2, 1000000));
  if (has("grid_scale")) {
    const auto& e = entries.at("grid_scale");
    if (e.first == "linear") {
      cfg.grid_scale = GridScale::LinearOneMinusDelta;
    } else if (e.first == "log") {
      cfg.grid_scale = GridScale::LogInDelta;
    } else {
      fail(e.second, "grid_scale", "expected 'linear' or 'log'");
    }
  }
  if (has("n_t")) cfg.n_t = static_cast<int>(integer("n_t", 1, 1 << 20));
  if (has("n_theta")) {
    cfg.n_theta = static_cast<int>(integer("n_theta", 4, 1 << 20));
    if (cfg.n_theta % 4 != 0) {
      fail(line_of("n_theta"), "n_theta", "must be a multiple of 4 so theta = pi/4 is a grid line");
    }
  }

  std::string source_kind = "halfplane";
  if (has("source")) source_kind = entries.at("source").first;
  const double amplitude = has("source_amplitude") ? real("source_amplitude") : 100.0;
  if (source_kind == "halfplane") {
    if (has("source_r_inner")) fail(line_of("source_r_inner"), "source_r_inner", "needs source = annular");
    cfg.source = HalfPlaneX{has("source_threshold") ? real("source_threshold") : 0.5, amplitude};
  } else if (source_kind == "annular") {
    if (has("source_threshold")) {
      fail(line_of("source_threshold"), "source_threshold", "needs source = halfplane");
    }
    const double r_inner = has("source_r_inner") ? real("source_r_inner") : 0.9;
    if (!(r_inner > 0.0 && r_inner < 1.0)) {
      fail(line_of("source_r_inner"), "source_r_inner", "must lie in (0, 1)");
    }
    cfg.source = Annular{r_inner, amplitude};
  } else {
    fail(line_of("source"), "source", "expected 'halfplane' or 'annular'");
  }

  if (has("ring_r_lo") != has("ring_r_hi")) {
    fail(std::max(line_of("ring_r_lo"), line_of("ring_r_hi")), has("ring_r_lo") ? "ring_r_hi" : "ring_r_lo",
         "ring needs both ring_r_lo and ring_r_hi");
  }
  if (has("ring_r_lo")) {
    const Ring ring{real("ring_r_lo"), real("ring_r_hi")};
    if (!(ring.r_lo > 0.0 && ring.r_lo < ring.r_hi && ring.r_hi < 1.0)) {
      fail(line_of("ring_r_hi"), "ring_r_hi", "need 0 < ring_r_lo < ring_r_hi < 1");
    }
    cfg.ring = ring;
  }
  if (has("output_dir")) cfg.output_dir = entries.at("output_dir").first;
  if (has("seed")) {
    cfg.seed = static_cast<std::uint64_t>(integer("seed", 0, std::numeric_limits<long long>::max()));
  }
  if (has("write_vtk")) {
    const auto& e = entries.at("write_vtk");
    cfg.write_vtk = parse_bool(e.first, e.second, "write_vtk");
  }
  if (has("threads")) cfg.threads = static_cast<int>(integer("threads", 1, 256));
  cfg.validate();
  return cfg;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read config " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::vector<double> delta_grid(const SweepConfig& config) {
  const int n = config.num_delta;
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    if (config.grid_scale == GridScale::LogInDelta) {
      const double lo = std::log(config.delta_min);
      const double hi = std::log(config.delta_max);
      out[k] = std::exp(lo + t * (hi - lo));
    } else {
      out[k] = config.delta_min + t * (config.delta_max - config.delta_min);
    }
  }
  out.front() = config.delta_min;
  out.back() = config.delta_max;
  return out;
}

const char* to_string(SolveStatus status) noexcept {
  return status == SolveStatus::Ok ? "Ok" : "NearSingular";
}

SweepRecord evaluate_delta(const SweepConfig& config, double delta, FemSolution* solution_out) {
  SweepRecord rec;
  rec.delta = delta;
  rec.one_minus_delta = 1.0 - delta;

  auto mesh = std::make_shared<const AnnulusMesh>(
      build_annulus_mesh(delta, config.n_t, config.n_theta));
  const SparseSymMatrix k = assemble_stiffness(*mesh, config.contrast);
  const ReducedSystem system = apply_dirichlet(k, assemble_load(*mesh, config.source), mesh);

  std::optional<IndefiniteFactorization> lu;
  try {
    lu.emplace(system.matrix);
  } catch (const SingularSystemError&) {
    rec.status = SolveStatus::NearSingular;
    rec.smallest_singular = 0.0;
    return rec;
  }
  try {
    rec.smallest_singular = smallest_singular(system.matrix, *lu).value;
  } catch (const ConvergenceError&) {
    // Left absent; the solve below is unaffected.
  }

  FemSolution solution;
  try {
    solution = solve_direct(system, *lu);
  } catch (const SingularSystemError&) {
    rec.status = SolveStatus::NearSingular;
    return rec;
  }
  rec.h1_seminorm = h1_seminorm(solution);
  rec.l2_norm = l2_norm(solution);

  if (config.ring && config.ring->r_lo > delta && source_admits_ring(config.source, *config.ring) &&
      classify_contrast(config.contrast) == Regime::CriticalInterval) {
    try {
      const SingularCoefficients c =
          extract_singular_coefficients(solution, *config.ring, make_spectral_data(config.contrast));
      rec.c_plus = c.c_plus;
      rec.c_minus = c.c_minus;
    } catch (const FitError&) {
      // Ring too thin for this mu: coefficients stay absent.
    }
  }
  if (solution_out) *solution_out = std::move(solution);
  return rec;
}

std::vector<SweepRecord> run_sweep(const SweepConfig& config) {
  config.validate();
  const std::vector<double> deltas = delta_grid(config);
  std::vector<SweepRecord> records(deltas.size());

  if (config.write_vtk) std::filesystem::create_directories(config.output_dir);
  auto work = [&](std::size_t k) {
    if (!config.write_vtk) {
      records[k] = evaluate_delta(config, deltas[k]);
      return;
    }
    FemSolution solution;
    records[k] = evaluate_delta(config, deltas[k], &solution);
    if (records[k].status == SolveStatus::Ok) {
      char name[64];
      std::snprintf(name, sizeof name, "field_%04zu.vtk", k);
      write_field_vtk(solution, *solution.mesh,
                      (std::filesystem::path(config.output_dir) / name).string());
    }
  };

  if (config.threads <= 1) {
    for (std::size_t k = 0; k < deltas.size(); ++k) work(k);
    return records;
  }
  // Strided partition; each task writes only its own slots.
  std::vector<std::future<void>> tasks;
  const auto stride = static_cast<std::size_t>(config.threads);
  for (std::size_t t = 0; t < stride; ++t) {
    tasks.push_back(std::async(std::launch::async, [&, t] {
      for (std::size_t k = t; k < deltas.size(); k += stride) work(k);
    }));
  }
  for (auto& task : tasks) task.get();
  return records;
}

std::vector<double> detect_peaks(const std::vector<SweepRecord>& records,
                                 double prominence_factor) {
  if (!(prominence_factor >= 1.0)) throw ParamError("detect_peaks: prominence_factor must be >= 1");
  for (std::size_t k = 1; k < records.size(); ++k) {
    if (!(records[k - 1].delta < records[k].delta)) {
      throw ParamError("detect_peaks: records must be strictly ordered by delta");
    }
  }
  std::vector<double> ok_values;
  for (const auto& r : records) {
    if (r.status == SolveStatus::Ok && r.h1_seminorm) ok_values.push_back(*r.h1_seminorm);
  }
  if (ok_values.size() < 3) throw InsufficientDataError("detect_peaks: need at least 3 Ok records");
  const double threshold = prominence_factor * median(ok_values);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto value = [&](std::size_t k) {
    const auto& r = records[k];
    if (r.status == SolveStatus::NearSingular) return kInf;
    return r.h1_seminorm.value_or(-kInf);
  };

  std::vector<double> peaks;
  std::size_t k = 1;
  while (k + 1 < records.size()) {
    if (value(k) == kInf) {
      // Plateau of NearSingular records, treated as one peak.
      std::size_t end = k;
      while (end + 1 < records.size() && value(end + 1) == kInf) ++end;
      if (value(k - 1) < kInf && end + 1 < records.size()) {
        std::size_t best = k;
        for (std::size_t j = k; j <= end; ++j) {
          const double sj = records[j].smallest_singular.value_or(kInf);
          if (sj < records[best].smallest_singular.value_or(kInf)) best = j;
        }
        peaks.push_back(records[best].delta);
      }
      k = end + 1;
      continue;
    }
    const double v = value(k);
    if (v > value(k - 1) && v > value(k + 1) && v > threshold) peaks.push_back(records[k].delta);
    ++k;
  }
  return peaks;
}

ResonanceReport compare_resonances(const std::vector<double>& peaks, const Contrast& contrast,
                                   double tolerance_ln, double delta_min, double delta_max) {
  if (classify_contrast(contrast) != Regime::CriticalInterval) {
    throw RegimeError("compare_resonances: contrast outside the critical interval");
  }
  if (!(tolerance_ln >= 0.0)) throw ParamError("compare_resonances: tolerance must be >= 0");
  if (!(delta_min > 0.0 && delta_min < delta_max && delta_max < 1.0)) {
    throw ParamError("compare_resonances: need 0 < delta_min < delta_max < 1");
  }
  double smallest = delta_min;
  for (double p : peaks) {
    if (!(p > 0.0 && p < 1.0)) throw ParamError("compare_resonances: peaks must lie in (0, 1)");
    smallest = std::min(smallest, p);
  }
  // Resonances down to one spacing below the smallest delta of interest.
  const double spacing = kPi / mu_closed_form(contrast);
  const int n_max = static_cast<int>(std::ceil(-std::log(smallest) / spacing)) + 1;
  const std::vector<double> res = resonance_deltas(contrast, n_max);

  ResonanceReport report;
  std::vector<bool> hit(res.size(), false);
  for (double p : peaks) {
    std::size_t best = 0;
    for (std::size_t n = 1; n < res.size(); ++n) {
      if (std::abs(std::log(p / res[n])) < std::abs(std::log(p / res[best]))) best = n;
    }
    const ResonanceMatch m{p, static_cast<int>(best) + 1, res[best],
                           std::abs(std::log(p / res[best]))};
    if (m.ln_mismatch <= tolerance_ln) {
      report.matches.push_back(m);
      hit[best] = true;
    } else {
      report.unmatched.push_back(m);
    }
  }
  for (std::size_t n = 0; n < res.size(); ++n) {
    if (res[n] >= delta_min && res[n] <= delta_max && !hit[n]) {
      report.missed.push_back(static_cast<int>(n) + 1);
    }
  }
  return report;
}

std::string export_csv(const std::vector<SweepRecord>& records) {
  std::string out = kCsvHeader;
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : records) {
    out += format_real(r.delta) + ',' + format_real(r.one_minus_delta) + ',' + opt(r.h1_seminorm) +
           ',' + opt(r.l2_norm) + ',' + opt(r.smallest_singular) + ',';
    if (r.c_plus) {
      out += format_real(r.c_plus->real()) + ',' + format_real(r.c_plus->imag()) + ',';
    } else {
      out += ",,";
    }
    if (r.c_minus) {
      out += format_real(r.c_minus->real()) + ',' + format_real(r.c_minus->imag()) + ',';
    } else {
      out += ",,";
    }
    out += to_string(r.status);
    out += '\n';
  }
  return out;
}

void write_csv(const std::vector<SweepRecord>& records, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << export_csv(records);
  if (!os) throw IoError("write failed for " + path);
}

std::vector<SweepRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ParamError("parse_csv: bad header");
  std::vector<SweepRecord> records;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 10) throw ParamError("parse_csv: expected 10 fields");
    auto num = [](const std::string& s) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParamError("parse_csv: bad number '" + s + "'");
      }
      return v;
    };
    auto opt = [&](const std::string& s) {
      return s.empty() ? std::optional<double>() : std::optional<double>(num(s));
    };
    SweepRecord r;
    r.delta = num(f[0]);
    r.one_minus_delta = num(f[1]);
    r.h1_seminorm = opt(f[2]);
    r.l2_norm = opt(f[3]);
    r.smallest_singular = opt(f[4]);
    if (!f[5].empty() || !f[6].empty()) r.c_plus = Complex(num(f[5]), num(f[6]));
    if (!f[7].empty() || !f[8].empty()) r.c_minus = Complex(num(f[7]), num(f[8]));
    if (f[9] == "Ok") {
      r.status = SolveStatus::Ok;
    } else if (f[9] == "NearSingular") {
      r.status = SolveStatus::NearSingular;
    } else {
      throw ParamError("parse_csv: bad status '" + f[9] + "'");
    }
    records.push_back(r);
  }
  return records;
}

std::string export_field_vtk(const FemSolution& solution, const AnnulusMesh& mesh) {
  if (solution.values.size() != static_cast<Eigen::Index>(mesh.num_vertices())) {
    throw ParamError("export_field_vtk: field size does not match the mesh");
  }
  std::string out = export_mesh(mesh, MeshFormat::VtkLegacy);
  out += "POINT_DATA " + std::to_string(mesh.num_vertices()) + "\n";
  out += "SCALARS u double 1\n";
  out += "LOOKUP_TABLE default\n";
  for (Eigen::Index v = 0; v < solution.values.size(); ++v) {
    out += format_real(solution.values[v]);
    out += '\n';
  }
  return out;
}

void write_field_vtk(const FemSolution& solution, const AnnulusMesh& mesh,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << export_field_vtk(solution, mesh);
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace cornersim
