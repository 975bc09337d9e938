// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: configuration, the delta sweep, peak detection and
// CSV / VTK emission.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cornersim/fem.hpp"
#include "cornersim/mesh.hpp"
#include "cornersim/spectral.hpp"

namespace cornersim {

enum class GridScale { LinearOneMinusDelta, LogInDelta };

struct SweepConfig {
  Contrast contrast = Contrast(1.0, -1.0 / 2.0);
  double delta_min = 0.05;
  double delta_max = 0.9;
  int num_delta = 60;
  GridScale grid_scale = GridScale::LinearOneMinusDelta;
  int n_t = 128;
  int n_theta = 128;
  SourceSpec source = HalfPlaneX{0.5, 100.0};
  std::optional<Ring> ring;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  bool write_vtk = false;
  int threads = 1;

  /// Throws ConfigError (line 0) when an invariant is violated.
  void validate() const;
};

/// Line-oriented `key = value` document with `#` comments. Recognised keys:
///   sigma_plus, sigma_minus, kappa (exactly one of sigma_minus / kappa),
///   delta_min, delta_max, num_delta, grid_scale (linear | log), n_t, n_theta,
///   source (halfplane | annular), source_threshold, source_r_inner,
///   source_amplitude, ring_r_lo, ring_r_hi, output_dir, seed, write_vtk, threads.
/// Unknown keys, duplicates and malformed values raise ConfigError.
SweepConfig parse_config(const std::string& text);

/// Reads and parses a configuration file; IoError if unreadable.
SweepConfig load_config(const std::string& path);

/// Sweep abscissae in increasing order, endpoints exact.
std::vector<double> delta_grid(const SweepConfig& config);

enum class SolveStatus { Ok, NearSingular };

const char* to_string(SolveStatus status) noexcept;

struct SweepRecord {
  double delta = 0.0;
  double one_minus_delta = 0.0;
  std::optional<double> h1_seminorm;
  std::optional<double> l2_norm;
  std::optional<double> smallest_singular;
  std::optional<Complex> c_plus;
  std::optional<Complex> c_minus;
  SolveStatus status = SolveStatus::Ok;
};

/// Full pipeline at one delta. Uses only `config` and `delta`; no shared state.
/// If `solution_out` is non-null and the solve succeeds, the field is stored there.
SweepRecord evaluate_delta(const SweepConfig& config, double delta,
                           FemSolution* solution_out = nullptr);

/// All grid points, ordered by delta. Per-delta VTK files are written to
/// output_dir when write_vtk is set.
std::vector<SweepRecord> run_sweep(const SweepConfig& config);

/// Deltas of interior local maxima of h1_seminorm exceeding
/// prominence_factor * median(Ok values). A run of consecutive NearSingular
/// records is one peak located at its smallest smallest_singular.
/// Throws InsufficientDataError with fewer than 3 Ok records, ParamError if
/// prominence_factor < 1 or records are unordered.
std::vector<double> detect_peaks(const std::vector<SweepRecord>& records,
                                 double prominence_factor);

struct ResonanceMatch {
  double peak_delta;
  int n;
  double resonance_delta;
  double ln_mismatch;  // |ln peak - ln resonance|
};

struct ResonanceReport {
  std::vector<ResonanceMatch> matches;   // within tolerance
  std::vector<ResonanceMatch> unmatched;  // nearest resonance beyond tolerance
  std::vector<int> missed;                // resonance indices in range with no matching peak
  bool passed() const noexcept { return unmatched.empty() && missed.empty(); }
};

/// Matches each peak to the nearest resonance delta^n; resonances in
/// [delta_min, delta_max] without a peak within tolerance_ln are missed.
/// Throws RegimeError outside the critical interval.
ResonanceReport compare_resonances(const std::vector<double>& peaks, const Contrast& contrast,
                                   double tolerance_ln, double delta_min, double delta_max);

inline constexpr const char* kCsvHeader =
    "delta,one_minus_delta,h1_seminorm,l2_norm,smallest_singular,re_c_plus,im_c_plus,"
    "re_c_minus,im_c_minus,status";

std::string export_csv(const std::vector<SweepRecord>& records);
void write_csv(const std::vector<SweepRecord>& records, const std::string& path);

/// Parses export_csv output back into records; ParamError on malformed rows.
std::vector<SweepRecord> parse_csv(const std::string& text);

/// Legacy ASCII VTK with the nodal field `u` and the region of each cell.
std::string export_field_vtk(const FemSolution& solution, const AnnulusMesh& mesh);
void write_field_vtk(const FemSolution& solution, const AnnulusMesh& mesh,
                     const std::string& path);

}  // namespace cornersim
