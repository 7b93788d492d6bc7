#pragma once

// Experiment harness: the line-oriented experiment file format, the canned
// reproductions (two-HWP phase table, eigenstate-generation panels, random-phase
// error-bound study), and CSV/JSON emission.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipea/controlled.hpp"
#include "ipea/photonics.hpp"
#include "ipea/qmath.hpp"
#include "ipea/qpe.hpp"
#include "ipea/tomography.hpp"

namespace ipea {

// ---------------------------------------------------------------------------
// Configuration

enum class Mode { ipea, qpe_full, collapse, montecarlo };
enum class OutputFormat { csv, json };

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line)
      : std::runtime_error(message + ", line " + std::to_string(line)), line_{line} {}
  [[nodiscard]] int line() const noexcept { return line_; }

 private:
  int line_;
};

struct ExperimentConfig {
  Mode mode = Mode::ipea;
  std::vector<WaveplateSpec> plates;        ///< used when no explicit matrix is given
  std::optional<Unitary> explicit_unitary;  ///< `unitary matrix ...`
  int bits = 3;
  int reps = 11;
  std::uint64_t trials = 1;  ///< 0 selects exact-probability mode
  std::uint64_t seed = 0;
  NoiseSpec noise;
  ProviderKind provider = ProviderKind::photonic;
  Polarization eigenstate = Polarization::R;
  OutputFormat output = OutputFormat::csv;

  [[nodiscard]] bool has_unitary() const { return explicit_unitary.has_value() || !plates.empty(); }

  /// Nominal unitary; with jitter, each call with an rng perturbs the plate angles.
  [[nodiscard]] Unitary unitary(Rng* jitter_rng = nullptr) const {
    if (explicit_unitary) return *explicit_unitary;
    if (plates.empty()) throw ContractError("experiment has no unitary");
    if (jitter_rng != nullptr && noise.angle_jitter_sigma_deg > 0.0)
      return compose_waveplates(apply_noise(plates, noise, *jitter_rng));
    return compose_waveplates(plates);
  }
};

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::ipea: return "ipea";
    case Mode::qpe_full: return "qpe_full";
    case Mode::collapse: return "collapse";
    case Mode::montecarlo: return "montecarlo";
  }
  return "?";
}

inline std::unique_ptr<ControlledPowerProvider> make_provider(ProviderKind kind) {
  if (kind == ProviderKind::matrix) return std::make_unique<MatrixProvider>();
  return std::make_unique<PhotonicProvider>();
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) return std::nullopt;
  }
  return value;
}

}  // namespace detail

/// Parses the experiment file format: one directive per line, `#` starts a
/// comment, keywords are case-sensitive, each directive may appear once.
///
///   mode <ipea|qpe_full|collapse|montecarlo>
///   unitary hwp <deg> [hwp|qwp <deg> ...]   |   unitary matrix <re,im> x4 (row-major)
///   bits <m>   reps <odd>   trials <n>   seed <u64>   noise <p> <sigma_deg>
///   provider <matrix|photonic>   eigenstate <R|L|H|V|D|A>   output <csv|json>
inline ExperimentConfig parse_experiment(std::string_view text) {
  ExperimentConfig cfg;
  std::vector<std::string> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;

    const std::string key(tok[0]);
    const auto fail = [&](const std::string& msg) { throw ParseError(msg, line_no); };
    const auto arity = [&](std::size_t n) {
      if (tok.size() != n + 1) fail("'" + key + "' expects " + std::to_string(n) + " argument" + (n == 1 ? "" : "s"));
    };
    static const char* const kKeywords[] = {"mode",  "unitary",  "bits",       "reps",  "trials", "seed",
                                            "noise", "provider", "eigenstate", "output"};
    if (std::find(std::begin(kKeywords), std::end(kKeywords), key) == std::end(kKeywords)) fail("unknown keyword '" + key + "'");
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) fail("duplicate directive '" + key + "'");
    seen.push_back(key);

    if (key == "mode") {
      arity(1);
      if (tok[1] == "ipea") cfg.mode = Mode::ipea;
      else if (tok[1] == "qpe_full") cfg.mode = Mode::qpe_full;
      else if (tok[1] == "collapse") cfg.mode = Mode::collapse;
      else if (tok[1] == "montecarlo") cfg.mode = Mode::montecarlo;
      else fail("unknown mode '" + std::string(tok[1]) + "'");
    } else if (key == "unitary") {
      if (tok.size() < 2) fail("'unitary' expects 'hwp <deg> ...' or 'matrix <entries>'");
      if (tok[1] == "matrix") {
        std::vector<double> reals;
        for (std::size_t i = 2; i < tok.size(); ++i) {
          std::string_view t = tok[i];
          std::size_t start = 0;
          while (start <= t.size()) {
            const std::size_t comma = t.find(',', start);
            const auto part = t.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            const auto v = detail::parse_number<double>(part);
            if (!v) fail("invalid matrix entry '" + std::string(t) + "'");
            reals.push_back(*v);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
          }
        }
        if (reals.size() != 8) fail("'unitary matrix' expects 8 reals (re,im for 4 entries, row-major)");
        ComplexMatrix m{{{reals[0], reals[1]}, {reals[2], reals[3]}}, {{reals[4], reals[5]}, {reals[6], reals[7]}}};
        const double dev = unitarity_deviation(m);
        if (dev > tol::kConstruction) {
          char buf[96];
          std::snprintf(buf, sizeof buf, "unitarity violation: max |U^dagger U - I| = %.3g exceeds 1e-10", dev);
          fail(buf);
        }
        cfg.explicit_unitary = Unitary(std::move(m));
      } else {
        if ((tok.size() - 1) % 2 != 0) fail("'unitary' waveplate list must be pairs of '<hwp|qwp> <deg>'");
        for (std::size_t i = 1; i + 1 < tok.size(); i += 2) {
          WaveplateKind kind{};
          if (tok[i] == "hwp") kind = WaveplateKind::hwp;
          else if (tok[i] == "qwp") kind = WaveplateKind::qwp;
          else fail("unknown waveplate '" + std::string(tok[i]) + "'");
          const auto deg = detail::parse_number<double>(tok[i + 1]);
          if (!deg) fail("invalid waveplate angle '" + std::string(tok[i + 1]) + "'");
          cfg.plates.emplace_back(kind, *deg);
        }
      }
    } else if (key == "bits") {
      arity(1);
      const auto v = detail::parse_number<long long>(tok[1]);
      if (!v) fail("bits must be an integer");
      if (*v < 1) fail("bits must be >= 1");
      if (*v > kMaxIteration) fail("bits must be <= 16");
      cfg.bits = static_cast<int>(*v);
    } else if (key == "reps") {
      arity(1);
      const auto v = detail::parse_number<long long>(tok[1]);
      if (!v) fail("reps must be an integer");
      if (*v < 1) fail("reps must be >= 1");
      if (*v % 2 == 0) fail("reps must be odd");
      if (*v > 1'000'001) fail("reps is too large");
      cfg.reps = static_cast<int>(*v);
    } else if (key == "trials") {
      arity(1);
      const auto v = detail::parse_number<std::uint64_t>(tok[1]);
      if (!v) fail("trials must be a non-negative integer (0 = exact-probability mode)");
      cfg.trials = *v;
    } else if (key == "seed") {
      arity(1);
      const auto v = detail::parse_number<std::uint64_t>(tok[1]);
      if (!v) fail("seed must be an unsigned 64-bit integer");
      cfg.seed = *v;
    } else if (key == "noise") {
      arity(2);
      const auto p = detail::parse_number<double>(tok[1]);
      const auto sigma = detail::parse_number<double>(tok[2]);
      if (!p || *p < 0.0 || *p > 1.0) fail("noise distinguishability must be in [0, 1]");
      if (!sigma || *sigma < 0.0) fail("noise angle sigma must be >= 0 degrees");
      cfg.noise = {*p, *sigma};
    } else if (key == "provider") {
      arity(1);
      if (tok[1] == "matrix") cfg.provider = ProviderKind::matrix;
      else if (tok[1] == "photonic") cfg.provider = ProviderKind::photonic;
      else fail("provider must be 'matrix' or 'photonic'");
    } else if (key == "eigenstate") {
      arity(1);
      const auto p = parse_polarization(tok[1]);
      if (!p) fail("eigenstate must be one of R L H V D A");
      cfg.eigenstate = *p;
    } else if (key == "output") {
      arity(1);
      if (tok[1] == "csv") cfg.output = OutputFormat::csv;
      else if (tok[1] == "json") cfg.output = OutputFormat::json;
      else fail("output must be 'csv' or 'json'");
    }
  }
  if (cfg.mode != Mode::montecarlo && !cfg.has_unitary()) throw ParseError("missing 'unitary' directive", line_no);
  if (cfg.mode == Mode::montecarlo && cfg.trials == 0) throw ParseError("montecarlo mode needs trials >= 1", line_no);
  return cfg;
}

// ---------------------------------------------------------------------------
// Tables and emission

using Cell = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// 12 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  struct {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_double(d); }
    std::string operator()(const std::string& s) const { return s; }
  } visitor;
  return std::visit(visitor, c);
}

inline std::string emit_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out.push_back(',');
    out += t.columns[i];
  }
  out.push_back('\n');
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      out += format_cell(row[i]);
    }
    out.push_back('\n');
  }
  return out;
}

/// Array of objects keyed by column name. Doubles are rounded to 12
/// significant digits so JSON and CSV carry the same values.
inline std::string emit_json(const Table& t) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size() && i < t.columns.size(); ++i) {
      const auto& c = row[i];
      auto& slot = obj[t.columns[i]];
      if (std::holds_alternative<std::monostate>(c)) slot = nullptr;
      else if (const auto* b = std::get_if<bool>(&c)) slot = *b;
      else if (const auto* n = std::get_if<std::int64_t>(&c)) slot = *n;
      else if (const auto* d = std::get_if<double>(&c)) slot = std::strtod(format_double(*d).c_str(), nullptr);
      else slot = std::get<std::string>(c);
    }
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

inline std::string emit(const Table& t, OutputFormat format) {
  return format == OutputFormat::csv ? emit_csv(t) : emit_json(t);
}

// ---------------------------------------------------------------------------
// IPEA records (two-HWP phase table and `mode ipea`)

struct RunRecord {
  std::optional<double> theta1_deg;
  std::optional<double> theta2_deg;
  double phi_oracle = 0.0;
  PhaseEstimate estimate;
  double circ_error = 0.0;
  double p_branch_frac = 1.0;
  bool success = false;
};

inline Table to_table(const std::vector<RunRecord>& records) {
  Table t;
  t.columns = {"theta1_deg", "theta2_deg", "phi_oracle", "bits", "phi_est", "circ_error", "p_branch_frac", "success"};
  for (const auto& r : records) {
    const auto opt = [](const std::optional<double>& v) -> Cell { return v ? Cell{*v} : Cell{}; };
    t.rows.push_back({opt(r.theta1_deg), opt(r.theta2_deg), r.phi_oracle, r.estimate.bit_string(), r.estimate.value(),
                      r.circ_error, r.p_branch_frac, r.success});
  }
  return t;
}

/// Estimate is a nearest m-bit value: error at most 2^-(m+1).
inline bool nearest_estimate(double circ_error, int m) { return circ_error <= std::ldexp(1.0, -(m + 1)) + 1e-12; }

struct IpeaRecordOptions {
  int bits = 3;
  int reps = 11;
  bool exact = false;
  NoiseSpec noise;
};

/// One IPEA run against `u` with eigenstate `psi`, scored against the oracle phase `phi_oracle`.
inline RunRecord ipea_record(const Unitary& u, const StateVector& psi, double phi_oracle,
                             const ControlledPowerProvider& provider, const IpeaRecordOptions& opt, Rng& rng) {
  const EigenproblemSpec spec(u, psi);
  RunRecord rec;
  rec.phi_oracle = phi_oracle;
  if (opt.exact) {
    const auto r = ipea_run_exact(spec, opt.bits, provider, opt.noise.distinguishability);
    rec.estimate = r.estimate;
    rec.p_branch_frac = r.p_branch_fraction;
  } else {
    const auto r = ipea_run(spec, opt.bits, opt.reps, provider, rng, opt.noise.distinguishability);
    rec.estimate = r.estimate;
    rec.p_branch_frac = static_cast<double>(r.p_branch_count) / static_cast<double>(r.iterations);
  }
  rec.circ_error = circular_distance(rec.estimate.value(), phi_oracle);
  rec.success = nearest_estimate(rec.circ_error, opt.bits);
  return rec;
}

inline constexpr double kFig4SecondPlateDeg[12] = {0, 15, 30, 45, 60, 75, 90, 105, 120, 135, 150, 165};

struct Fig4Options {
  std::uint64_t seed = 42;
  int reps = 11;
  ProviderKind provider = ProviderKind::photonic;
  bool exact = false;
  NoiseSpec noise;
  JonesConvention convention = JonesConvention::real;
};

/// Twelve two-HWP unitaries (first plate 0 deg, second at 0..165 deg), input |R>,
/// three-bit IPEA. Row i draws from stream split(i) of the seed.
inline std::vector<RunRecord> run_fig4(const Fig4Options& opt) {
  opt.noise.validate();
  const auto provider = make_provider(opt.provider);
  const StateVector psi = polarization_state(Polarization::R);
  std::vector<RunRecord> out;
  const Rng master(opt.seed);
  for (std::size_t i = 0; i < std::size(kFig4SecondPlateDeg); ++i) {
    Rng rng = master.split(i);
    const std::vector<WaveplateSpec> plates = {WaveplateSpec::half(0.0), WaveplateSpec::half(kFig4SecondPlateDeg[i])};
    const Unitary nominal = compose_waveplates(plates, opt.convention);
    const Unitary actual =
        opt.noise.angle_jitter_sigma_deg > 0.0 ? compose_waveplates(apply_noise(plates, opt.noise, rng), opt.convention) : nominal;
    auto rec = ipea_record(actual, psi, oracle_eigenphase(nominal, psi), *provider,
                           {3, opt.reps, opt.exact, opt.noise}, rng);
    rec.theta1_deg = plates[0].angle_deg;
    rec.theta2_deg = plates[1].angle_deg;
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eigenstate generation panels

struct Fig5Panel {
  char label = 'a';
  double hwp_deg = 0.0;
  Polarization input = Polarization::H;
  int outcome = 0;
  double eigenphase = 0.0;           ///< 0 for eigenvalue +1, 0.5 for -1
  double outcome_probability = 0.0;  ///< probability of this control readout
  DensityMatrix collapsed;           ///< target state after the readout
  StateVector ideal;                 ///< eigenvector of the nominal U for `eigenphase`
  double fidelity_exact = 0.0;       ///< <ideal|collapsed|ideal>
  ReconstructionReport tomography;
};

struct Fig5Options {
  std::uint64_t seed = 42;
  std::uint64_t shots = 0;  ///< per basis; 0 = exact expectations
  std::uint64_t resamples = 200;
  NoiseSpec noise;
};

inline constexpr double kFig5PlateDeg[3] = {30.0, 45.0, 67.5};

/// Nine panels: U in {hwp(30), hwp(45), hwp(67.5)} x {(|H>, 0), (|H>, 1), (|V>, 0)}.
/// A single HWP squares to I, so one control qubit (m = 1) is the whole circuit.
inline std::vector<Fig5Panel> run_fig5(const Fig5Options& opt) {
  opt.noise.validate();
  struct Case {
    Polarization input;
    int outcome;
  };
  const Case cases[3] = {{Polarization::H, 0}, {Polarization::H, 1}, {Polarization::V, 0}};
  std::vector<Fig5Panel> out;
  const Rng master(opt.seed);
  for (int c = 0; c < 3; ++c) {
    for (int u = 0; u < 3; ++u) {
      const std::size_t index = static_cast<std::size_t>(c * 3 + u);
      Rng rng = master.split(index);
      const std::vector<WaveplateSpec> plate = {WaveplateSpec::half(kFig5PlateDeg[u])};
      const Unitary nominal = compose_waveplates(plate);
      const Unitary actual =
          opt.noise.angle_jitter_sigma_deg > 0.0 ? compose_waveplates(apply_noise(plate, opt.noise, rng)) : nominal;
      const StateVector input = polarization_state(cases[c].input);
      const auto y = static_cast<std::size_t>(cases[c].outcome);
      const double phase = 0.5 * cases[c].outcome;
      const auto ideal = oracle_eigenpair_near_phase(nominal, phase).eigenvector;

      std::optional<DensityMatrix> collapsed;
      double prob = 0.0;
      if (opt.noise.coherent()) {
        if (auto r = collapse_branch(actual, input, 1, y)) {
          collapsed = density_from_state(r->collapsed_target);
          prob = r->outcome_probability;
        }
      } else if (auto r = collapse_branch_noisy(actual, input, 1, y, opt.noise.distinguishability)) {
        collapsed = r->collapsed_target;
        prob = r->outcome_probability;
      }
      if (!collapsed) throw ContractError("panel readout has zero probability");
      const double f_exact = fidelity(*collapsed, ideal);
      auto report = tomograph(*collapsed, ideal, opt.shots, opt.resamples, rng);
      out.push_back({static_cast<char>('a' + index), kFig5PlateDeg[u], cases[c].input, cases[c].outcome, phase, prob,
                     *collapsed, ideal, f_exact, std::move(report)});
    }
  }
  return out;
}

inline Table to_table(const std::vector<Fig5Panel>& panels) {
  Table t;
  t.columns = {"panel",          "hwp_deg",       "input",        "outcome", "eigenphase", "outcome_probability",
               "fidelity_exact", "fidelity_tomo", "fidelity_std", "shots"};
  for (const auto& p : panels) {
    t.rows.push_back({std::string(1, p.label), p.hwp_deg, std::string(to_string(p.input)),
                      static_cast<std::int64_t>(p.outcome), p.eigenphase, p.outcome_probability, p.fidelity_exact,
                      p.tomography.fidelity_vs_ideal, p.tomography.fidelity_std,
                      static_cast<std::int64_t>(p.tomography.shots_per_basis)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Random-phase error-bound study

struct MonteCarloSummary {
  int bits = 3;
  int reps = 1;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double success_rate = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
};

/// Wilson score interval at 95%.
inline std::pair<double, double> wilson_interval(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) return {0.0, 1.0};
  constexpr double z = 1.959963984540054;
  const auto n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct MonteCarloOptions {
  int bits = 3;
  std::uint64_t trials = 10000;
  std::uint64_t seed = 42;
  ProviderKind provider = ProviderKind::matrix;
  std::vector<int> reps = {1, 11};
  bool dyadic_only = false;  ///< draw phi from the m-bit grid instead of [0, 1)
  NoiseSpec noise;
};

/// Trial t draws phi from stream split(t), realizes diag(1, e^{i 2 pi phi}) with
/// eigenstate |1>, and counts estimates within 2^-m (circularly) of phi.
inline std::vector<MonteCarloSummary> run_montecarlo(const MonteCarloOptions& opt) {
  check_bit_count(opt.bits);
  if (opt.trials == 0) throw ContractError("montecarlo needs trials >= 1");
  opt.noise.validate();
  const auto provider = make_provider(opt.provider);
  const StateVector psi = states::one();
  const double tolerance = std::ldexp(1.0, -opt.bits);
  const double grid = std::ldexp(1.0, opt.bits);
  std::vector<MonteCarloSummary> out;
  const Rng master(opt.seed);
  for (int reps : opt.reps) {
    MonteCarloSummary s;
    s.bits = opt.bits;
    s.reps = reps;
    s.trials = opt.trials;
    for (std::uint64_t t = 0; t < opt.trials; ++t) {
      Rng trial = master.split(t);
      double phi = trial.uniform();
      if (opt.dyadic_only) phi = std::floor(phi * grid) / grid;
      Rng run = trial.split(static_cast<std::uint64_t>(reps));
      const EigenproblemSpec spec(gates::phase_turns(phi), psi);
      const auto r = ipea_run(spec, opt.bits, reps, *provider, run, opt.noise.distinguishability);
      if (circular_distance(r.estimate.value(), phi) <= tolerance) ++s.successes;
    }
    s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.trials);
    std::tie(s.wilson_low, s.wilson_high) = wilson_interval(s.successes, s.trials);
    out.push_back(s);
  }
  return out;
}

inline Table to_table(const std::vector<MonteCarloSummary>& summaries) {
  Table t;
  t.columns = {"bits", "reps", "trials", "successes", "success_rate", "wilson_low", "wilson_high"};
  for (const auto& s : summaries) {
    t.rows.push_back({static_cast<std::int64_t>(s.bits), static_cast<std::int64_t>(s.reps),
                      static_cast<std::int64_t>(s.trials), static_cast<std::int64_t>(s.successes), s.success_rate,
                      s.wilson_low, s.wilson_high});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Config-driven runs

/// Runs an experiment file. Modes and their tables:
///   ipea       - one RunRecord row per trial (trials 0: one exact row)
///   qpe_full   - bits, phi_est, probability for every register outcome
///   collapse   - one row per sampled readout (trials 0: every readout, exactly)
///   montecarlo - MonteCarloSummary rows for single-shot and `reps`
inline Table run_experiment(const ExperimentConfig& cfg) {
  cfg.noise.validate();
  const Rng master(cfg.seed);
  const StateVector psi = polarization_state(cfg.eigenstate);

  switch (cfg.mode) {
    case Mode::ipea: {
      const auto provider = make_provider(cfg.provider);
      const Unitary nominal = cfg.unitary();
      const double phi = oracle_eigenphase(nominal, psi);
      std::vector<RunRecord> records;
      const IpeaRecordOptions opt{cfg.bits, cfg.reps, cfg.trials == 0, cfg.noise};
      const std::uint64_t runs = cfg.trials == 0 ? 1 : cfg.trials;
      for (std::uint64_t t = 0; t < runs; ++t) {
        Rng rng = master.split(t);
        const Unitary u = cfg.unitary(&rng);
        auto rec = ipea_record(u, psi, phi, *provider, opt, rng);
        if (!cfg.plates.empty()) rec.theta1_deg = cfg.plates[0].angle_deg;
        if (cfg.plates.size() > 1) rec.theta2_deg = cfg.plates[1].angle_deg;
        records.push_back(std::move(rec));
      }
      return to_table(records);
    }
    case Mode::qpe_full: {
      const Unitary u = cfg.unitary();
      Table t;
      t.columns = {"bits", "phi_est", "probability"};
      std::vector<double> probs;
      if (cfg.noise.coherent()) {
        probs = qpe_full_distribution(EigenproblemSpec(u, psi), cfg.bits);
      } else {
        for (std::size_t y = 0; y < (std::size_t{1} << cfg.bits); ++y) {
          const auto r = collapse_branch_noisy(u, psi, cfg.bits, y, cfg.noise.distinguishability);
          probs.push_back(r ? r->outcome_probability : 0.0);
        }
      }
      for (std::size_t y = 0; y < probs.size(); ++y) {
        const auto e = PhaseEstimate::from_index(y, cfg.bits);
        t.rows.push_back({e.bit_string(), e.value(), probs[y]});
      }
      return t;
    }
    case Mode::collapse: {
      Table t;
      t.columns = {"trial", "bits", "phi_est", "outcome_probability", "eigen_fidelity"};
      const auto add_row = [&](std::int64_t trial, const Unitary& u, const PhaseEstimate& e, double p,
                               const DensityMatrix& target) {
        const auto eig = oracle_eigenpair_near_phase(u, e.value());
        t.rows.push_back({trial, e.bit_string(), e.value(), p, fidelity(target, eig.eigenvector)});
      };
      const std::size_t outcomes = std::size_t{1} << cfg.bits;
      if (cfg.trials == 0) {
        const Unitary u = cfg.unitary();
        for (std::size_t y = 0; y < outcomes; ++y) {
          if (cfg.noise.coherent()) {
            if (auto r = collapse_branch(u, psi, cfg.bits, y))
              add_row(0, u, r->estimate, r->outcome_probability, density_from_state(r->collapsed_target));
          } else if (auto r = collapse_branch_noisy(u, psi, cfg.bits, y, cfg.noise.distinguishability)) {
            add_row(0, u, r->estimate, r->outcome_probability, r->collapsed_target);
          }
        }
        return t;
      }
      for (std::uint64_t trial = 0; trial < cfg.trials; ++trial) {
        Rng rng = master.split(trial);
        const Unitary u = cfg.unitary(&rng);
        if (cfg.noise.coherent()) {
          const auto r = collapse_run(u, psi, cfg.bits, rng);
          add_row(static_cast<std::int64_t>(trial), u, r.estimate, r.outcome_probability,
                  density_from_state(r.collapsed_target));
        } else {
          std::vector<double> probs(outcomes, 0.0);
          std::vector<std::optional<NoisyCollapseResult>> branches;
          for (std::size_t y = 0; y < outcomes; ++y) {
            branches.push_back(collapse_branch_noisy(u, psi, cfg.bits, y, cfg.noise.distinguishability));
            if (branches.back()) probs[y] = branches.back()->outcome_probability;
          }
          const auto& r = *branches[detail::sample_index(probs, rng)];
          add_row(static_cast<std::int64_t>(trial), u, r.estimate, r.outcome_probability, r.collapsed_target);
        }
      }
      return t;
    }
    case Mode::montecarlo: {
      MonteCarloOptions opt;
      opt.bits = cfg.bits;
      opt.trials = cfg.trials;
      opt.seed = cfg.seed;
      opt.provider = cfg.provider;
      opt.noise = cfg.noise;
      opt.reps = cfg.reps == 1 ? std::vector<int>{1} : std::vector<int>{1, cfg.reps};
      return to_table(run_montecarlo(opt));
    }
  }
  throw ContractError("unknown mode");
}

}  // namespace ipea
