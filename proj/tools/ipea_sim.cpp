// ipea-sim: command-line front end for the phase estimation simulator.
//
//   ipea-sim run <config-file> [--seed N] [--out PATH] [--format csv|json]
//   ipea-sim fig4 | fig5 | montecarlo [flags]
//
// Exit codes: 0 success, 2 parse error, 3 numerical contract violation.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ipea/ipea.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitContract = 3;

struct OutputFlags {
  std::string out;
  std::string format;
};

void add_output_flags(CLI::App* cmd, OutputFlags& flags) {
  cmd->add_option("--out", flags.out, "Write results to PATH instead of stdout");
  cmd->add_option("--format", flags.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

void add_noise_flag(CLI::App* cmd, std::vector<double>& noise) {
  cmd->add_option("--noise", noise, "Distinguishability p and angle jitter sigma (deg)")->expected(2);
}

ipea::NoiseSpec noise_from(const std::vector<double>& v) {
  if (v.empty()) return ipea::NoiseSpec::none();
  ipea::NoiseSpec n{v[0], v[1]};
  n.validate();
  return n;
}

ipea::ProviderKind provider_from(const std::string& s) {
  return s == "matrix" ? ipea::ProviderKind::matrix : ipea::ProviderKind::photonic;
}

void write_output(const ipea::Table& table, ipea::OutputFormat format, const std::string& path) {
  const std::string text = ipea::emit(table, format);
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file '" + path + "'");
  f << text;
}

ipea::OutputFormat format_from(const std::string& flag, ipea::OutputFormat fallback) {
  if (flag == "csv") return ipea::OutputFormat::csv;
  if (flag == "json") return ipea::OutputFormat::json;
  return fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative phase estimation simulator"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::uint64_t run_seed = 0;
  OutputFlags run_out;
  auto* run = app.add_subcommand("run", "Run an experiment file");
  run->add_option("config", config_path, "Experiment file")->required();
  auto* run_seed_opt = run->add_option("--seed", run_seed, "Override the file's seed");
  add_output_flags(run, run_out);

  // fig4
  ipea::Fig4Options fig4;
  std::string fig4_provider = "photonic";
  std::vector<double> fig4_noise;
  bool fig4_physical = false;
  OutputFlags fig4_out;
  auto* f4 = app.add_subcommand("fig4", "Two-HWP phase table (12 settings, 3 bits, input |R>)");
  f4->add_option("--seed", fig4.seed, "Master seed");
  f4->add_option("--reps", fig4.reps, "Odd repetitions per bit")->check(CLI::PositiveNumber);
  f4->add_option("--provider", fig4_provider, "Controlled-power realization")->check(CLI::IsMember({"matrix", "photonic"}));
  f4->add_flag("--exact", fig4.exact, "Exact-probability mode (no sampling)");
  f4->add_flag("--physical-jones", fig4_physical, "Keep the -i global factor of each HWP");
  add_noise_flag(f4, fig4_noise);
  add_output_flags(f4, fig4_out);

  // fig5
  ipea::Fig5Options fig5;
  std::vector<double> fig5_noise;
  OutputFlags fig5_out;
  auto* f5 = app.add_subcommand("fig5", "Eigenstate generation panels with tomography");
  f5->add_option("--seed", fig5.seed, "Master seed");
  f5->add_option("--shots", fig5.shots, "Shots per tomography basis (0 = exact expectations)");
  f5->add_option("--resamples", fig5.resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  add_noise_flag(f5, fig5_noise);
  add_output_flags(f5, fig5_out);

  // montecarlo
  ipea::MonteCarloOptions mc;
  std::string mc_provider = "matrix";
  std::vector<double> mc_noise;
  OutputFlags mc_out;
  auto* mcc = app.add_subcommand("montecarlo", "Random-phase success-rate study");
  mcc->add_option("--bits", mc.bits, "Bits m")->check(CLI::Range(1, 16));
  mcc->add_option("--trials", mc.trials, "Random phases per configuration")->check(CLI::PositiveNumber);
  mcc->add_option("--seed", mc.seed, "Master seed");
  mcc->add_option("--provider", mc_provider, "Controlled-power realization")->check(CLI::IsMember({"matrix", "photonic"}));
  mcc->add_option("--reps", mc.reps, "Odd repetition counts to compare")->expected(1, 16);
  mcc->add_flag("--dyadic", mc.dyadic_only, "Draw phases from the m-bit grid");
  add_noise_flag(mcc, mc_noise);
  add_output_flags(mcc, mc_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (run->parsed()) {
      std::ifstream f(config_path, std::ios::binary);
      if (!f) {
        std::cerr << "error: cannot read config file '" << config_path << "'\n";
        return kExitParse;
      }
      std::stringstream buf;
      buf << f.rdbuf();
      auto cfg = ipea::parse_experiment(buf.str());
      if (run_seed_opt->count() > 0) cfg.seed = run_seed;
      write_output(ipea::run_experiment(cfg), format_from(run_out.format, cfg.output), run_out.out);
    } else if (f4->parsed()) {
      fig4.provider = provider_from(fig4_provider);
      fig4.noise = noise_from(fig4_noise);
      fig4.convention = fig4_physical ? ipea::JonesConvention::physical : ipea::JonesConvention::real;
      write_output(ipea::to_table(ipea::run_fig4(fig4)), format_from(fig4_out.format, ipea::OutputFormat::csv),
                   fig4_out.out);
    } else if (f5->parsed()) {
      fig5.noise = noise_from(fig5_noise);
      write_output(ipea::to_table(ipea::run_fig5(fig5)), format_from(fig5_out.format, ipea::OutputFormat::csv),
                   fig5_out.out);
    } else if (mcc->parsed()) {
      mc.provider = provider_from(mc_provider);
      mc.noise = noise_from(mc_noise);
      write_output(ipea::to_table(ipea::run_montecarlo(mc)), format_from(mc_out.format, ipea::OutputFormat::csv),
                   mc_out.out);
    }
  } catch (const ipea::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ipea::ContractError& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return kExitContract;
  } catch (const ipea::CapacityError& e) {
    std::cerr << "capacity exceeded: " << e.what() << '\n';
    return kExitContract;
  } catch (const ipea::DegeneracyError& e) {
    std::cerr << "degenerate spectrum: " << e.what() << '\n';
    return kExitContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
