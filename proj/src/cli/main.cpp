#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <optlab/csv.hpp>
#include <optlab/errors.hpp>
#include <optlab/experiments.hpp>

namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw optlab::IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw optlab::IoError("write failed: " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optlab: optimizer schedules, synthetic scaling runs, and fit tools"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_root = "optlab-out";
  app.add_option("--out", out_root, "output root directory")
      ->envname("OPTLAB_OUT")
      ->capture_default_str();
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "override the config's base seed");
  int workers = 0;
  app.add_option("--workers", workers, "parallel runs, 0 means all cores")
      ->capture_default_str();
  std::string format = "csv";
  app.add_option("--format", format, "table output format")
      ->check(CLI::IsMember({"csv"}))
      ->capture_default_str();

  std::string run_path;
  auto* cmd_run = app.add_subcommand("run", "execute a JSON experiment config");
  cmd_run->add_option("config", run_path, "experiment config file")->required();

  std::string div_path;
  auto* cmd_div =
      app.add_subcommand("divergence", "run a divergence-grid config (alias of run)");
  cmd_div->add_option("config", div_path, "divergence-grid config file")->required();

  std::string plot_kind;
  std::vector<std::string> plot_csvs;
  auto* cmd_plot = app.add_subcommand("plot", "render CSVs to a deterministic SVG");
  cmd_plot->add_option("kind", plot_kind, "risk-curves | fit-overlay | multiplier-bars")
      ->required();
  cmd_plot->add_option("csv", plot_csvs, "input CSV files")->required();

  std::string fit_lr_path;
  auto* cmd_fit_lr = app.add_subcommand("fit-lr", "fit the saturating learning-rate law");
  cmd_fit_lr->add_option("csv", fit_lr_path, "columns: optimizer,P_nonembd,lr,rank")->required();

  std::string fit_loss_path;
  auto* cmd_fit_loss = app.add_subcommand("fit-loss", "fit broken power laws to loss curves");
  cmd_fit_loss->add_option("csv", fit_loss_path, "columns: optimizer,C_pfh,loss")->required();

  std::string mult_baseline, mult_target;
  auto* cmd_mult = app.add_subcommand("multiplier", "compute-multiplier of target vs baseline");
  cmd_mult->add_option("baseline", mult_baseline, "columns: C_pfh,loss")->required();
  cmd_mult->add_option("target", mult_target, "columns: C_pfh,loss")->required();

  std::string spectrum_path;
  auto* cmd_spectrum = app.add_subcommand("spectrum", "fit a power-law spectrum exponent");
  cmd_spectrum->add_option("csv", spectrum_path, "column: eigenvalue")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*cmd_run || *cmd_div) {
      const std::string& path = *cmd_run ? run_path : div_path;
      const std::uint64_t* seed_override = seed_opt->count() > 0 ? &seed_flag : nullptr;
      const optlab::RunReport report = optlab::run_config(path, out_root, seed_override, workers);
      for (const std::string& f : report.outputs) std::cout << f << "\n";
      return 0;
    }
    if (*cmd_plot) {
      const std::string svg = optlab::render_plot(plot_kind, plot_csvs);
      std::error_code ec;
      fs::create_directories(out_root, ec);
      if (ec) throw optlab::IoError("cannot create output directory: " + out_root);
      const fs::path out = fs::path(out_root) / (plot_kind + ".svg");
      write_text(out, svg);
      std::cout << out.string() << "\n";
      return 0;
    }
    if (*cmd_fit_lr) {
      std::cout << optlab::fit_lr_table(optlab::csv::read_file(fit_lr_path));
      return 0;
    }
    if (*cmd_fit_loss) {
      std::cout << optlab::fit_loss_table(optlab::csv::read_file(fit_loss_path));
      return 0;
    }
    if (*cmd_mult) {
      std::cout << optlab::multiplier_table(optlab::csv::read_file(mult_baseline),
                                            optlab::csv::read_file(mult_target));
      return 0;
    }
    if (*cmd_spectrum) {
      std::cout << optlab::spectrum_table(optlab::csv::read_file(spectrum_path));
      return 0;
    }
  } catch (const optlab::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const optlab::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    // domain errors (rank-deficient fits, ambiguous inversions, ...) are bad
    // inputs, not I/O trouble
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
