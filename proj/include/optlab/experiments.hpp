#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <optlab/csv.hpp>

namespace optlab {

// FNV-1a, the hash used for config and output fingerprints in manifests
std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);

struct RunReport {
  std::vector<std::string> outputs;  // files written, manifest.json last
  std::string out_dir;
  int runs = 0;
};

// Executes the experiment described by a JSON config and writes per-run CSVs
// plus manifest.json under out_root/<config stem>/. A seed override replaces
// the config's base seed; workers <= 0 means one thread per available core.
// Re-running with the same config, seed, and build rewrites the CSVs byte for
// byte; wall-clock timing lives only in the manifest.
RunReport run_config(const std::string& config_path, const std::string& out_root,
                     const std::uint64_t* seed_override = nullptr, int workers = 1);

// CSV-driven fitting entry points shared with the command-line tool; each
// returns the result table as CSV text.
// columns in: optimizer, P_nonembd, lr, rank (rank 1 = best)
std::string fit_lr_table(const csv::Table& in);
// columns in: optimizer, C_pfh, loss
std::string fit_loss_table(const csv::Table& in);
// both tables carry C_pfh, loss; target rows are matched against baseline
std::string multiplier_table(const csv::Table& baseline, const csv::Table& target);
// single eigenvalue column, rows ordered by index
std::string spectrum_table(const csv::Table& in);

// renders one SVG for the named kind from the given CSV files
std::string render_plot(const std::string& kind, const std::vector<std::string>& csv_paths);

}  // namespace optlab
