// end-to-end checks of the command-line tool; the binary path arrives as the
// one positional argument from ctest
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <optlab/csv.hpp>
#include <optlab/experiments.hpp>

namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_scratch;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "cannot read " << p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(bool(out));
  out << text;
}

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = g_scratch / (tag + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args) {
  const fs::path dir = fresh_dir("io");
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd =
      "'" + g_cli + "' " + args + " > '" + out_file.string() + "' 2> '" + err_file.string() + "'";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

const char* kSweepConfig = R"({
  "kind": "kappa-sweep",
  "seed": 1,
  "seeds": 2,
  "sweep": {"kappa": [0.5, 0.9]},
  "optimizer": {"algorithm": "adana", "peak_lr": 0.003},
  "problem": {"dims": 20, "hidden": 60},
  "train": {"iterations": 200, "eval_every": 50}
})";

std::set<std::string> csv_names(const fs::path& dir) {
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".csv") names.insert(entry.path().filename().string());
  }
  return names;
}

}  // namespace

TEST_CASE("validation failures name the offending field and exit 2") {
  const fs::path dir = fresh_dir("bad");
  spit(dir / "bad.json", R"({
    "kind": "plrf-run",
    "optimizer": {"algorithm": "adana", "peak_lr": 0.001, "alpha": {"kappa": 0.0}},
    "problem": {"dims": 10},
    "train": {"iterations": 10}
  })");
  const CliResult r =
      run_cli("--out '" + dir.string() + "/out' run '" + (dir / "bad.json").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.err.find("optimizer.alpha.kappa") != std::string::npos);
}

TEST_CASE("unknown algorithm and unknown kind are validation errors") {
  const fs::path dir = fresh_dir("bad");
  spit(dir / "algo.json",
       R"({"kind": "plrf-run", "optimizer": {"algorithm": "sgdx", "peak_lr": 1.0},
           "problem": {"dims": 4}, "train": {"iterations": 1}})");
  CliResult r = run_cli("--out '" + dir.string() + "/o' run '" + (dir / "algo.json").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.err.find("optimizer.algorithm") != std::string::npos);

  spit(dir / "kind.json", R"({"kind": "mystery"})");
  r = run_cli("--out '" + dir.string() + "/o' run '" + (dir / "kind.json").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown experiment kind") != std::string::npos);
}

TEST_CASE("missing files are I/O errors with exit 3") {
  CHECK(run_cli("run /nonexistent/config.json").code == 3);
  CHECK(run_cli("spectrum /nonexistent/spec.csv").code == 3);
}

TEST_CASE("a sweep run writes per-run CSVs, a summary, and a complete manifest") {
  const fs::path dir = fresh_dir("sweep");
  const fs::path cfg = dir / "sweep.json";
  spit(cfg, kSweepConfig);

  const fs::path out1 = dir / "out1";
  const CliResult r =
      run_cli("--out '" + out1.string() + "' --workers 1 run '" + cfg.string() + "'");
  CHECK(r.code == 0);
  const fs::path run_dir = out1 / "sweep";

  const std::set<std::string> expect = {"kappa0.5_seed1.csv", "kappa0.5_seed2.csv",
                                        "kappa0.9_seed1.csv", "kappa0.9_seed2.csv",
                                        "summary.csv"};
  CHECK(csv_names(run_dir) == expect);

  // the manifest lists every output with its content hash
  const nlohmann::json manifest = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
  CHECK(manifest.at("kind") == "kappa-sweep");
  CHECK(manifest.at("seed") == 1);
  std::set<std::string> listed;
  for (const auto& e : manifest.at("outputs")) {
    const std::string name = e.at("path");
    listed.insert(name);
    const std::string bytes = slurp(run_dir / name);
    CHECK(e.at("hash") == optlab::fnv1a64_hex(bytes));
    CHECK(e.at("bytes") == bytes.size());
  }
  CHECK(listed == expect);

  // the summary carries one row per run with a recorded status
  const optlab::csv::Table summary = optlab::csv::read_file((run_dir / "summary.csv").string());
  CHECK(summary.rows.size() == 4);
  const std::size_t c_status = summary.col("status");
  for (const auto& row : summary.rows) {
    const bool known = row[c_status] == "COMPLETED" || row[c_status] == "DIVERGED";
    CHECK(known);
  }

  // rerunning the same config and seed reproduces every CSV byte for byte
  const fs::path out2 = dir / "out2";
  CHECK(run_cli("--out '" + out2.string() + "' --workers 2 run '" + cfg.string() + "'").code == 0);
  for (const std::string& name : expect) {
    CHECK_MESSAGE(slurp(run_dir / name) == slurp(out2 / "sweep" / name), "mismatch in " << name);
  }

  // stdout lists the written files, manifest last
  CHECK(r.out.find("manifest.json") != std::string::npos);
}

TEST_CASE("the output root falls back to the environment variable") {
  const fs::path dir = fresh_dir("env");
  const fs::path cfg = dir / "tiny.json";
  spit(cfg, R"({"kind": "plrf-run",
                "optimizer": {"algorithm": "adamw", "peak_lr": 0.01},
                "problem": {"dims": 8}, "train": {"iterations": 20, "eval_every": 10}})");
  const fs::path out = dir / "from_env";
  setenv("OPTLAB_OUT", out.string().c_str(), 1);
  const CliResult r = run_cli("run '" + cfg.string() + "'");
  unsetenv("OPTLAB_OUT");
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "tiny" / "run_seed1.csv"));
  CHECK(fs::exists(out / "tiny" / "manifest.json"));
}

TEST_CASE("--seed overrides the config's base seed") {
  const fs::path dir = fresh_dir("seed");
  const fs::path cfg = dir / "tiny.json";
  spit(cfg, R"({"kind": "plrf-run", "seed": 1,
                "optimizer": {"algorithm": "adamw", "peak_lr": 0.01},
                "problem": {"dims": 8}, "train": {"iterations": 20, "eval_every": 10}})");
  const fs::path out = dir / "out";
  const CliResult r = run_cli("--out '" + out.string() + "' --seed 5 run '" + cfg.string() + "'");
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "tiny" / "run_seed5.csv"));
  const nlohmann::json manifest = nlohmann::json::parse(slurp(out / "tiny" / "manifest.json"));
  CHECK(manifest.at("seed") == 5);
}

TEST_CASE("fit-loss output matches the library call byte for byte") {
  const fs::path dir = fresh_dir("fitloss");
  optlab::csv::Writer w({"optimizer", "C_pfh", "loss"});
  for (int i = 0; i < 12; ++i) {
    const double c = 0.01 * std::pow(10.0, i / 4.0);
    w.add_row({"adamw", optlab::csv::format_double(c),
               optlab::csv::format_double(0.3 + 0.4 * std::pow(c, -0.2))});
  }
  const fs::path file = dir / "losses.csv";
  w.save(file.string());

  const CliResult r = run_cli("fit-loss '" + file.string() + "'");
  CHECK(r.code == 0);
  CHECK(r.out == optlab::fit_loss_table(optlab::csv::parse(slurp(file))));
}

TEST_CASE("fit-lr runs end to end on a rank-weighted table") {
  const fs::path dir = fresh_dir("fitlr");
  optlab::csv::Writer w({"optimizer", "P_nonembd", "lr", "rank"});
  const double sizes[] = {3e4, 3e5, 3e6, 3e7, 3e8};
  for (double p : sizes) {
    const double lr = 12.8 * std::pow(1.67e4 + p, -0.515);
    w.add_row({"adamw", optlab::csv::format_double(p), optlab::csv::format_double(lr), "1"});
    w.add_row({"adamw", optlab::csv::format_double(p), optlab::csv::format_double(lr * 1.05),
               "2"});
  }
  const fs::path file = dir / "rates.csv";
  w.save(file.string());

  const CliResult r = run_cli("fit-lr '" + file.string() + "'");
  CHECK(r.code == 0);
  const optlab::csv::Table t = optlab::csv::parse(r.out);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][t.col("optimizer")] == "adamw");
  CHECK(t.num(0, t.col("d")) == doctest::Approx(-0.515).epsilon(0.05));
}

TEST_CASE("multiplier matches the library and the worked two-point example") {
  const fs::path dir = fresh_dir("mult");
  optlab::csv::Writer base({"C_pfh", "loss"});
  base.add_row({"1", "3"});
  base.add_row({"10", "2"});
  base.save((dir / "base.csv").string());
  optlab::csv::Writer tgt({"C_pfh", "loss"});
  tgt.add_row({"1", "2.5"});
  tgt.save((dir / "tgt.csv").string());

  const CliResult r =
      run_cli("multiplier '" + (dir / "base.csv").string() + "' '" + (dir / "tgt.csv").string() +
              "'");
  CHECK(r.code == 0);
  const optlab::csv::Table t = optlab::csv::parse(r.out);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.num(0, t.col("multiplier")) == doctest::Approx(3.16227766).epsilon(1e-8));
}

TEST_CASE("spectrum fits the eigenvalue decay exponent") {
  const fs::path dir = fresh_dir("spec");
  optlab::csv::Writer w({"eigenvalue"});
  for (int j = 1; j <= 200; ++j)
    w.add_row({optlab::csv::format_double(std::pow(double(j), -2.5))});
  w.save((dir / "eigs.csv").string());

  const CliResult r = run_cli("spectrum '" + (dir / "eigs.csv").string() + "'");
  CHECK(r.code == 0);
  const optlab::csv::Table t = optlab::csv::parse(r.out);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.num(0, t.col("exponent")) == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("plots are written deterministically for each kind") {
  const fs::path dir = fresh_dir("plot");
  optlab::csv::Writer run({"iteration", "risk", "samples", "wall_ms"});
  for (int t = 1; t <= 10; ++t)
    run.add_row({std::to_string(t * 100), optlab::csv::format_double(1.0 / t), "0", "0"});
  run.save((dir / "runa.csv").string());

  optlab::csv::Writer losses({"optimizer", "C_pfh", "loss"});
  for (int i = 0; i < 8; ++i) {
    const double c = std::pow(10.0, i / 2.0);
    losses.add_row({"adamw", optlab::csv::format_double(c),
                    optlab::csv::format_double(0.3 + 0.4 * std::pow(c, -0.2))});
  }
  losses.save((dir / "losses.csv").string());

  optlab::csv::Writer mult({"compute", "loss", "matched_compute", "multiplier", "efficiency"});
  mult.add_row({"1", "2.5", "3.16", "3.16", "2.16"});
  mult.save((dir / "mult.csv").string());

  const struct {
    const char* kind;
    const char* file;
  } cases[] = {{"risk-curves", "runa.csv"}, {"fit-overlay", "losses.csv"},
               {"multiplier-bars", "mult.csv"}};
  for (const auto& c : cases) {
    CAPTURE(c.kind);
    const std::string args = "--out '" + (dir / "svg").string() + "' plot " + c.kind + " '" +
                             (dir / c.file).string() + "'";
    const CliResult r1 = run_cli(args);
    CHECK(r1.code == 0);
    const fs::path svg = dir / "svg" / (std::string(c.kind) + ".svg");
    CHECK(r1.out.find(svg.string()) != std::string::npos);
    const std::string first = slurp(svg);
    CHECK(first.rfind("<svg", 0) == 0);
    CHECK(first.find("</svg>") != std::string::npos);
    CHECK(run_cli(args).code == 0);
    CHECK(slurp(svg) == first);
  }
}

TEST_CASE("plotting an empty table is a no-data validation error") {
  const fs::path dir = fresh_dir("empty");
  spit(dir / "empty.csv", "iteration,risk,samples,wall_ms\n");
  const CliResult r = run_cli("--out '" + (dir / "svg").string() + "' plot risk-curves '" +
                              (dir / "empty.csv").string() + "'");
  CHECK(r.code == 2);
  CHECK(r.err.find("no data rows") != std::string::npos);
}

TEST_CASE("the divergence subcommand runs a grid config") {
  const fs::path dir = fresh_dir("zgrid");
  spit(dir / "grid.json", R"({
    "kind": "divergence-grid",
    "seed": 3,
    "pairs": [{"name": "const-0.9-0.999",
               "beta1": {"kind": "const", "value": 0.9},
               "beta2": {"kind": "const", "value": 0.999}}],
    "p": [0.1, 0.01, 0.001],
    "trials": 1000,
    "windows": 2
  })");
  const fs::path out = dir / "out";
  const CliResult r =
      run_cli("--out '" + out.string() + "' divergence '" + (dir / "grid.json").string() + "'");
  CHECK(r.code == 0);
  const fs::path run_dir = out / "grid";
  CHECK(fs::exists(run_dir / "zgrid_const-0.9-0.999.csv"));
  const optlab::csv::Table summary = optlab::csv::read_file((run_dir / "summary.csv").string());
  REQUIRE(summary.rows.size() == 1);
  CHECK(summary.rows[0][summary.col("verdict")] == "BOUNDED");
}

int main(int argc, char** argv) {
  std::vector<char*> flags;
  for (int i = 0; i < argc; ++i) {
    if (i == 0 || argv[i][0] == '-') {
      flags.push_back(argv[i]);
    } else {
      g_cli = argv[i];
    }
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-cli-binary> [doctest flags]\n");
    return 1;
  }
  g_scratch = fs::temp_directory_path() / "optlab_cli_tests";
  fs::remove_all(g_scratch);
  fs::create_directories(g_scratch);

  doctest::Context ctx;
  ctx.applyCommandLine(static_cast<int>(flags.size()), flags.data());
  return ctx.run();
}
