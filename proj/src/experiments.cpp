#include <optlab/experiments.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include <optlab/errors.hpp>
#include <optlab/optimizers.hpp>
#include <optlab/plrf.hpp>
#include <optlab/scaling.hpp>
#include <optlab/schedules.hpp>
#include <optlab/svg.hpp>
#include <optlab/zprocess.hpp>

#ifndef OPTLAB_BUILD_ID
#define OPTLAB_BUILD_ID "untracked"
#endif

namespace optlab {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string("fnv1a64:") + buf;
}

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

const json* find_key(const json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require_object(const json& obj, const std::string& base, const std::string& key) {
  const json* node = find_key(obj, key);
  if (!node) throw ValidationError(join_path(base, key), "missing required section");
  if (!node->is_object()) throw ValidationError(join_path(base, key), "must be an object");
  return *node;
}

const json& require_array(const json& obj, const std::string& base, const std::string& key) {
  const json* node = find_key(obj, key);
  if (!node) throw ValidationError(join_path(base, key), "missing required field");
  if (!node->is_array() || node->empty())
    throw ValidationError(join_path(base, key), "must be a non-empty array");
  return *node;
}

double require_num(const json& obj, const std::string& base, const std::string& key) {
  const json* node = find_key(obj, key);
  if (!node) throw ValidationError(join_path(base, key), "missing required field");
  if (!node->is_number()) throw ValidationError(join_path(base, key), "must be a number");
  return node->get<double>();
}

double num_or(const json& obj, const std::string& base, const std::string& key, double def) {
  const json* node = find_key(obj, key);
  if (!node) return def;
  if (!node->is_number()) throw ValidationError(join_path(base, key), "must be a number");
  return node->get<double>();
}

long long int_or(const json& obj, const std::string& base, const std::string& key,
                 long long def) {
  const json* node = find_key(obj, key);
  if (!node) return def;
  if (!node->is_number()) throw ValidationError(join_path(base, key), "must be a number");
  const double v = node->get<double>();
  if (std::floor(v) != v || std::abs(v) > 9e15)
    throw ValidationError(join_path(base, key), "must be an integer");
  return static_cast<long long>(v);
}

std::string require_str(const json& obj, const std::string& base, const std::string& key) {
  const json* node = find_key(obj, key);
  if (!node) throw ValidationError(join_path(base, key), "missing required field");
  if (!node->is_string()) throw ValidationError(join_path(base, key), "must be a string");
  return node->get<std::string>();
}

std::string str_or(const json& obj, const std::string& base, const std::string& key,
                   const std::string& def) {
  const json* node = find_key(obj, key);
  if (!node) return def;
  if (!node->is_string()) throw ValidationError(join_path(base, key), "must be a string");
  return node->get<std::string>();
}

bool bool_or(const json& obj, const std::string& base, const std::string& key, bool def) {
  const json* node = find_key(obj, key);
  if (!node) return def;
  if (!node->is_boolean()) throw ValidationError(join_path(base, key), "must be a boolean");
  return node->get<bool>();
}

std::vector<double> num_array(const json& obj, const std::string& base, const std::string& key) {
  const json& arr = require_array(obj, base, key);
  std::vector<double> out;
  for (const json& v : arr) {
    if (!v.is_number()) throw ValidationError(join_path(base, key), "entries must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

// momentum-rate schedule used by the divergence grids
ScheduleSpec beta_schedule(const json& node, const std::string& path) {
  if (!node.is_object()) throw ValidationError(path, "must be an object");
  const std::string kind = require_str(node, path, "kind");
  if (kind == "const") {
    const double v = require_num(node, path, "value");
    if (v < 0.0 || v >= 1.0) throw ValidationError(join_path(path, "value"), "must lie in [0,1)");
    return constant_schedule(v);
  }
  if (kind == "log") {
    const double d = num_or(node, path, "delta", 8.0);
    if (!(d > 0.0)) throw ValidationError(join_path(path, "delta"), "must be > 0");
    return log_time_beta(d);
  }
  throw ValidationError(join_path(path, "kind"), "must be 'const' or 'log'");
}

bool has_damping_schedule(const std::string& algo) {
  return algo == "adana" || algo == "dana" || algo == "dana-star" || algo == "dana-mk4" ||
         algo == "dana-star-mk4" || algo == "log-nadamw";
}

struct ParsedOptimizer {
  OptimizerConfig cfg;
  std::string algorithm;
};

ParsedOptimizer parse_optimizer(const json& root, long long iterations) {
  const std::string base = "optimizer";
  const json& o = require_object(root, "", "optimizer");
  const std::string algo = require_str(o, base, "algorithm");
  const double peak = require_num(o, base, "peak_lr");
  if (!(peak > 0.0) || !std::isfinite(peak))
    throw ValidationError("optimizer.peak_lr", "must be a positive finite number");
  const double delta = num_or(o, base, "delta", 8.0);
  if (!(delta > 0.0)) throw ValidationError("optimizer.delta", "must be > 0");

  ParsedOptimizer out;
  out.algorithm = algo;
  OptimizerConfig& cfg = out.cfg;
  if (algo == "adamw") {
    cfg = adamw_config(peak, num_or(o, base, "beta1", 0.9), num_or(o, base, "beta2", 0.999));
  } else if (algo == "log-adamw") {
    cfg = log_adamw_config(peak, delta);
  } else if (algo == "log-nadamw") {
    cfg = log_nadamw_config(peak, delta);
  } else if (algo == "adana") {
    cfg = adana_config(peak, 0.85, delta);
  } else if (algo == "ademamix") {
    const double horizon = require_num(o, base, "horizon");
    if (!(horizon > 0.0)) throw ValidationError("optimizer.horizon", "must be > 0");
    cfg = ademamix_config(peak, horizon, num_or(o, base, "beta1", 0.9),
                          num_or(o, base, "beta2", 0.999), num_or(o, base, "beta3", 0.9999),
                          num_or(o, base, "alpha", 8.0),
                          num_or(o, base, "alpha_horizon", horizon));
  } else if (algo == "dana") {
    cfg = dana_config(peak, 0.85, delta);
  } else if (algo == "dana-star") {
    cfg = dana_star_config(peak, 0.85, delta);
  } else if (algo == "dana-mk4") {
    cfg = dana_mk4_config(peak, 0.85, delta, num_or(o, base, "clip_snr", 2.0));
  } else if (algo == "dana-star-mk4") {
    cfg = dana_star_mk4_config(peak, 0.85, delta, num_or(o, base, "clip_snr", 2.0));
  } else if (algo == "nesterov") {
    const std::string form = str_or(o, base, "form", "two-sequence");
    NesterovForm f;
    if (form == "two-sequence") {
      f = NesterovForm::TwoSequence;
    } else if (form == "extra-gradient") {
      f = NesterovForm::ExtraGradient;
    } else if (form == "momentum-ema") {
      f = NesterovForm::MomentumEma;
    } else {
      throw ValidationError("optimizer.form",
                            "must be 'two-sequence', 'extra-gradient', or 'momentum-ema'");
    }
    cfg = nesterov_config(peak, f);
    cfg.nesterov_alt_momentum = bool_or(o, base, "alt_momentum", false);
  } else if (algo == "muon") {
    cfg = muon_config(peak, num_or(o, base, "momentum", 0.95), bool_or(o, base, "nesterov", true));
  } else {
    throw ValidationError("optimizer.algorithm", "unknown algorithm '" + algo + "'");
  }

  if (const json* alpha = find_key(o, "alpha")) {
    if (!has_damping_schedule(algo))
      throw ValidationError("optimizer.alpha",
                            "algorithm '" + algo + "' has no damping schedule");
    const std::string apath = "optimizer.alpha";
    if (!alpha->is_object()) throw ValidationError(apath, "must be an object");
    const std::string kind = str_or(*alpha, apath, "kind", "decaying");
    if (kind == "decaying") {
      const double kappa = num_or(*alpha, apath, "kappa", 0.85);
      if (!(kappa > 0.0))
        throw ValidationError("optimizer.alpha.kappa", "must be > 0 under the decaying law");
      const double tilde = num_or(*alpha, apath, "alpha_tilde", 1.0);
      if (tilde < 0.0) throw ValidationError("optimizer.alpha.alpha_tilde", "must be >= 0");
      cfg.damping = damping_decaying(kappa, tilde);
    } else if (kind == "constant") {
      const double kappa = num_or(*alpha, apath, "kappa", 0.85);
      if (!(kappa > 0.0))
        throw ValidationError("optimizer.alpha.kappa", "must be > 0 under the constant law");
      const double horizon = require_num(*alpha, apath, "horizon");
      if (!(horizon > 0.0)) throw ValidationError("optimizer.alpha.horizon", "must be > 0");
      cfg.damping = damping_constant(kappa, horizon, num_or(*alpha, apath, "alpha_tilde", 1.0));
    } else if (kind == "undamped") {
      cfg.damping = undamped_nesterov(delta);
    } else {
      throw ValidationError("optimizer.alpha.kind",
                            "must be 'decaying', 'constant', or 'undamped'");
    }
  }

  if (const json* wd = find_key(o, "weight_decay")) {
    const std::string wpath = "optimizer.weight_decay";
    if (!wd->is_object()) throw ValidationError(wpath, "must be an object");
    const double omega = num_or(*wd, wpath, "omega", 4.0);
    if (omega < 0.0) throw ValidationError(join_path(wpath, "omega"), "must be >= 0");
    const double horizon = require_num(*wd, wpath, "horizon");
    if (!(horizon > 0.0)) throw ValidationError(join_path(wpath, "horizon"), "must be > 0");
    const std::string kind = str_or(*wd, wpath, "kind", "decaying");
    if (kind == "decaying") {
      cfg.weight_decay =
          weight_decay_decaying(omega, horizon, num_or(*wd, wpath, "big_omega", 10.0));
    } else if (kind == "constant") {
      cfg.weight_decay = weight_decay_constant(omega, horizon);
    } else {
      throw ValidationError(join_path(wpath, "kind"), "must be 'decaying' or 'constant'");
    }
  }

  if (const json* lr = find_key(o, "lr")) {
    const std::string lpath = "optimizer.lr";
    if (!lr->is_object()) throw ValidationError(lpath, "must be an object");
    const std::string kind = str_or(*lr, lpath, "kind", "warmup-cosine");
    if (kind == "warmup-cosine") {
      const double horizon = require_num(*lr, lpath, "horizon");
      if (horizon < static_cast<double>(iterations))
        throw ValidationError("optimizer.lr.horizon", "shorter than train.iterations");
      cfg.lr = warmup_cosine(horizon, num_or(*lr, lpath, "warmup_frac", 0.02),
                             num_or(*lr, lpath, "final_frac", 0.10));
    } else if (kind == "constant") {
      cfg.lr = constant_schedule(num_or(*lr, lpath, "value", 1.0));
    } else {
      throw ValidationError(join_path(lpath, "kind"), "must be 'warmup-cosine' or 'constant'");
    }
  }

  if (const json* b2 = find_key(o, "beta2_const")) {
    if (!b2->is_number() || b2->get<double>() < 0.0 || b2->get<double>() >= 1.0)
      throw ValidationError("optimizer.beta2_const", "must be a number in [0,1)");
    cfg.beta2 = constant_schedule(b2->get<double>());
  }

  cfg.eps = num_or(o, base, "eps", cfg.eps);
  if (!(cfg.eps > 0.0)) throw ValidationError("optimizer.eps", "must be > 0");
  cfg.grad_clip = num_or(o, base, "grad_clip", cfg.grad_clip);
  if (cfg.grad_clip < 0.0) throw ValidationError("optimizer.grad_clip", "must be >= 0");
  cfg.clip_snr = num_or(o, base, "clip_snr", cfg.clip_snr);
  if (!(cfg.clip_snr > 0.0)) throw ValidationError("optimizer.clip_snr", "must be > 0");
  cfg.bias_correct_first = bool_or(o, base, "bias_correct_first", cfg.bias_correct_first);
  cfg.bias_correct_second = bool_or(o, base, "bias_correct_second", cfg.bias_correct_second);
  return out;
}

// a run seed that never collides with the sampling stream seed
std::uint64_t derived_instance_seed(std::uint64_t run_seed) {
  return (run_seed + 1) * 0x9E3779B97F4A7C15ULL;
}

struct ParsedProblem {
  PlrfConfig base;
  int experts = 1;
  double zipf = 1.0;
  bool seed_pinned = false;
};

ParsedProblem parse_problem(const json& root) {
  const json& p = require_object(root, "", "problem");
  ParsedProblem out;
  const long long dims = int_or(p, "problem", "dims", 0);
  if (dims < 1) throw ValidationError("problem.dims", "must be a positive integer");
  out.base.dims = static_cast<int>(dims);
  const long long hidden = int_or(p, "problem", "hidden", 0);
  if (hidden < 0) throw ValidationError("problem.hidden", "must be >= 0 (0 picks 3*dims)");
  out.base.features = static_cast<int>(hidden);
  out.base.rho = num_or(p, "problem", "rho", 1.25);
  if (!(out.base.rho > 0.0)) throw ValidationError("problem.rho", "must be > 0");
  out.base.eta = num_or(p, "problem", "eta", 0.75);
  if (!(out.base.eta > 0.0)) throw ValidationError("problem.eta", "must be > 0");
  out.base.label_noise = num_or(p, "problem", "label_noise", 0.0);
  if (out.base.label_noise < 0.0) throw ValidationError("problem.label_noise", "must be >= 0");
  if (find_key(p, "seed")) {
    out.base.seed = static_cast<std::uint64_t>(int_or(p, "problem", "seed", 1));
    out.seed_pinned = true;
  }
  const long long experts = int_or(p, "problem", "experts", 1);
  if (experts < 1) throw ValidationError("problem.experts", "must be >= 1");
  out.experts = static_cast<int>(experts);
  out.zipf = num_or(p, "problem", "zipf", 1.0);
  if (out.zipf < 0.0) throw ValidationError("problem.zipf", "must be >= 0");
  return out;
}

TrainOptions parse_train(const json& root) {
  const json& t = require_object(root, "", "train");
  TrainOptions opts;
  opts.iterations = int_or(t, "train", "iterations", -1);
  if (opts.iterations < 0) throw ValidationError("train.iterations", "must be >= 0");
  const long long batch = int_or(t, "train", "batch", 1);
  if (batch < 1) throw ValidationError("train.batch", "must be >= 1");
  opts.batch = static_cast<int>(batch);
  opts.eval_every = int_or(t, "train", "eval_every", 100);
  if (opts.eval_every < 1) throw ValidationError("train.eval_every", "must be >= 1");
  opts.divergence_factor = num_or(t, "train", "divergence_factor", 1e6);
  if (!(opts.divergence_factor > 0.0))
    throw ValidationError("train.divergence_factor", "must be > 0");
  return opts;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string run_record_csv(const RunRecord& rec) {
  csv::Writer w({"iteration", "risk", "samples", "wall_ms"});
  for (std::size_t i = 0; i < rec.iteration.size(); ++i) {
    // wall_ms is zeroed so reruns are byte-identical; timing lives in the manifest
    w.add_row({std::to_string(rec.iteration[i]), csv::format_double(rec.risk[i]),
               std::to_string(rec.samples[i]), "0"});
  }
  return w.str();
}

const char* status_str(RunStatus s) {
  return s == RunStatus::Diverged ? "DIVERGED" : "COMPLETED";
}

struct Job {
  std::string file;                        // output csv name
  std::vector<std::string> summary_front;  // sweep columns ahead of seed
  std::uint64_t seed = 0;
  std::function<RunRecord()> work;
};

struct JobResult {
  RunRecord record;
  double wall_ms = 0.0;
};

std::vector<JobResult> execute_jobs(const std::vector<Job>& jobs, int workers) {
  std::vector<JobResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  if (workers <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    workers = hw == 0 ? 1 : static_cast<int>(hw);
  }
  workers = std::min<int>(workers, static_cast<int>(jobs.size()));

  std::atomic<std::size_t> next{0};
  auto runner = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        results[i].record = jobs[i].work();
      } catch (...) {
        errors[i] = std::current_exception();
      }
      const auto t1 = std::chrono::steady_clock::now();
      results[i].wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
  };
  if (workers <= 1) {
    runner();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(runner);
    for (std::thread& th : pool) th.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

struct OutputSink {
  fs::path dir;
  json entries = json::array();
  std::vector<std::string> paths;

  void add(const std::string& name, const std::string& content) {
    write_text(dir / name, content);
    json e;
    e["path"] = name;
    e["hash"] = fnv1a64_hex(content);
    e["bytes"] = content.size();
    entries.push_back(e);
    paths.push_back((dir / name).string());
  }
};

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? std::string("x") : out;
}

// sweep-style training kinds share this: build jobs, run them, emit one CSV
// per run plus a summary table
RunReport run_training_kind(const std::string& kind, const json& root, const fs::path& out_dir,
                            std::uint64_t base_seed, long long seed_count, int workers,
                            json& manifest) {
  const TrainOptions train = parse_train(root);
  const ParsedOptimizer opt = parse_optimizer(root, train.iterations);
  const ParsedProblem prob = parse_problem(root);
  const bool moe = kind == "moe-run";
  if (!moe && prob.experts != 1)
    throw ValidationError("problem.experts", "only moe-run accepts more than one expert");

  // sweep axis: column label, values, and how a value reshapes the config
  std::string axis;
  std::vector<double> values;
  std::function<void(OptimizerConfig&, double)> apply;
  if (kind == "kappa-sweep" || kind == "alpha-sweep") {
    const json& sweep = require_object(root, "", "sweep");
    const bool is_kappa = kind == "kappa-sweep";
    axis = is_kappa ? "kappa" : "alpha_tilde";
    values = num_array(sweep, "sweep", axis);
    if (opt.cfg.damping.kind != ScheduleKind::DampingDecaying &&
        opt.cfg.damping.kind != ScheduleKind::DampingConstant)
      throw ValidationError("sweep." + axis,
                            "optimizer '" + opt.algorithm + "' has no damping schedule to sweep");
    for (double v : values) {
      if (is_kappa && !(v > 0.0))
        throw ValidationError("sweep.kappa", "every swept kappa must be > 0");
      if (!is_kappa && v < 0.0)
        throw ValidationError("sweep.alpha_tilde", "every swept scale must be >= 0");
    }
    apply = [is_kappa](OptimizerConfig& cfg, double v) {
      if (is_kappa)
        cfg.damping.kappa = v;
      else
        cfg.damping.alpha_tilde = v;
    };
  } else if (kind == "lr-sweep") {
    const json& sweep = require_object(root, "", "sweep");
    axis = "peak_lr";
    values = num_array(sweep, "sweep", axis);
    for (double v : values) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError("sweep.peak_lr", "every swept rate must be positive and finite");
    }
    apply = [](OptimizerConfig& cfg, double v) { cfg.peak_lr = v; };
  } else {
    values = {0.0};  // single nominal configuration
    apply = [](OptimizerConfig&, double) {};
  }

  std::vector<Job> jobs;
  for (double value : values) {
    for (long long s = 0; s < seed_count; ++s) {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
      Job job;
      job.seed = seed;
      if (!axis.empty()) {
        job.file = axis + csv::format_double(value) + "_seed" + std::to_string(seed) + ".csv";
        job.summary_front = {csv::format_double(value)};
      } else {
        job.file = (moe ? std::string("moe") : std::string("run")) + "_seed" +
                   std::to_string(seed) + ".csv";
      }
      OptimizerConfig cfg = opt.cfg;
      apply(cfg, value);
      PlrfConfig pcfg = prob.base;
      if (!prob.seed_pinned) pcfg.seed = derived_instance_seed(seed);
      TrainOptions topts = train;
      topts.seed = seed;
      if (moe) {
        MoeConfig mcfg{pcfg, prob.experts, prob.zipf};
        job.work = [mcfg, cfg, topts]() {
          return run_training(MoePlrfProblem::build(mcfg), cfg, topts);
        };
      } else {
        job.work = [pcfg, cfg, topts]() {
          return run_training(PlrfProblem::build(pcfg), cfg, topts);
        };
      }
      jobs.push_back(std::move(job));
    }
  }

  const std::vector<JobResult> results = execute_jobs(jobs, workers);

  OutputSink sink;
  sink.dir = out_dir;
  std::vector<std::string> summary_header;
  if (!axis.empty()) summary_header.push_back(axis);
  summary_header.insert(summary_header.end(), {"seed", "final_risk", "status", "samples"});
  csv::Writer summary(summary_header);
  json run_meta = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const RunRecord& rec = results[i].record;
    sink.add(jobs[i].file, run_record_csv(rec));
    std::vector<std::string> row = jobs[i].summary_front;
    row.push_back(std::to_string(jobs[i].seed));
    row.push_back(csv::format_double(rec.risk.back()));
    row.push_back(status_str(rec.status));
    row.push_back(std::to_string(rec.samples_consumed));
    summary.add_row(std::move(row));

    json m;
    m["file"] = jobs[i].file;
    m["status"] = status_str(rec.status);
    m["note"] = rec.note;
    m["wall_ms"] = results[i].wall_ms;
    m["samples"] = rec.samples_consumed;
    run_meta.push_back(m);
  }
  sink.add("summary.csv", summary.str());

  manifest["runs"] = run_meta;
  manifest["outputs"] = sink.entries;

  RunReport report;
  report.outputs = sink.paths;
  report.runs = static_cast<int>(jobs.size());
  return report;
}

const char* verdict_str(StabilityVerdict v) {
  switch (v) {
    case StabilityVerdict::Bounded: return "BOUNDED";
    case StabilityVerdict::SqrtP: return "SQRT_P";
    case StabilityVerdict::Divergent: return "DIVERGENT";
  }
  return "DIVERGENT";
}

RunReport run_divergence_kind(const json& root, const fs::path& out_dir, std::uint64_t base_seed,
                              json& manifest) {
  const json& pairs = require_array(root, "", "pairs");
  const std::vector<double> p_grid = num_array(root, "", "p");
  for (double p : p_grid) {
    if (!(p > 0.0) || p > 1.0) throw ValidationError("p", "entries must lie in (0,1]");
  }
  const long long trials = int_or(root, "", "trials", 10000);
  if (trials < 1) throw ValidationError("trials", "must be >= 1");
  const long long windows = int_or(root, "", "windows", 2);
  if (windows < 1) throw ValidationError("windows", "must be >= 1");
  long long cls_window = int_or(root, "", "classify_window", std::min<long long>(2, windows));
  if (cls_window < 1 || cls_window > windows)
    throw ValidationError("classify_window", "must lie in [1, windows]");
  const std::string law = str_or(root, "", "law", "unit");
  if (law != "unit" && law != "normal")
    throw ValidationError("law", "must be 'unit' or 'normal'");

  OutputSink sink;
  sink.dir = out_dir;
  csv::Writer summary({"pair", "slope", "curvature", "verdict"});
  json run_meta = json::array();

  int idx = 0;
  for (const json& pj : pairs) {
    const std::string ppath = "pairs[" + std::to_string(idx) + "]";
    if (!pj.is_object()) throw ValidationError(ppath, "must be an object");
    const std::string name = require_str(pj, ppath, "name");
    ZProcessConfig cfg;
    cfg.beta1 = beta_schedule(require_object(pj, ppath, "beta1"), join_path(ppath, "beta1"));
    cfg.beta2 = beta_schedule(require_object(pj, ppath, "beta2"), join_path(ppath, "beta2"));
    cfg.windows = static_cast<int>(windows);
    cfg.trials = trials;
    cfg.law = law == "unit" ? GradientLaw::Unit : GradientLaw::Normal;
    cfg.eps = num_or(root, "", "eps", 1e-8);
    cfg.censor = num_or(root, "", "censor", 1e12);
    cfg.seed = base_seed;

    csv::Writer table({"p", "window", "mean_abs", "se", "max_abs", "censored_frac", "mean_gap"});
    std::vector<ZGridPoint> grid;
    const auto t0 = std::chrono::steady_clock::now();
    for (double p : p_grid) {
      cfg.p = p;
      const ZProcessResult res = simulate_z(cfg);
      for (const ZWindowStats& w : res.windows) {
        table.add_row({csv::format_double(p), std::to_string(w.window),
                       csv::format_double(w.mean_abs), csv::format_double(w.se),
                       csv::format_double(w.max_abs), csv::format_double(w.censored_frac),
                       csv::format_double(w.mean_gap)});
      }
      const ZWindowStats& cw = res.windows.at(static_cast<std::size_t>(cls_window - 1));
      grid.push_back({p, cw.mean_abs, cw.censored_frac});
    }
    const StabilityReport rep = classify_stability(grid, trials);
    const auto t1 = std::chrono::steady_clock::now();

    const std::string file = "zgrid_" + sanitize(name) + ".csv";
    sink.add(file, table.str());
    summary.add_row({name, csv::format_double(rep.slope), csv::format_double(rep.curvature),
                     verdict_str(rep.verdict)});

    json m;
    m["file"] = file;
    m["pair"] = name;
    m["verdict"] = verdict_str(rep.verdict);
    m["wall_ms"] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    run_meta.push_back(m);
    ++idx;
  }
  sink.add("summary.csv", summary.str());
  manifest["runs"] = run_meta;
  manifest["outputs"] = sink.entries;

  RunReport report;
  report.outputs = sink.paths;
  report.runs = idx;
  return report;
}

csv::Table load_table(const fs::path& path, const std::string& field) {
  csv::Table t = csv::read_file(path.string());
  if (t.rows.empty()) throw ValidationError(field, "no data rows in " + path.string());
  return t;
}

fs::path resolve_input(const json& root, const std::string& key, const fs::path& config_dir) {
  const std::string raw = require_str(root, "", key);
  fs::path p(raw);
  if (p.is_relative()) p = config_dir / p;
  return p;
}

RunReport run_table_kind(const std::string& kind, const json& root, const fs::path& out_dir,
                         const fs::path& config_dir, json& manifest) {
  OutputSink sink;
  sink.dir = out_dir;
  if (kind == "fit-lr") {
    sink.add("fit_lr.csv", fit_lr_table(load_table(resolve_input(root, "input", config_dir),
                                                   "input")));
  } else if (kind == "fit-loss") {
    sink.add("fit_loss.csv", fit_loss_table(load_table(resolve_input(root, "input", config_dir),
                                                       "input")));
  } else if (kind == "multiplier") {
    const csv::Table base = load_table(resolve_input(root, "baseline", config_dir), "baseline");
    const csv::Table target = load_table(resolve_input(root, "target", config_dir), "target");
    sink.add("multiplier.csv", multiplier_table(base, target));
  } else {  // spectrum-fit
    sink.add("spectrum.csv", spectrum_table(load_table(resolve_input(root, "input", config_dir),
                                                       "input")));
  }
  manifest["outputs"] = sink.entries;
  RunReport report;
  report.outputs = sink.paths;
  report.runs = 1;
  return report;
}

}  // namespace

RunReport run_config(const std::string& config_path, const std::string& out_root,
                     const std::uint64_t* seed_override, int workers) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw IoError("cannot read config: " + config_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string config_bytes = buf.str();

  json root;
  try {
    root = json::parse(config_bytes);
  } catch (const std::exception& e) {
    throw ValidationError("config", std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config", "top level must be an object");

  const std::string kind = require_str(root, "", "kind");
  const std::uint64_t base_seed =
      seed_override ? *seed_override : static_cast<std::uint64_t>(int_or(root, "", "seed", 1));
  const long long seed_count = int_or(root, "", "seeds", 1);
  if (seed_count < 1) throw ValidationError("seeds", "must be >= 1");

  const fs::path config_file(config_path);
  const fs::path out_dir = fs::path(out_root) / config_file.stem();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir.string());

  json manifest;
  manifest["build"] = OPTLAB_BUILD_ID;
  manifest["config"] = config_file.filename().string();
  manifest["config_hash"] = fnv1a64_hex(config_bytes);
  manifest["kind"] = kind;
  manifest["seed"] = base_seed;
  manifest["seeds"] = seed_count;

  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  if (kind == "plrf-run" || kind == "moe-run" || kind == "kappa-sweep" ||
      kind == "alpha-sweep" || kind == "lr-sweep") {
    report = run_training_kind(kind, root, out_dir, base_seed, seed_count, workers, manifest);
  } else if (kind == "divergence-grid") {
    report = run_divergence_kind(root, out_dir, base_seed, manifest);
  } else if (kind == "fit-lr" || kind == "fit-loss" || kind == "multiplier" ||
             kind == "spectrum-fit") {
    report = run_table_kind(kind, root, out_dir, config_file.parent_path(), manifest);
  } else {
    throw ValidationError("kind", "unknown experiment kind '" + kind + "'");
  }
  const auto t1 = std::chrono::steady_clock::now();
  manifest["wall_ms_total"] = std::chrono::duration<double, std::milli>(t1 - t0).count();

  const std::string manifest_text = manifest.dump(2) + "\n";
  write_text(out_dir / "manifest.json", manifest_text);
  report.outputs.push_back((out_dir / "manifest.json").string());
  report.out_dir = out_dir.string();
  return report;
}

std::string fit_lr_table(const csv::Table& in) {
  if (in.rows.empty()) throw ValidationError("fit-lr.input", "no data rows");
  const std::size_t c_opt = in.col("optimizer");
  const std::size_t c_p = in.col("P_nonembd");
  const std::size_t c_lr = in.col("lr");
  const std::size_t c_rank = in.col("rank");

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < in.rows.size(); ++r) {
    const std::string& name = in.rows[r][c_opt];
    if (groups.try_emplace(name).second) order.push_back(name);
    groups[name].push_back(r);
  }

  csv::Writer out({"optimizer", "a", "b", "d", "loss", "iters"});
  for (const std::string& name : order) {
    // rank k of K best rates at a size earns weight (K-k+1)^2 * P in the loss
    std::map<double, double> max_rank;
    for (std::size_t r : groups[name]) {
      const double p = in.num(r, c_p);
      max_rank[p] = std::max(max_rank[p], in.num(r, c_rank));
    }
    std::map<double, int> size_ids;
    for (const auto& [p, _] : max_rank)
      size_ids.emplace(p, static_cast<int>(size_ids.size()));

    std::vector<LrPoint> pts;
    for (std::size_t r : groups[name]) {
      LrPoint pt;
      pt.params = in.num(r, c_p);
      pt.lr = in.num(r, c_lr);
      const double rank = in.num(r, c_rank);
      if (rank < 1.0) throw ValidationError("fit-lr.input", "rank must be >= 1");
      const double w = max_rank[pt.params] - rank + 1.0;
      pt.weight = w * w * pt.params;
      pt.size_id = size_ids[pt.params];
      pts.push_back(pt);
    }
    const LrFit fit = fit_saturated_lr(pts);
    out.add_row({name, csv::format_double(fit.a), csv::format_double(fit.b),
                 csv::format_double(fit.d), csv::format_double(fit.loss),
                 std::to_string(fit.iters)});
  }
  return out.str();
}

std::string fit_loss_table(const csv::Table& in) {
  if (in.rows.empty()) throw ValidationError("fit-loss.input", "no data rows");
  const std::size_t c_opt = in.col("optimizer");
  const std::size_t c_c = in.col("C_pfh");
  const std::size_t c_l = in.col("loss");
  std::vector<LossPoint> pts;
  for (std::size_t r = 0; r < in.rows.size(); ++r)
    pts.push_back({in.rows[r][c_opt], in.num(r, c_c), in.num(r, c_l)});
  const LossFit fit = fit_loss_power_law(pts);
  csv::Writer out({"optimizer", "a", "b", "c", "e", "f", "r2"});
  for (const LossCurveFit& cf : fit.curves) {
    out.add_row({cf.curve, csv::format_double(cf.a), csv::format_double(cf.b),
                 csv::format_double(cf.c), csv::format_double(cf.e), csv::format_double(cf.f),
                 csv::format_double(fit.r2)});
  }
  return out.str();
}

namespace {

std::vector<std::pair<double, double>> loss_pairs(const csv::Table& t) {
  const std::size_t c_c = t.col("C_pfh");
  const std::size_t c_l = t.col("loss");
  std::vector<std::pair<double, double>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) out.push_back({t.num(r, c_c), t.num(r, c_l)});
  return out;
}

}  // namespace

std::string multiplier_table(const csv::Table& baseline, const csv::Table& target) {
  if (baseline.rows.empty() || target.rows.empty())
    throw ValidationError("multiplier.input", "no data rows");
  const auto points = compute_multiplier(loss_pairs(baseline), loss_pairs(target));
  csv::Writer out({"compute", "loss", "matched_compute", "multiplier", "efficiency"});
  for (const MultiplierPoint& mp : points) {
    out.add_row({csv::format_double(mp.compute), csv::format_double(mp.loss),
                 csv::format_double(mp.matched_compute), csv::format_double(mp.multiplier),
                 csv::format_double(mp.efficiency)});
  }
  return out.str();
}

std::string spectrum_table(const csv::Table& in) {
  if (in.rows.empty()) throw ValidationError("spectrum.input", "no data rows");
  const std::size_t c = in.col("eigenvalue");
  std::vector<double> lam;
  for (std::size_t r = 0; r < in.rows.size(); ++r) lam.push_back(in.num(r, c));
  const double q = fit_spectrum_exponent(lam);
  csv::Writer out({"exponent"});
  out.add_row({csv::format_double(q)});
  return out.str();
}

std::string render_plot(const std::string& kind, const std::vector<std::string>& csv_paths) {
  if (csv_paths.empty()) throw ValidationError("plot.input", "no input files");
  std::vector<csv::Table> tables;
  for (const std::string& p : csv_paths) {
    csv::Table t = csv::read_file(p);
    if (t.rows.empty()) throw ValidationError("plot.input", "no data rows in " + p);
    tables.push_back(std::move(t));
  }

  if (kind == "risk-curves") {
    std::vector<svg::Series> series;
    for (std::size_t i = 0; i < tables.size(); ++i) {
      const csv::Table& t = tables[i];
      const std::size_t c_it = t.col("iteration");
      const std::size_t c_risk = t.col("risk");
      svg::Series s;
      s.label = fs::path(csv_paths[i]).stem().string();
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double x = t.num(r, c_it);
        const double y = t.num(r, c_risk);
        if (x > 0.0 && y > 0.0) {  // log-log axes cannot show the origin row
          s.x.push_back(x);
          s.y.push_back(y);
        }
      }
      if (s.x.empty())
        throw ValidationError("plot.input", "no positive points in " + csv_paths[i]);
      series.push_back(std::move(s));
    }
    svg::PlotOptions opts;
    opts.title = "population risk";
    opts.x_label = "iteration";
    opts.y_label = "risk";
    return svg::line_plot(series, opts);
  }

  if (kind == "fit-overlay") {
    std::vector<LossPoint> pts;
    std::vector<std::string> order;
    std::map<std::string, svg::Series> scatter;
    for (const csv::Table& t : tables) {
      const std::size_t c_opt = t.col("optimizer");
      const std::size_t c_c = t.col("C_pfh");
      const std::size_t c_l = t.col("loss");
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& name = t.rows[r][c_opt];
        pts.push_back({name, t.num(r, c_c), t.num(r, c_l)});
        auto [it, fresh] = scatter.try_emplace(name);
        if (fresh) {
          order.push_back(name);
          it->second.label = name;
        }
        it->second.x.push_back(t.num(r, c_c));
        it->second.y.push_back(t.num(r, c_l));
      }
    }
    const LossFit fit = fit_loss_power_law(pts);
    double cmin = pts.front().compute, cmax = cmin;
    for (const LossPoint& p : pts) {
      cmin = std::min(cmin, p.compute);
      cmax = std::max(cmax, p.compute);
    }
    std::vector<svg::Series> series;
    for (const std::string& name : order) series.push_back(scatter[name]);
    for (const std::string& name : order) {
      svg::Series s;
      s.label = name + " fit";
      s.dashed = true;
      for (int i = 0; i < 64; ++i) {
        const double c = cmin * std::pow(cmax / cmin, i / 63.0);
        s.x.push_back(c);
        s.y.push_back(eval_loss_power_law(fit, name, c));
      }
      series.push_back(std::move(s));
    }
    svg::PlotOptions opts;
    opts.title = "loss versus compute";
    opts.x_label = "compute (PFH)";
    opts.y_label = "loss";
    return svg::line_plot(series, opts);
  }

  if (kind == "multiplier-bars") {
    std::vector<svg::Bar> bars;
    for (const csv::Table& t : tables) {
      const std::size_t c_c = t.col("compute");
      const std::size_t c_m = t.col("multiplier");
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        bars.push_back({"C=" + csv::format_double(t.num(r, c_c)), t.num(r, c_m)});
      }
    }
    return svg::bar_chart(bars, "compute multiplier", "multiplier");
  }

  throw ValidationError("plot.kind",
                        "must be 'risk-curves', 'fit-overlay', or 'multiplier-bars'");
}

}  // namespace optlab
