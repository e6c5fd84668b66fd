// Copyright 2026 The portscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Exit status: 0 success, 1 usage or input error,
// 2 analysis finished but some instruction forms had no model entry.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "portscope/analyzer.hpp"
#include "portscope/asm_parser.hpp"
#include "portscope/benchgen.hpp"
#include "portscope/machine_model.hpp"
#include "portscope/portsim.hpp"

#ifndef PORTSCOPE_MODEL_DIR
#define PORTSCOPE_MODEL_DIR "models"
#endif

namespace portscope::cli {

enum ExitCode : int { kOk = 0, kError = 1, kIncomplete = 2 };

struct CliConfig {
  std::string command;
  std::string arch;
  std::string model_path;
  std::string input_path;
  std::string out_dir = ".";
  bool machine_readable = false;
  bool no_benchmarks = false;
  int simulate_iterations = 1000;
  std::string policy = "round-robin";
  // benchgen
  std::string form_key;
  std::string mode;
  std::string companion_key;
  int parallelism = 0;
  int body_length = 0;
  // ingest
  std::string groups;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Resolves --model or --arch to a model file path.
inline std::string resolve_model_path(const CliConfig& cfg) {
  if (!cfg.model_path.empty()) return cfg.model_path;
  if (cfg.arch.empty()) throw std::runtime_error("either --arch or --model is required");
  std::string dir = PORTSCOPE_MODEL_DIR;
  if (const char* env = std::getenv("PORTSCOPE_MODEL_DIR")) dir = env;
  auto path = std::filesystem::path(dir) / (cfg.arch + ".model");
  if (!std::filesystem::exists(path)) throw std::runtime_error("unknown arch '" + cfg.arch + "'");
  return path.string();
}

inline ModelDatabase load_db(const CliConfig& cfg, std::ostream& err) {
  std::vector<std::string> warnings;
  auto db = load_model(resolve_model_path(cfg), &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return db;
}

inline void write_kernel(const BenchmarkKernel& k, const std::string& out_dir, std::ostream& out) {
  std::filesystem::create_directories(out_dir);
  auto path = std::filesystem::path(out_dir) / k.file_name();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << k.asm_text;
  out << path.string() << '\n';
}

inline int run_analyze(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  auto db = load_db(cfg, err);
  auto kernel = extract_marked_kernel(read_file(cfg.input_path), cfg.input_path);
  auto analysis = analyze_kernel(kernel, db);
  if (cfg.machine_readable) {
    out << render_machine_readable(analysis, db.port_model());
  } else {
    out << render_report(analysis, db.port_model(), {.list_unmatched = false});
  }
  if (analysis.unmatched_forms.empty()) return kOk;

  err << "warning: no model entry for:";
  for (const auto& f : analysis.unmatched_forms) err << ' ' << form_key(f);
  err << "\nwarning: unmatched forms were counted with zero occupation\n";
  if (!cfg.no_benchmarks) {
    std::ostringstream written;
    for (const auto& f : analysis.unmatched_forms) {
      try {
        write_kernel(gen_latency_kernel(f, 10), cfg.out_dir, written);
      } catch (const BenchgenError& e) {
        err << "warning: " << e.what() << '\n';
      }
      try {
        write_kernel(gen_throughput_kernel(f, 10), cfg.out_dir, written);
      } catch (const BenchgenError& e) {
        try {
          write_kernel(gen_throughput_kernel(f, 4), cfg.out_dir, written);
        } catch (const BenchgenError& e2) {
          err << "warning: " << e2.what() << '\n';
        }
      }
    }
    std::istringstream lines(written.str());
    for (std::string l; std::getline(lines, l);) err << "wrote benchmark " << l << '\n';
  }
  return kIncomplete;
}

inline int run_simulate(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  auto db = load_db(cfg, err);
  auto kernel = extract_marked_kernel(read_file(cfg.input_path), cfg.input_path);
  SchedulingPolicy policy;
  if (cfg.policy == "round-robin") {
    policy = SchedulingPolicy::kRoundRobin;
  } else if (cfg.policy == "least-loaded") {
    policy = SchedulingPolicy::kLeastLoaded;
  } else {
    throw std::runtime_error("unknown policy '" + cfg.policy + "'");
  }
  auto cy = simulate(kernel, db, cfg.simulate_iterations, policy);
  out << format_fixed(cy, 4) << " cy per assembly iteration\n";
  return kOk;
}

inline int run_benchgen(const CliConfig& cfg, std::ostream& out) {
  auto form = parse_form_key(cfg.form_key);
  if (!form) throw std::runtime_error("malformed form key '" + cfg.form_key + "'");
  BenchmarkKernel k;
  if (cfg.mode == "latency") {
    k = gen_latency_kernel(*form, cfg.parallelism > 0 ? cfg.parallelism : 10);
  } else if (cfg.mode == "throughput") {
    k = gen_throughput_kernel(*form, cfg.parallelism > 0 ? cfg.parallelism : 10, cfg.body_length);
  } else if (cfg.mode == "conflict") {
    auto companion = parse_form_key(cfg.companion_key);
    if (!companion) throw std::runtime_error("conflict mode needs --with <form-key>");
    k = gen_conflict_kernel(*form, *companion, cfg.parallelism > 0 ? cfg.parallelism : 10);
  } else {
    throw std::runtime_error("unknown mode '" + cfg.mode + "'");
  }
  write_kernel(k, cfg.out_dir, out);
  return kOk;
}

inline std::vector<MicroOpGroup> parse_group_hypothesis(const std::string& text,
                                                        const PortModel& model) {
  return detail::parse_groups(model, text, 0);
}

inline int run_ingest(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  auto series = parse_measurements(read_file(cfg.input_path));
  std::optional<ModelDatabase> db;
  if (!cfg.arch.empty() || !cfg.model_path.empty()) db = load_db(cfg, err);

  for (const auto& s : series) {
    if (!s.samples.contains(1)) {
      err << "warning: " << s.form_key << ": no latency sample, skipped\n";
      continue;
    }
    // Companions are the register-only three-operand form of the same vector
    // width as the measured form.
    std::map<std::string, Rational> companion_tp;
    if (db) {
      auto measured = parse_form_key(s.form_key);
      OperandClass width = OperandClass::kXmm;
      if (measured) {
        for (auto c : measured->operands) {
          if (is_vector_class(c)) width = c;
        }
      }
      for (const auto& [name, cycles] : s.combined) {
        InstructionForm companion{name, {width, width, width}};
        if (const ModelEntry* e = db->lookup(companion)) {
          companion_tp[name] = e->reciprocal_throughput;
        }
      }
    }
    auto params = infer_params(s, companion_tp);
    for (const auto& w : params.warnings) err << "warning: " << w << '\n';

    out << s.form_key << ": latency " << format_exact(params.latency, 1) << " cy (measured "
        << format_exact(params.raw_latency) << "), reciprocal throughput "
        << format_exact(params.reciprocal_throughput, 1) << " cy/instr (measured "
        << format_exact(params.raw_reciprocal_throughput) << "), ports "
        << params.port_count_estimate << '\n';
    auto list = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
      return s.empty() ? std::string("-") : s;
    };
    if (!params.companions.empty()) {
      out << "  conflicts: " << list(params.conflicts()) << '\n';
      out << "  no conflict: " << list(params.non_conflicts()) << '\n';
    }
    if (!cfg.groups.empty()) {
      if (!db) throw std::runtime_error("--groups needs --arch or --model");
      auto entry = propose_entry(params, parse_group_hypothesis(cfg.groups, db->port_model()),
                                 db->port_model());
      out << format_entry_wrapped(entry, db->port_model()) << '\n';
    }
  }
  return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  CLI::App app{"Port-model throughput analyzer for marked x86 loop kernels"};
  app.require_subcommand(1);

  auto add_model_flags = [&](CLI::App* sub) {
    sub->add_option("--arch", cfg.arch, "Shipped model id (skl, zen)");
    sub->add_option("--model", cfg.model_path, "Model file, overrides --arch");
  };

  auto* analyze = app.add_subcommand("analyze", "Predict cycles per assembly iteration");
  add_model_flags(analyze);
  analyze->add_option("input", cfg.input_path, "Assembly file with markers")->required();
  analyze->add_option("--out-dir", cfg.out_dir, "Directory for generated benchmarks");
  analyze->add_flag("--machine-readable", cfg.machine_readable, "Key/value output");
  analyze->add_flag("--no-benchmarks", cfg.no_benchmarks,
                    "Do not write benchmarks for missing forms");

  auto* sim = app.add_subcommand("simulate", "Run the port-assignment simulator");
  add_model_flags(sim);
  sim->add_option("input", cfg.input_path, "Assembly file with markers")->required();
  sim->add_option("--simulate-iterations", cfg.simulate_iterations, "Unrolled iterations")
      ->check(CLI::PositiveNumber);
  sim->add_option("--policy", cfg.policy, "round-robin or least-loaded");

  auto* bench = app.add_subcommand("benchgen", "Generate a microbenchmark kernel");
  bench->add_option("form", cfg.form_key, "Form key, e.g. vaddpd-xmm_xmm_xmm")->required();
  bench->add_option("mode", cfg.mode, "latency, throughput or conflict")->required();
  bench->add_option("--parallelism", cfg.parallelism, "Chains, or body length for latency");
  bench->add_option("--length", cfg.body_length, "Throughput body length");
  bench->add_option("--with", cfg.companion_key, "Companion form for conflict mode");
  bench->add_option("--out-dir", cfg.out_dir, "Output directory");

  auto* ingest = app.add_subcommand("ingest", "Infer parameters from a measurement log");
  add_model_flags(ingest);
  ingest->add_option("input", cfg.input_path, "Measurement log")->required();
  ingest->add_option("--groups", cfg.groups, "Port hypothesis, e.g. \"P0|P1:1;P8|P9:1\"");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }

  try {
    if (analyze->parsed()) return run_analyze(cfg, out, err);
    if (sim->parsed()) return run_simulate(cfg, out, err);
    if (bench->parsed()) return run_benchgen(cfg, out);
    if (ingest->parsed()) return run_ingest(cfg, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}

}  // namespace portscope::cli
