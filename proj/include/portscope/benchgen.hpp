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

// Microbenchmark generation and measurement-log inference for building model
// entries.
//
// Register conventions of generated kernels:
//   xmm0/ymm0  first dependency chain
//   %r15       loop counter
//   %rax       base of every memory operand; the harness points it at data
//   %rdi       trip count, supplied by the harness

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "portscope/machine_model.hpp"
#include "portscope/rational.hpp"

namespace portscope {

class BenchgenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BenchmarkMode { kLatency, kThroughput, kConflict };

inline std::string_view to_string(BenchmarkMode m) {
  switch (m) {
    case BenchmarkMode::kLatency: return "latency";
    case BenchmarkMode::kThroughput: return "throughput";
    case BenchmarkMode::kConflict: return "conflict";
  }
  return "?";
}

struct BenchmarkKernel {
  InstructionForm form;
  std::optional<InstructionForm> companion;
  BenchmarkMode mode = BenchmarkMode::kLatency;
  int parallelism = 1;
  int body_length = 0;
  // Loop body, one instruction (or local label) per entry, without scaffold.
  std::vector<std::string> body;
  std::string asm_text;

  /// `<form-key>-<mode>-<parallelism>.s`
  std::string file_name() const {
    std::string key = form_key(form);
    if (companion) key += "+" + form_key(*companion);
    return key + "-" + std::string(to_string(mode)) + "-" + std::to_string(parallelism) + ".s";
  }
};

namespace detail {

enum class RegisterFamily { kGpr, kVector };

inline RegisterFamily family_of(OperandClass c) {
  return is_vector_class(c) ? RegisterFamily::kVector : RegisterFamily::kGpr;
}

// General registers available to chains and read-only sources.
inline constexpr std::string_view kGprPool[] = {"rbx", "rcx", "rdx", "rsi", "r8", "r9",
                                               "r10", "r11", "r12", "r13", "r14"};
inline constexpr std::size_t kVectorPoolSize = 16;

inline std::size_t pool_size(RegisterFamily f) {
  return f == RegisterFamily::kVector ? kVectorPoolSize : std::size(kGprPool);
}

inline std::string gpr_name(std::string_view base, OperandClass width) {
  std::string b(base);
  if (b.size() >= 2 && b[0] == 'r' && std::isdigit(static_cast<unsigned char>(b[1]))) {
    switch (width) {
      case OperandClass::kGpr64: return b;
      case OperandClass::kGpr32: return b + "d";
      case OperandClass::kGpr16: return b + "w";
      default: return b + "b";
    }
  }
  std::string core = b.substr(1);  // "bx", "cx", "si", ...
  switch (width) {
    case OperandClass::kGpr64: return b;
    case OperandClass::kGpr32: return "e" + core;
    case OperandClass::kGpr16: return core;
    default:
      if (core == "si" || core == "di") return core + "l";
      return core.substr(0, 1) + "l";
  }
}

inline std::string register_name(OperandClass cls, std::size_t index) {
  switch (cls) {
    case OperandClass::kXmm: return "%xmm" + std::to_string(index);
    case OperandClass::kYmm: return "%ymm" + std::to_string(index);
    default: return "%" + gpr_name(kGprPool[index], cls);
  }
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

inline bool is_branch(std::string_view mnemonic) {
  return !mnemonic.empty() && mnemonic[0] == 'j';
}

}  // namespace detail

/// Whether the last operand is a register the instruction writes.
inline bool writes_register_destination(const InstructionForm& form) {
  if (form.operands.empty() || !is_register_class(form.operands.back())) return false;
  const auto& m = form.mnemonic;
  return !(detail::starts_with(m, "cmp") || detail::starts_with(m, "test") ||
           detail::starts_with(m, "vcomi") || detail::starts_with(m, "vucomi") ||
           detail::starts_with(m, "comi") || detail::starts_with(m, "ucomi") ||
           detail::starts_with(m, "push") || detail::is_branch(m));
}

/// Two-operand and one-operand x86 forms read their destination, except for
/// moves and conversions that overwrite it.
inline bool reads_register_destination(const InstructionForm& form) {
  if (!writes_register_destination(form) || form.operands.size() > 2) return false;
  const auto& m = form.mnemonic;
  for (std::string_view p : {"mov", "vmov", "lea", "set", "pop", "cvt", "vcvt", "vbroadcast",
                             "vpbroadcast", "vextract"}) {
    if (detail::starts_with(m, p)) return false;
  }
  return true;
}

namespace detail {

struct OperandPlan {
  // Position of the register source that carries the chain, if any.
  std::optional<std::size_t> chain_source;
  std::vector<std::size_t> read_only_sources;
  bool has_chain = false;
};

inline OperandPlan plan_operands(const InstructionForm& form) {
  OperandPlan plan;
  const std::size_t n = form.operands.size();
  const bool writes = writes_register_destination(form);
  const std::size_t last_source = writes ? n - 1 : n;
  for (std::size_t i = 0; i < last_source; ++i) {
    if (!is_register_class(form.operands[i])) continue;
    plan.read_only_sources.push_back(i);
  }
  if (writes) {
    auto dst_family = family_of(form.operands.back());
    for (auto it = plan.read_only_sources.rbegin(); it != plan.read_only_sources.rend(); ++it) {
      if (family_of(form.operands[*it]) == dst_family) {
        plan.chain_source = *it;
        plan.read_only_sources.erase(std::next(it).base());
        break;
      }
    }
    plan.has_chain = plan.chain_source.has_value() || reads_register_destination(form);
  }
  return plan;
}

// Register indices per family.
struct Allocation {
  std::map<RegisterFamily, std::size_t> used;
  std::size_t take(RegisterFamily f) { return used[f]++; }
};

struct FormInstance {
  const InstructionForm* form;
  OperandPlan plan;
  std::vector<std::size_t> chain_registers;  // per chain
};

inline std::string render_instruction(const FormInstance& inst, std::size_t chain,
                                      const std::map<RegisterFamily, std::size_t>& read_only_base,
                                      bool* needs_label) {
  const auto& form = *inst.form;
  std::string line = "\t" + form.mnemonic;
  std::map<RegisterFamily, std::size_t> read_only_ordinal;
  for (std::size_t i = 0; i < form.operands.size(); ++i) {
    const OperandClass cls = form.operands[i];
    std::string text;
    switch (cls) {
      case OperandClass::kImm: text = "$1"; break;
      case OperandClass::kMem: text = "(%rax)"; break;
      case OperandClass::kLabel:
        text = "1f";
        *needs_label = true;
        break;
      default: {
        const bool is_dst = i + 1 == form.operands.size() && writes_register_destination(form);
        const bool is_chain = is_dst || inst.plan.chain_source == i;
        if (is_chain) {
          text = register_name(cls, inst.chain_registers.at(chain));
        } else {
          auto f = family_of(cls);
          text = register_name(cls, read_only_base.at(f) + read_only_ordinal[f]++);
        }
      }
    }
    line += (i == 0 ? "\t" : ", ") + text;
  }
  return line;
}

inline std::string scaffold(const std::string& title, const std::vector<std::string>& body) {
  std::ostringstream out;
  out << "# " << title << "\n"
      << "# xmm0/ymm0 anchors the first chain, %r15 counts iterations,\n"
      << "# %rax must point to initialized data, %rdi holds the trip count.\n"
      << "\t.text\n"
      << "\t.globl\tbench\n"
      << "\t.type\tbench, @function\n"
      << "bench:\n"
      << "init:\n"
      << "\txorq\t%r15, %r15\n"
      << "loop:\n"
      << "\tincq\t%r15\n";
  for (const auto& l : body) out << l << "\n";
  out << "\tcmpq\t%rdi, %r15\n"
      << "\tjl\tloop\n"
      << "\tret\n";
  return out.str();
}

// Builds an interleaved body over `forms`, each with `chains` chains. Chain
// registers are handed out chain by chain across the forms, so one form
// repeated twice yields the same registers as a single form with twice the
// chains.
inline std::vector<std::string> build_body(const std::vector<const InstructionForm*>& forms,
                                           int chains, int instances_per_form) {
  std::vector<FormInstance> instances;
  for (const auto* f : forms) instances.push_back({f, plan_operands(*f), {}});

  Allocation alloc;
  for (int c = 0; c < chains; ++c) {
    for (auto& inst : instances) {
      if (writes_register_destination(*inst.form)) {
        inst.chain_registers.push_back(alloc.take(family_of(inst.form->operands.back())));
      } else {
        inst.chain_registers.push_back(0);
      }
    }
  }
  // Read-only sources come after all chain registers and are shared between
  // forms since nothing writes them.
  std::map<RegisterFamily, std::size_t> read_only_base;
  std::map<RegisterFamily, std::size_t> read_only_needed;
  for (auto& inst : instances) {
    std::map<RegisterFamily, std::size_t> count;
    for (auto pos : inst.plan.read_only_sources) ++count[family_of(inst.form->operands[pos])];
    for (auto [f, n] : count) read_only_needed[f] = std::max(read_only_needed[f], n);
  }
  for (auto f : {RegisterFamily::kGpr, RegisterFamily::kVector}) {
    read_only_base[f] = alloc.used[f];
    if (alloc.used[f] + read_only_needed[f] > pool_size(f)) {
      throw BenchgenError("register budget exceeded: " +
                          std::to_string(alloc.used[f] + read_only_needed[f]) + " " +
                          (f == RegisterFamily::kVector ? "vector" : "general") +
                          " registers needed, " + std::to_string(pool_size(f)) + " available");
    }
  }

  std::vector<std::string> body;
  for (int k = 0; k < instances_per_form; ++k) {
    const auto chain = static_cast<std::size_t>(k % chains);
    for (const auto& inst : instances) {
      bool needs_label = false;
      body.push_back(render_instruction(inst, chain, read_only_base, &needs_label));
      if (needs_label) body.push_back("1:");
    }
  }
  return body;
}

}  // namespace detail

/// n back-to-back copies forming one dependency chain through the destination.
inline BenchmarkKernel gen_latency_kernel(const InstructionForm& form, int n) {
  if (n < 1) throw BenchgenError("latency kernel needs at least one instruction");
  auto plan = detail::plan_operands(form);
  if (!plan.has_chain) {
    throw BenchgenError("no register dependency chain possible for " + form_key(form) +
                        "; latency mode unsupported");
  }
  BenchmarkKernel k;
  k.form = form;
  k.mode = BenchmarkMode::kLatency;
  k.parallelism = 1;
  k.body_length = n;
  k.body = detail::build_body({&form}, 1, n);
  k.asm_text = detail::scaffold(form_key(form) + " latency, 1 chain, " + std::to_string(n) +
                                    " instructions per iteration",
                                k.body);
  return k;
}

/// `chains` independent dependency chains, destinations assigned round-robin.
/// `body_length` defaults to 10 x chains.
inline BenchmarkKernel gen_throughput_kernel(const InstructionForm& form, int chains,
                                             int body_length = 0) {
  if (chains < 1) throw BenchgenError("throughput kernel needs at least one chain");
  if (body_length == 0) body_length = 10 * chains;
  if (body_length < chains) throw BenchgenError("body shorter than the number of chains");
  BenchmarkKernel k;
  k.form = form;
  k.mode = BenchmarkMode::kThroughput;
  k.parallelism = chains;
  k.body_length = body_length;
  k.body = detail::build_body({&form}, chains, body_length);
  k.asm_text = detail::scaffold(form_key(form) + " throughput, " + std::to_string(chains) +
                                    " chains, " + std::to_string(body_length) +
                                    " instructions per iteration",
                                k.body);
  return k;
}

/// A and B interleaved, each with `chains` chains on disjoint registers.
inline BenchmarkKernel gen_conflict_kernel(const InstructionForm& a, const InstructionForm& b,
                                           int chains) {
  if (chains < 1) throw BenchgenError("conflict kernel needs at least one chain");
  BenchmarkKernel k;
  k.form = a;
  k.companion = b;
  k.mode = BenchmarkMode::kConflict;
  k.parallelism = chains;
  k.body = detail::build_body({&a, &b}, chains, 10 * chains);
  k.body_length = static_cast<int>(k.body.size());
  k.asm_text = detail::scaffold(form_key(a) + " throughput with " + form_key(b) +
                                    " interleaved, " + std::to_string(chains) +
                                    " chains each",
                                k.body);
  return k;
}

// ---------------------------------------------------------------------------
// Measurement logs
// ---------------------------------------------------------------------------

class MeasurementError : public std::runtime_error {
 public:
  MeasurementError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct MeasurementSeries {
  std::string form_key;
  // Parallelism level -> cycles per instruction.
  std::map<int, Rational> samples;
  std::optional<Rational> throughput;
  // Companion mnemonic -> cycles per instruction of the combined run.
  std::map<std::string, Rational> combined;
  std::optional<Rational> frequency_hz;

  bool operator==(const MeasurementSeries&) const = default;
};

/// Parses `<name>-<suffix>: <cycles> (clk cy)` lines, grouped by name in
/// order of first appearance.
inline std::vector<MeasurementSeries> parse_measurements(std::string_view text) {
  static const std::regex kFrequency(R"(^Using frequency\s+([0-9]+(?:\.[0-9]+)?)\s*GHz\.?$)");
  static const std::regex kSample(R"(^(\S+):\s+(\S+)\s+\(clk cy\)$)");
  static const std::regex kName(R"(^(.+?)-([0-9]+|TP(?:-(.+))?)$)");

  std::vector<MeasurementSeries> series;
  std::optional<Rational> frequency;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string line(text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string_view trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    std::string t(trimmed);
    std::smatch m;
    if (std::regex_match(t, m, kFrequency)) {
      auto ghz = parse_rational(m[1].str());
      if (!ghz || *ghz <= 0) throw MeasurementError("bad frequency", line_no);
      frequency = *ghz * 1000000000;
      continue;
    }
    if (!std::regex_match(t, m, kSample)) throw MeasurementError("malformed line '" + t + "'", line_no);
    auto cycles = parse_rational(m[2].str());
    if (!cycles) throw MeasurementError("malformed cycle value '" + m[2].str() + "'", line_no);
    if (*cycles <= 0) throw MeasurementError("cycle values must be positive", line_no);
    std::string key = m[1].str();
    std::smatch nm;
    if (!std::regex_match(key, nm, kName)) {
      throw MeasurementError("sample name needs a -<parallelism> or -TP suffix", line_no);
    }
    std::string name = nm[1].str();
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const MeasurementSeries& s) { return s.form_key == name; });
    if (it == series.end()) {
      series.push_back({name, {}, std::nullopt, {}, frequency});
      it = std::prev(series.end());
    }
    const std::string suffix = nm[2].str();
    bool duplicate = false;
    if (nm[3].matched) {
      duplicate = !it->combined.emplace(nm[3].str(), *cycles).second;
    } else if (suffix == "TP") {
      duplicate = it->throughput.has_value();
      it->throughput = *cycles;
    } else {
      int parallelism = std::stoi(suffix);
      if (parallelism < 1) throw MeasurementError("parallelism must be positive", line_no);
      duplicate = !it->samples.emplace(parallelism, *cycles).second;
    }
    if (duplicate) throw MeasurementError("duplicate sample '" + key + "'", line_no);
  }
  return series;
}

/// Inverse of parse_measurements for series whose values have finite decimal
/// expansions.
inline std::string render_measurements(const std::vector<MeasurementSeries>& series) {
  std::ostringstream out;
  std::optional<Rational> current_frequency;
  bool first = true;
  auto line = [&](const std::string& key, const Rational& value) {
    std::string k = key + ":";
    if (k.size() < 35) k.resize(35, ' ');
    out << k << ' ' << format_exact(value, 3) << " (clk cy)\n";
  };
  for (const auto& s : series) {
    if (s.frequency_hz && (first || s.frequency_hz != current_frequency)) {
      out << "Using frequency " << format_fixed(*s.frequency_hz / 1000000000, 2) << "GHz.\n";
      current_frequency = s.frequency_hz;
    }
    first = false;
    for (const auto& [p, v] : s.samples) line(s.form_key + "-" + std::to_string(p), v);
    if (s.throughput) line(s.form_key + "-TP", *s.throughput);
    for (const auto& [name, v] : s.combined) line(s.form_key + "-TP-" + name, v);
  }
  return out.str();
}

enum class ConflictVerdict { kConflict, kNoConflict, kIndeterminate };

struct InferredParams {
  std::string form_key;
  Rational latency;
  Rational raw_latency;
  Rational reciprocal_throughput;
  Rational raw_reciprocal_throughput;
  int port_count_estimate = 1;
  std::map<std::string, ConflictVerdict> companions;
  std::vector<std::string> warnings;

  std::vector<std::string> conflicts() const {
    std::vector<std::string> out;
    for (const auto& [name, v] : companions) {
      if (v == ConflictVerdict::kConflict) out.push_back(name);
    }
    return out;
  }
  std::vector<std::string> non_conflicts() const {
    std::vector<std::string> out;
    for (const auto& [name, v] : companions) {
      if (v == ConflictVerdict::kNoConflict) out.push_back(name);
    }
    return out;
  }
};

inline const Rational kLatencyTolerance{5, 100};
inline const Rational kThroughputTolerance{15, 100};
inline const Rational kConflictTolerance{1, 10};

namespace detail {

inline Rational abs(const Rational& r) { return r < 0 ? -r : r; }

inline Rational round_to_half(const Rational& r) {
  Rational doubled = r * 2;
  std::int64_t q = doubled.numerator() / doubled.denominator();
  Rational frac = doubled - q;
  if (frac * 2 >= 1) ++q;
  return Rational(q, 2);
}

}  // namespace detail

/// Snaps raw measurements to the expected grids and classifies companions.
/// `companion_throughput` maps a companion mnemonic to its own reciprocal
/// throughput; companions missing from it get an indeterminate verdict.
inline InferredParams infer_params(const MeasurementSeries& series,
                                   const std::map<std::string, Rational>& companion_throughput = {}) {
  InferredParams p;
  p.form_key = series.form_key;
  auto lat = series.samples.find(1);
  if (lat == series.samples.end()) {
    throw BenchgenError(series.form_key + ": no parallelism-1 sample for the latency");
  }
  std::optional<Rational> tp = series.throughput;
  if (!tp) {
    if (series.samples.size() < 2) {
      throw BenchgenError(series.form_key + ": no TP sample and no plateau to read it from");
    }
    tp = series.samples.rbegin()->second;
    p.warnings.push_back(series.form_key + ": no TP sample, using the highest parallelism level");
  }

  p.raw_latency = lat->second;
  Rational snapped_lat = detail::round_to_half(lat->second);
  if (snapped_lat > 0 && detail::abs(snapped_lat - lat->second) <= kLatencyTolerance * lat->second) {
    p.latency = snapped_lat;
  } else {
    p.latency = lat->second;
    p.warnings.push_back(series.form_key + ": latency " + format_exact(lat->second) +
                         " is not near a multiple of 0.5 cy");
  }

  p.raw_reciprocal_throughput = *tp;
  std::optional<Rational> best;
  for (std::int64_t n = 1; n <= 8; ++n) {
    for (Rational c : {Rational(n), Rational(1, n)}) {
      if (!best || detail::abs(c - *tp) < detail::abs(*best - *tp)) best = c;
    }
  }
  if (detail::abs(*best - *tp) <= kThroughputTolerance * *best) {
    p.reciprocal_throughput = *best;
  } else {
    p.reciprocal_throughput = *tp;
    p.warnings.push_back(series.form_key + ": reciprocal throughput " + format_exact(*tp) +
                         " is not near n or 1/n");
  }

  if (p.reciprocal_throughput <= 1) {
    Rational half_up = 1 / p.reciprocal_throughput + Rational(1, 2);
    p.port_count_estimate = static_cast<int>(half_up.numerator() / half_up.denominator());
  } else {
    p.port_count_estimate = 1;
  }

  for (const auto& [name, combined] : series.combined) {
    auto other = companion_throughput.find(name);
    if (other == companion_throughput.end()) {
      p.companions[name] = ConflictVerdict::kIndeterminate;
      p.warnings.push_back(series.form_key + ": reciprocal throughput of companion " + name +
                           " unknown");
      continue;
    }
    const Rational a = p.reciprocal_throughput;
    const Rational b = other->second;
    const bool conflict = combined >= a + b - kConflictTolerance;
    const bool independent = combined <= std::max(a, b) + kConflictTolerance;
    if (conflict && !independent) {
      p.companions[name] = ConflictVerdict::kConflict;
    } else if (independent && !conflict) {
      p.companions[name] = ConflictVerdict::kNoConflict;
    } else {
      p.companions[name] = ConflictVerdict::kIndeterminate;
      p.warnings.push_back(series.form_key + ": combined run with " + name + " (" +
                           format_exact(combined) + " cy) is inconclusive");
    }
  }
  return p;
}

/// Builds a database entry from inferred parameters and an operator-supplied
/// port hypothesis.
inline ModelEntry propose_entry(const InferredParams& params,
                                const std::vector<MicroOpGroup>& slot_hypothesis,
                                const PortModel& model) {
  auto form = parse_form_key(params.form_key);
  if (!form) throw BenchgenError("malformed form key '" + params.form_key + "'");
  if (slot_hypothesis.empty()) throw BenchgenError("empty port hypothesis");
  const bool coherent = std::any_of(slot_hypothesis.begin(), slot_hypothesis.end(), [&](const auto& g) {
    return static_cast<int>(g.slots.size()) == params.port_count_estimate;
  });
  if (!coherent) {
    throw BenchgenError("no µ-op group spans " + std::to_string(params.port_count_estimate) +
                        " slots as the measured throughput implies");
  }
  return make_entry(*form, params.reciprocal_throughput, params.latency, slot_hypothesis, model);
}

/// Cycles per source iteration from clock (cy/s) and performance (it/s).
inline Rational cycles_per_iteration(const Rational& clock_hz, const Rational& iterations_per_second) {
  if (clock_hz <= 0 || iterations_per_second <= 0) {
    throw BenchgenError("clock and performance must be positive");
  }
  return clock_hz / iterations_per_second;
}

}  // namespace portscope
