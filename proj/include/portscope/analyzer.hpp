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

// Throughput analysis of a marked kernel against a port model.
//
// Every µ-op group spreads its cycles evenly over its eligible slots. The
// predicted cycles per assembly iteration is the largest per-slot total.

#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "portscope/asm_parser.hpp"
#include "portscope/machine_model.hpp"

namespace portscope {

struct OccupationRow {
  Instruction instruction;
  std::vector<Rational> per_slot;
  // Groups of the matched entry, in entry order.
  std::vector<MicroOpGroup> groups;
  // Indices into `groups` that are hidden and excluded from totals.
  std::vector<std::size_t> hidden_groups;
  bool matched = false;
};

struct KernelAnalysis {
  std::vector<OccupationRow> rows;
  std::vector<Rational> totals;
  Rational bottleneck_cycles;
  std::vector<std::size_t> bottleneck_slots;
  std::vector<InstructionForm> unmatched_forms;
};

/// Per-slot cycles of the hidden groups of `row`.
inline std::vector<Rational> hidden_per_slot(const OccupationRow& row, std::size_t slot_count) {
  std::vector<MicroOpGroup> hidden;
  for (auto idx : row.hidden_groups) hidden.push_back(row.groups.at(idx));
  return derive_occupation(hidden, slot_count);
}

namespace detail {

inline std::optional<std::size_t> agu_group(const OccupationRow& row, const PortModel& model) {
  for (std::size_t g = 0; g < row.groups.size(); ++g) {
    const auto& slots = row.groups[g].slots;
    if (std::includes(model.agu_slots.begin(), model.agu_slots.end(), slots.begin(),
                      slots.end())) {
      return g;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// On models where loads and stores share the AGUs, each store hides the
/// AGU µ-op of one load. Stores pair with the oldest outstanding load that
/// precedes them; stores left over take remaining loads from later in the
/// body, i.e. from the previous loop iteration. The number of hidden groups is
/// min(#stores, #loads).
inline std::vector<OccupationRow> apply_load_hiding(std::vector<OccupationRow> rows,
                                                    const PortModel& model) {
  if (!model.agu_load_store_sharing) return rows;

  std::deque<std::pair<std::size_t, std::size_t>> outstanding;
  std::vector<std::size_t> unpaired_stores;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& instr = rows[i].instruction;
    if (is_store(instr)) {
      if (!outstanding.empty()) {
        auto [row, group] = outstanding.front();
        outstanding.pop_front();
        rows[row].hidden_groups.push_back(group);
      } else {
        unpaired_stores.push_back(i);
      }
    } else if (is_load(instr) && rows[i].hidden_groups.empty()) {
      if (auto g = detail::agu_group(rows[i], model)) outstanding.emplace_back(i, *g);
    }
  }
  for (std::size_t k = 0; k < unpaired_stores.size() && !outstanding.empty(); ++k) {
    auto [row, group] = outstanding.front();
    outstanding.pop_front();
    rows[row].hidden_groups.push_back(group);
  }
  return rows;
}

inline KernelAnalysis analyze_kernel(const MarkedKernel& kernel, const ModelDatabase& db) {
  const PortModel& model = db.port_model();
  const std::size_t n = model.size();
  KernelAnalysis analysis;
  std::set<InstructionForm> unmatched;

  for (const auto& instr : kernel.lines) {
    OccupationRow row;
    row.instruction = instr;
    row.per_slot.assign(n, Rational(0));
    if (instr.kind == LineKind::kInstruction) {
      auto form = instruction_form(instr);
      if (const ModelEntry* entry = db.lookup(form)) {
        row.matched = true;
        row.per_slot = entry->occupation;
        row.groups = entry->groups;
      } else {
        unmatched.insert(form);
      }
    }
    analysis.rows.push_back(std::move(row));
  }

  analysis.rows = apply_load_hiding(std::move(analysis.rows), model);

  analysis.totals.assign(n, Rational(0));
  for (const auto& row : analysis.rows) {
    auto hidden = hidden_per_slot(row, n);
    for (std::size_t s = 0; s < n; ++s) analysis.totals[s] += row.per_slot[s] - hidden[s];
  }
  analysis.bottleneck_cycles = *std::max_element(analysis.totals.begin(), analysis.totals.end());
  for (std::size_t s = 0; s < n; ++s) {
    if (analysis.totals[s] == analysis.bottleneck_cycles) analysis.bottleneck_slots.push_back(s);
  }
  analysis.unmatched_forms.assign(unmatched.begin(), unmatched.end());
  return analysis;
}

inline std::string bottleneck_names(const KernelAnalysis& analysis, const PortModel& model) {
  std::string out;
  for (std::size_t i = 0; i < analysis.bottleneck_slots.size(); ++i) {
    if (i) out += ", ";
    out += model.slots[analysis.bottleneck_slots[i]];
  }
  return out;
}

struct ReportOptions {
  // Append the list of forms missing from the database.
  bool list_unmatched = true;
};

/// Fixed-width occupation table in the layout of IACA-style reports.
inline std::string render_report(const KernelAnalysis& analysis, const PortModel& model,
                                 ReportOptions options = {}) {
  const std::size_t n = model.size();
  constexpr int kWidth = 8;

  // Divider columns are shown only when something uses them.
  std::vector<std::size_t> columns;
  for (std::size_t s = 0; s < n; ++s) {
    bool used = analysis.totals.size() == n && analysis.totals[s] != 0;
    for (const auto& row : analysis.rows) used = used || row.per_slot[s] != 0;
    if (!model.is_divider(s) || used) columns.push_back(s);
  }

  std::ostringstream out;
  for (auto s : columns) {
    out << std::setw(kWidth) << (model.is_divider(s) ? std::string("-- DV") : model.slots[s]);
  }
  out << "  | Assembly Instructions\n";
  const std::string rule(columns.size() * kWidth + 24, '-');
  out << rule << '\n';

  for (const auto& row : analysis.rows) {
    auto hidden = hidden_per_slot(row, n);
    for (auto s : columns) {
      std::string cell;
      if (hidden[s] != 0 && hidden[s] == row.per_slot[s]) {
        cell = "(" + format_fixed(hidden[s], 2) + ")";
      } else if (hidden[s] != 0) {
        cell = format_fixed(row.per_slot[s] - hidden[s], 2) + "(" + format_fixed(hidden[s], 2) + ")";
      } else if (row.per_slot[s] != 0) {
        cell = format_fixed(row.per_slot[s], 2);
      }
      out << std::setw(kWidth) << cell;
    }
    out << "  | " << detail::trim_view(row.instruction.raw_text);
    if (row.instruction.kind == LineKind::kInstruction && !row.matched) out << "  [no model entry]";
    out << '\n';
  }

  out << rule << '\n';
  const bool mark = analysis.bottleneck_cycles > 0;
  for (auto s : columns) {
    std::string cell = s < analysis.totals.size() ? format_fixed(analysis.totals[s], 2) : "0.00";
    if (mark && std::binary_search(analysis.bottleneck_slots.begin(),
                                   analysis.bottleneck_slots.end(), s)) {
      cell = "*" + cell + "*";
    }
    out << std::setw(kWidth) << cell;
  }
  out << '\n';
  out << "\nTotal throughput: " << format_fixed(analysis.bottleneck_cycles, 2)
      << " cy per assembly iteration, bottleneck: " << bottleneck_names(analysis, model) << '\n';

  if (options.list_unmatched && !analysis.unmatched_forms.empty()) {
    out << "\nWARNING: no model entry for the following instruction forms; they were\n"
           "counted with zero occupation, so the prediction is incomplete:\n";
    for (const auto& form : analysis.unmatched_forms) out << "  " << form_key(form) << '\n';
  }
  return out.str();
}

/// Line-oriented key/value dump of an analysis with exact values.
inline std::string render_machine_readable(const KernelAnalysis& analysis, const PortModel& model) {
  auto vec = [](const std::vector<Rational>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_exact(v[i]);
    return s;
  };
  std::ostringstream out;
  out << "arch: " << model.arch_id << '\n';
  out << "slots: ";
  for (std::size_t i = 0; i < model.size(); ++i) out << (i ? "," : "") << model.slots[i];
  out << '\n';
  out << "rows: " << analysis.rows.size() << '\n';
  for (std::size_t i = 0; i < analysis.rows.size(); ++i) {
    const auto& row = analysis.rows[i];
    const std::string p = "row." + std::to_string(i) + ".";
    const char* kind = row.instruction.kind == LineKind::kInstruction ? "instruction"
                       : row.instruction.kind == LineKind::kLabel    ? "label"
                                                                      : "directive";
    out << p << "line: " << row.instruction.line_no << '\n';
    out << p << "kind: " << kind << '\n';
    out << p << "text: " << detail::trim_view(row.instruction.raw_text) << '\n';
    if (row.instruction.kind == LineKind::kInstruction) {
      out << p << "form: " << form_key(instruction_form(row.instruction)) << '\n';
      out << p << "matched: " << (row.matched ? "true" : "false") << '\n';
    }
    out << p << "occupation: " << vec(row.per_slot) << '\n';
    out << p << "hidden: " << vec(hidden_per_slot(row, model.size())) << '\n';
  }
  out << "totals: " << vec(analysis.totals) << '\n';
  out << "bottleneck.cycles: " << format_exact(analysis.bottleneck_cycles) << '\n';
  out << "bottleneck.slots: ";
  for (std::size_t i = 0; i < analysis.bottleneck_slots.size(); ++i) {
    out << (i ? "," : "") << model.slots[analysis.bottleneck_slots[i]];
  }
  out << '\n';
  out << "unmatched: ";
  for (std::size_t i = 0; i < analysis.unmatched_forms.size(); ++i) {
    out << (i ? "," : "") << form_key(analysis.unmatched_forms[i]);
  }
  out << '\n';
  return out.str();
}

}  // namespace portscope
