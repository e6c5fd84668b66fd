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

// Deterministic port-assignment simulator. It unrolls a kernel and charges
// every µ-op to one concrete slot, which makes it an independent check of the
// analytical per-slot sums in analyzer.hpp.

#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "portscope/analyzer.hpp"

namespace portscope {

enum class SchedulingPolicy {
  // Each static µ-op cycles through its eligible slots in slot order. Over
  // many iterations this realizes the fixed equal split of the analytical
  // model exactly.
  kRoundRobin,
  // Each µ-op goes to the eligible slot with the least accumulated
  // occupation; ties go to the lowest slot index.
  kLeastLoaded,
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimState {
  std::vector<Rational> slot_busy_until;
  std::size_t issued_uops = 0;
  std::size_t iterations = 0;
};

/// Runs `iterations` copies of the kernel and returns the busiest slot's
/// occupation divided by the iteration count.
inline Rational simulate(const MarkedKernel& kernel, const ModelDatabase& db, int iterations,
                         SchedulingPolicy policy = SchedulingPolicy::kRoundRobin,
                         SimState* final_state = nullptr) {
  if (iterations < 1) throw SimulationError("iterations must be at least 1");
  const PortModel& model = db.port_model();

  std::vector<OccupationRow> rows;
  for (const auto& instr : kernel.lines) {
    OccupationRow row;
    row.instruction = instr;
    row.per_slot.assign(model.size(), Rational(0));
    if (instr.kind == LineKind::kInstruction) {
      const ModelEntry* entry = db.lookup(instruction_form(instr));
      if (!entry) {
        throw SimulationError("no model entry for " + form_key(instruction_form(instr)) +
                              " (line " + std::to_string(instr.line_no) + ")");
      }
      row.matched = true;
      row.per_slot = entry->occupation;
      row.groups = entry->groups;
    }
    rows.push_back(std::move(row));
  }
  rows = apply_load_hiding(std::move(rows), model);

  // One round-robin cursor per static µ-op.
  std::vector<std::vector<std::size_t>> cursor(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) cursor[r].assign(rows[r].groups.size(), 0);

  SimState state;
  state.slot_busy_until.assign(model.size(), Rational(0));
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      for (std::size_t g = 0; g < row.groups.size(); ++g) {
        if (std::find(row.hidden_groups.begin(), row.hidden_groups.end(), g) !=
            row.hidden_groups.end()) {
          continue;
        }
        const auto& group = row.groups[g];
        std::size_t slot;
        if (policy == SchedulingPolicy::kRoundRobin) {
          slot = group.slots[cursor[r][g] % group.slots.size()];
          ++cursor[r][g];
        } else {
          slot = group.slots.front();
          for (auto s : group.slots) {
            if (state.slot_busy_until[s] < state.slot_busy_until[slot]) slot = s;
          }
        }
        state.slot_busy_until[slot] += group.cycles;
        ++state.issued_uops;
      }
    }
    ++state.iterations;
  }

  Rational busiest = *std::max_element(state.slot_busy_until.begin(), state.slot_busy_until.end());
  if (final_state) *final_state = state;
  return busiest / static_cast<std::int64_t>(iterations);
}

}  // namespace portscope
