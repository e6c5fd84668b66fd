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

// Port models and the instruction-form database.
//
// A model file is line-oriented text:
//
//   arch: skl
//   slots: P0,0DV,P1,P2,P3,P4,P5,P6,P7
//   divider: 0DV->P0
//   agu_sharing: false
//   units: P0|P1; P2|P3; ...
//   vfmadd132pd-xmm_xmm_mem, 0.5, 4.0, "(0.5,0,0.5,0.5,0.5,0,0,0,0)"
//
// Entry keys list operand classes destination first, the order used by the
// measurement logs. The optional fifth field gives the µ-op groups
// explicitly, e.g. "[P0:1;0DV:4]". Without it the groups are inferred from the
// vector (see infer_groups).

#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "portscope/rational.hpp"

namespace portscope {

enum class OperandClass { kGpr8, kGpr16, kGpr32, kGpr64, kXmm, kYmm, kImm, kMem, kLabel };

inline std::string_view to_string(OperandClass c) {
  switch (c) {
    case OperandClass::kGpr8: return "gpr8";
    case OperandClass::kGpr16: return "gpr16";
    case OperandClass::kGpr32: return "gpr32";
    case OperandClass::kGpr64: return "gpr64";
    case OperandClass::kXmm: return "xmm";
    case OperandClass::kYmm: return "ymm";
    case OperandClass::kImm: return "imm";
    case OperandClass::kMem: return "mem";
    case OperandClass::kLabel: return "label";
  }
  return "?";
}

inline std::optional<OperandClass> parse_operand_class(std::string_view s) {
  static constexpr OperandClass kAll[] = {
      OperandClass::kGpr8, OperandClass::kGpr16, OperandClass::kGpr32,
      OperandClass::kGpr64, OperandClass::kXmm, OperandClass::kYmm,
      OperandClass::kImm, OperandClass::kMem, OperandClass::kLabel};
  for (auto c : kAll) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

inline bool is_register_class(OperandClass c) {
  return c != OperandClass::kImm && c != OperandClass::kMem && c != OperandClass::kLabel;
}

inline bool is_vector_class(OperandClass c) {
  return c == OperandClass::kXmm || c == OperandClass::kYmm;
}

/// Mnemonic plus operand classes in AT&T (destination-last) order.
struct InstructionForm {
  std::string mnemonic;
  std::vector<OperandClass> operands;

  auto operator<=>(const InstructionForm&) const = default;
  bool operator==(const InstructionForm&) const = default;
};

/// Database key, e.g. "vfmadd132pd-xmm_xmm_mem" for AT&T `vfmadd132pd
/// (%rax), %xmm0, %xmm0`. Classes are written destination first.
inline std::string form_key(const InstructionForm& form) {
  std::string key = form.mnemonic;
  if (form.operands.empty()) return key;
  key += '-';
  for (auto it = form.operands.rbegin(); it != form.operands.rend(); ++it) {
    if (it != form.operands.rbegin()) key += '_';
    key += to_string(*it);
  }
  return key;
}

inline std::optional<InstructionForm> parse_form_key(std::string_view key) {
  InstructionForm form;
  auto dash = key.find('-');
  form.mnemonic = std::string(key.substr(0, dash));
  if (form.mnemonic.empty()) return std::nullopt;
  for (char c : form.mnemonic) {
    if (c == ' ' || c == ',' || c == ':' || (c >= 'A' && c <= 'Z')) return std::nullopt;
  }
  if (dash == std::string_view::npos) return form;
  std::string_view rest = key.substr(dash + 1);
  std::vector<OperandClass> intel_order;
  while (true) {
    auto sep = rest.find('_');
    auto cls = parse_operand_class(rest.substr(0, sep));
    if (!cls) return std::nullopt;
    intel_order.push_back(*cls);
    if (sep == std::string_view::npos) break;
    rest.remove_prefix(sep + 1);
  }
  form.operands.assign(intel_order.rbegin(), intel_order.rend());
  return form;
}

/// Thrown for malformed model files and invalid entries. `line` is 0 when the
/// error is not tied to a file position.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct PortModel {
  std::string arch_id;
  std::vector<std::string> slots;
  // (divider slot, parent slot) as slot indices.
  std::vector<std::pair<std::size_t, std::size_t>> dividers;
  bool agu_load_store_sharing = false;
  // Slots holding the address generation units shared by loads and stores.
  std::vector<std::size_t> agu_slots;
  // Functional-unit slot sets, used to split value clusters when groups are
  // inferred from a bare occupation vector.
  std::vector<std::vector<std::size_t>> units;

  std::size_t size() const { return slots.size(); }

  std::optional<std::size_t> slot_index(std::string_view name) const {
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i] == name) return i;
    }
    return std::nullopt;
  }

  bool is_divider(std::size_t slot) const {
    return std::any_of(dividers.begin(), dividers.end(),
                       [&](const auto& d) { return d.first == slot; });
  }

  std::optional<std::size_t> divider_parent(std::size_t slot) const {
    for (const auto& [div, parent] : dividers) {
      if (div == slot) return parent;
    }
    return std::nullopt;
  }

  void validate() const {
    if (arch_id.empty()) throw ModelError("missing arch id");
    if (slots.empty()) throw ModelError("port model has no slots");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i].empty()) throw ModelError("empty slot name");
      for (std::size_t j = i + 1; j < slots.size(); ++j) {
        if (slots[i] == slots[j]) throw ModelError("duplicate slot name '" + slots[i] + "'");
      }
    }
    for (const auto& [div, parent] : dividers) {
      if (div >= size() || parent >= size() || div == parent) {
        throw ModelError("divider slot must name a different existing parent slot");
      }
    }
    for (auto s : agu_slots) {
      if (s >= size()) throw ModelError("AGU slot out of range");
    }
    if (agu_load_store_sharing && agu_slots.empty()) {
      throw ModelError("agu_sharing requires agu_slots");
    }
    for (const auto& unit : units) {
      if (unit.empty()) throw ModelError("empty unit set");
      for (auto s : unit) {
        if (s >= size()) throw ModelError("unit slot out of range");
      }
    }
  }

  bool operator==(const PortModel&) const = default;
};

/// One µ-op: occupies exactly one of `slots` (sorted indices) for `cycles`.
struct MicroOpGroup {
  std::vector<std::size_t> slots;
  Rational cycles;

  bool operator==(const MicroOpGroup&) const = default;
};

inline bool group_less(const MicroOpGroup& a, const MicroOpGroup& b) {
  if (a.slots != b.slots) return a.slots < b.slots;
  return a.cycles < b.cycles;
}

struct ModelEntry {
  InstructionForm form;
  Rational reciprocal_throughput;
  Rational latency;
  std::vector<MicroOpGroup> groups;
  std::vector<Rational> occupation;

  bool operator==(const ModelEntry&) const = default;
};

/// occupation[s] = sum over groups containing s of cycles / |slots|.
inline std::vector<Rational> derive_occupation(const std::vector<MicroOpGroup>& groups,
                                               std::size_t slot_count) {
  std::vector<Rational> occ(slot_count, Rational(0));
  for (const auto& g : groups) {
    Rational share = g.cycles / static_cast<std::int64_t>(g.slots.size());
    for (auto s : g.slots) occ.at(s) += share;
  }
  return occ;
}

namespace detail {

// Minimal exact covers of `cluster` by sets from `units`. Stops after two
// minimal covers are found since callers only need "unique or not".
inline void find_covers(const std::vector<std::size_t>& remaining,
                        const std::vector<std::vector<std::size_t>>& candidates,
                        std::size_t start, std::vector<std::size_t>& chosen,
                        std::vector<std::vector<std::size_t>>& best, std::size_t& best_size) {
  if (remaining.empty()) {
    if (chosen.size() < best_size) {
      best_size = chosen.size();
      best.clear();
    }
    if (chosen.size() == best_size && best.size() < 2) best.push_back(chosen);
    return;
  }
  if (chosen.size() + 1 > best_size) return;
  for (std::size_t i = start; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    // The lowest remaining slot must be covered by the next chosen set; this
    // keeps covers unordered.
    if (!std::binary_search(c.begin(), c.end(), remaining.front())) continue;
    if (!std::includes(remaining.begin(), remaining.end(), c.begin(), c.end())) continue;
    std::vector<std::size_t> rest;
    std::set_difference(remaining.begin(), remaining.end(), c.begin(), c.end(),
                        std::back_inserter(rest));
    chosen.push_back(i);
    find_covers(rest, candidates, 0, chosen, best, best_size);
    chosen.pop_back();
  }
}

}  // namespace detail

/// Recovers µ-op groups from a bare occupation vector. Slots sharing one
/// positive value form a cluster; the cluster is split into the smallest
/// exact cover by the model's unit sets, or kept whole when no cover exists.
inline std::vector<MicroOpGroup> infer_groups(const std::vector<Rational>& occupation,
                                              const PortModel& model,
                                              std::vector<std::string>* warnings = nullptr) {
  std::vector<std::pair<Rational, std::vector<std::size_t>>> clusters;
  for (std::size_t s = 0; s < occupation.size(); ++s) {
    if (occupation[s] <= 0) continue;
    auto it = std::find_if(clusters.begin(), clusters.end(),
                           [&](const auto& c) { return c.first == occupation[s]; });
    if (it == clusters.end()) {
      clusters.push_back({occupation[s], {s}});
    } else {
      it->second.push_back(s);
    }
  }

  std::vector<std::vector<std::size_t>> units = model.units;
  for (auto& u : units) std::sort(u.begin(), u.end());

  std::vector<MicroOpGroup> groups;
  for (const auto& [value, slots] : clusters) {
    std::vector<std::vector<std::size_t>> best;
    std::size_t best_size = slots.size() + 1;
    std::vector<std::size_t> chosen;
    detail::find_covers(slots, units, 0, chosen, best, best_size);
    if (best.empty()) {
      groups.push_back({slots, value * static_cast<std::int64_t>(slots.size())});
      continue;
    }
    if (best.size() > 1 && warnings) {
      warnings->push_back("ambiguous µ-op grouping for value " + format_exact(value) +
                          "; keeping the first minimal split");
    }
    for (auto idx : best.front()) {
      const auto& unit = units[idx];
      groups.push_back({unit, value * static_cast<std::int64_t>(unit.size())});
    }
  }
  std::sort(groups.begin(), groups.end(), group_less);
  return groups;
}

/// Validates the parts of an entry against `model` and derives its vector.
inline ModelEntry make_entry(InstructionForm form, Rational reciprocal_throughput,
                             Rational latency, std::vector<MicroOpGroup> groups,
                             const PortModel& model) {
  if (form.mnemonic.empty()) throw ModelError("empty mnemonic");
  if (reciprocal_throughput < 0) throw ModelError("negative reciprocal throughput");
  if (latency < 0) throw ModelError("negative latency");
  for (auto& g : groups) {
    if (g.slots.empty()) throw ModelError("µ-op group without eligible slots");
    if (g.cycles <= 0) throw ModelError("µ-op group cycles must be positive");
    std::sort(g.slots.begin(), g.slots.end());
    if (std::adjacent_find(g.slots.begin(), g.slots.end()) != g.slots.end()) {
      throw ModelError("µ-op group repeats a slot");
    }
    if (g.slots.back() >= model.size()) throw ModelError("µ-op group slot out of range");
  }
  std::sort(groups.begin(), groups.end(), group_less);
  ModelEntry entry{std::move(form), reciprocal_throughput, latency, std::move(groups), {}};
  entry.occupation = derive_occupation(entry.groups, model.size());
  return entry;
}

/// Soft check: no non-divider slot may be busier than the measured
/// reciprocal throughput allows.
inline std::optional<std::string> throughput_warning(const ModelEntry& entry,
                                                     const PortModel& model) {
  for (std::size_t s = 0; s < entry.occupation.size(); ++s) {
    if (model.is_divider(s)) continue;
    if (entry.occupation[s] > entry.reciprocal_throughput) {
      return form_key(entry.form) + ": slot " + model.slots[s] + " occupation " +
             format_exact(entry.occupation[s]) + " exceeds reciprocal throughput " +
             format_exact(entry.reciprocal_throughput);
    }
  }
  return std::nullopt;
}

class ModelDatabase {
 public:
  ModelDatabase() = default;
  explicit ModelDatabase(PortModel port_model) : port_model_(std::move(port_model)) {
    port_model_.validate();
  }

  const PortModel& port_model() const { return port_model_; }
  const std::map<std::string, ModelEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Exact match on mnemonic and operand classes; nullptr when absent.
  const ModelEntry* lookup(const InstructionForm& form) const {
    auto it = entries_.find(form_key(form));
    return it == entries_.end() ? nullptr : &it->second;
  }

  void insert(ModelEntry entry) {
    if (entry.occupation.size() != port_model_.size()) {
      throw ModelError("vector length " + std::to_string(entry.occupation.size()) +
                       " does not match " + std::to_string(port_model_.size()) + " slots");
    }
    for (const auto& g : entry.groups) {
      if (g.slots.empty() || g.slots.back() >= port_model_.size() || g.cycles <= 0) {
        throw ModelError("invalid µ-op group in " + form_key(entry.form));
      }
    }
    if (derive_occupation(entry.groups, port_model_.size()) != entry.occupation) {
      throw ModelError("occupation vector of " + form_key(entry.form) +
                       " does not match its µ-op groups");
    }
    auto key = form_key(entry.form);
    if (entries_.contains(key)) throw ModelError("duplicate form " + key);
    entries_.emplace(std::move(key), std::move(entry));
  }

  bool operator==(const ModelDatabase&) const = default;

 private:
  PortModel port_model_;
  std::map<std::string, ModelEntry> entries_;
};

/// Returns a copy of `db` with `entry` added.
inline ModelDatabase add_entry(const ModelDatabase& db, ModelEntry entry) {
  ModelDatabase out = db;
  out.insert(std::move(entry));
  return out;
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    auto pos = s.find(sep);
    parts.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return parts;
}

// Splits on commas that are outside double quotes.
inline std::vector<std::string_view> split_fields(std::string_view s) {
  std::vector<std::string_view> fields;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == ',' && !quoted) {
      fields.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  fields.push_back(trim(s.substr(start)));
  return fields;
}

inline std::string_view unquote(std::string_view s, char open, char close) {
  if (s.size() < 4 || s.front() != '"' || s.back() != '"' || s[1] != open ||
      s[s.size() - 2] != close) {
    return {};
  }
  return s.substr(2, s.size() - 4);
}

inline std::string join_slots(const PortModel& model, const std::vector<std::size_t>& slots,
                              std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i) out += sep;
    out += model.slots[slots[i]];
  }
  return out;
}

inline std::vector<std::size_t> parse_slot_list(const PortModel& model, std::string_view text,
                                                char sep, int line) {
  std::vector<std::size_t> slots;
  for (auto name : split(text, sep)) {
    auto idx = model.slot_index(name);
    if (!idx) throw ModelError("unknown slot name '" + std::string(name) + "'", line);
    slots.push_back(*idx);
  }
  std::sort(slots.begin(), slots.end());
  return slots;
}

inline std::vector<MicroOpGroup> parse_groups(const PortModel& model, std::string_view text,
                                              int line) {
  std::vector<MicroOpGroup> groups;
  if (trim(text).empty()) return groups;
  for (auto part : split(text, ';')) {
    auto colon = part.find(':');
    Rational cycles(1);
    if (colon != std::string_view::npos) {
      auto c = parse_rational(part.substr(colon + 1));
      if (!c) throw ModelError("bad group cycles '" + std::string(part) + "'", line);
      cycles = *c;
    }
    groups.push_back({parse_slot_list(model, part.substr(0, colon), '|', line), cycles});
  }
  return groups;
}

// Joins backslash-continued lines and strips comments. Returns
// (first physical line number, logical line).
inline std::vector<std::pair<int, std::string>> logical_lines(std::string_view text) {
  std::vector<std::pair<int, std::string>> out;
  std::string pending;
  int pending_line = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line_no;
    bool quoted = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') quoted = !quoted;
      if (raw[i] == '#' && !quoted) {
        raw = raw.substr(0, i);
        break;
      }
    }
    raw = trim(raw);
    bool continues = !raw.empty() && raw.back() == '\\';
    if (continues) raw = trim(raw.substr(0, raw.size() - 1));
    if (pending.empty()) {
      pending_line = line_no;
      pending = std::string(raw);
    } else if (!raw.empty()) {
      pending += ' ';
      pending += raw;
    }
    if (!continues) {
      if (!pending.empty()) out.emplace_back(pending_line, std::move(pending));
      pending.clear();
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (!pending.empty()) out.emplace_back(pending_line, std::move(pending));
  return out;
}

}  // namespace detail

/// One canonical entry line. The groups field is written only when the
/// vector alone would not reproduce the entry's groups.
inline std::string format_entry_line(const ModelEntry& entry, const PortModel& model) {
  std::string line = form_key(entry.form) + ", " + format_exact(entry.reciprocal_throughput, 1) +
                     ", " + format_exact(entry.latency, 1) + ", \"(";
  for (std::size_t s = 0; s < entry.occupation.size(); ++s) {
    if (s) line += ',';
    line += format_exact(entry.occupation[s]);
  }
  line += ")\"";
  if (infer_groups(entry.occupation, model) != entry.groups) {
    line += ", \"[";
    for (std::size_t i = 0; i < entry.groups.size(); ++i) {
      if (i) line += ';';
      line += detail::join_slots(model, entry.groups[i].slots, "|");
      line += ':' + format_exact(entry.groups[i].cycles);
    }
    line += "]\"";
  }
  return line;
}

/// Same entry split after the latency field with a backslash continuation,
/// the way hand-maintained model files lay out long vectors.
inline std::string format_entry_wrapped(const ModelEntry& entry, const PortModel& model) {
  std::string line = format_entry_line(entry, model);
  auto quote = line.find('"');
  return line.substr(0, quote) + "\\\n\t\t  " + line.substr(quote);
}

/// Parses model-file text. Non-fatal findings are appended to `warnings`.
inline ModelDatabase parse_model(std::string_view text,
                                 std::vector<std::string>* warnings = nullptr) {
  PortModel pm;
  std::vector<std::pair<int, std::string>> header_dividers, header_units, header_agu;
  std::vector<std::pair<int, std::string>> entry_lines;
  bool saw_entries = false;

  for (auto& [line_no, line] : detail::logical_lines(text)) {
    std::string_view sv = line;
    auto colon = sv.find(':');
    auto first_comma = sv.find(',');
    bool is_header = colon != std::string_view::npos &&
                     (first_comma == std::string_view::npos || colon < first_comma) &&
                     sv.substr(0, colon).find_first_of(" -\"") == std::string_view::npos;
    if (!is_header) {
      entry_lines.emplace_back(line_no, line);
      saw_entries = true;
      continue;
    }
    if (saw_entries) throw ModelError("header line after entries", line_no);
    auto key = detail::trim(sv.substr(0, colon));
    auto value = detail::trim(sv.substr(colon + 1));
    if (key == "arch") {
      pm.arch_id = std::string(value);
    } else if (key == "slots") {
      for (auto s : detail::split(value, ',')) pm.slots.emplace_back(s);
    } else if (key == "divider") {
      header_dividers.emplace_back(line_no, std::string(value));
    } else if (key == "agu_sharing") {
      if (value == "true") {
        pm.agu_load_store_sharing = true;
      } else if (value == "false") {
        pm.agu_load_store_sharing = false;
      } else {
        throw ModelError("agu_sharing must be true or false", line_no);
      }
    } else if (key == "agu_slots") {
      header_agu.emplace_back(line_no, std::string(value));
    } else if (key == "units") {
      header_units.emplace_back(line_no, std::string(value));
    } else {
      throw ModelError("unknown header '" + std::string(key) + "'", line_no);
    }
  }

  for (auto& [line_no, value] : header_dividers) {
    auto arrow = value.find("->");
    if (arrow == std::string::npos) throw ModelError("divider must be <slot>-><parent>", line_no);
    auto div = pm.slot_index(detail::trim(std::string_view(value).substr(0, arrow)));
    auto parent = pm.slot_index(detail::trim(std::string_view(value).substr(arrow + 2)));
    if (!div || !parent) throw ModelError("divider names an unknown slot", line_no);
    pm.dividers.emplace_back(*div, *parent);
  }
  for (auto& [line_no, value] : header_agu) {
    pm.agu_slots = detail::parse_slot_list(pm, value, ',', line_no);
  }
  for (auto& [line_no, value] : header_units) {
    for (auto unit : detail::split(value, ';')) {
      if (unit.empty()) continue;
      pm.units.push_back(detail::parse_slot_list(pm, unit, '|', line_no));
    }
  }
  ModelDatabase db(std::move(pm));
  const PortModel& model = db.port_model();

  for (auto& [line_no, line] : entry_lines) {
    auto fields = detail::split_fields(line);
    if (fields.size() != 4 && fields.size() != 5) {
      throw ModelError("expected 4 or 5 fields, got " + std::to_string(fields.size()), line_no);
    }
    auto form = parse_form_key(fields[0]);
    if (!form) throw ModelError("malformed instruction form '" + std::string(fields[0]) + "'", line_no);
    auto rtp = parse_rational(fields[1]);
    auto lat = parse_rational(fields[2]);
    if (!rtp || !lat) throw ModelError("malformed throughput or latency", line_no);
    auto vec_text = detail::unquote(fields[3], '(', ')');
    if (vec_text.data() == nullptr) throw ModelError("malformed occupation vector", line_no);
    std::vector<Rational> vec;
    for (auto v : detail::split(vec_text, ',')) {
      auto r = parse_rational(v);
      if (!r || *r < 0) throw ModelError("malformed vector value '" + std::string(v) + "'", line_no);
      vec.push_back(*r);
    }
    if (vec.size() != model.size()) {
      throw ModelError("vector length " + std::to_string(vec.size()) + " does not match " +
                           std::to_string(model.size()) + " slots",
                       line_no);
    }
    std::vector<MicroOpGroup> groups;
    if (fields.size() == 5) {
      auto g = detail::unquote(fields[4], '[', ']');
      if (g.data() == nullptr) throw ModelError("malformed group field", line_no);
      groups = detail::parse_groups(model, g, line_no);
    } else {
      std::vector<std::string> inference_warnings;
      groups = infer_groups(vec, model, &inference_warnings);
      if (warnings) {
        for (auto& w : inference_warnings) {
          warnings->push_back("line " + std::to_string(line_no) + ": " + w);
        }
      }
    }
    ModelEntry entry;
    try {
      entry = make_entry(std::move(*form), *rtp, *lat, std::move(groups), model);
    } catch (const ModelError& e) {
      throw ModelError(e.what(), line_no);
    }
    if (entry.occupation != vec) {
      throw ModelError("occupation vector does not match µ-op groups", line_no);
    }
    if (warnings) {
      if (auto w = throughput_warning(entry, model)) {
        warnings->push_back("line " + std::to_string(line_no) + ": " + *w);
      }
    }
    try {
      db.insert(std::move(entry));
    } catch (const ModelError& e) {
      throw ModelError(e.what(), line_no);
    }
  }
  return db;
}

inline ModelDatabase load_model(const std::string& path,
                                std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot read model file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str(), warnings);
}

/// Canonical text: header, then entries sorted by key.
inline std::string save_model(const ModelDatabase& db) {
  const PortModel& pm = db.port_model();
  std::string out = "arch: " + pm.arch_id + "\n";
  out += "slots: ";
  for (std::size_t i = 0; i < pm.slots.size(); ++i) out += (i ? "," : "") + pm.slots[i];
  out += "\n";
  for (const auto& [div, parent] : pm.dividers) {
    out += "divider: " + pm.slots[div] + "->" + pm.slots[parent] + "\n";
  }
  out += std::string("agu_sharing: ") + (pm.agu_load_store_sharing ? "true" : "false") + "\n";
  if (!pm.agu_slots.empty()) out += "agu_slots: " + detail::join_slots(pm, pm.agu_slots, ",") + "\n";
  if (!pm.units.empty()) {
    out += "units: ";
    for (std::size_t i = 0; i < pm.units.size(); ++i) {
      if (i) out += "; ";
      out += detail::join_slots(pm, pm.units[i], "|");
    }
    out += "\n";
  }
  out += "\n";
  for (const auto& [key, entry] : db.entries()) out += format_entry_line(entry, pm) + "\n";
  return out;
}

inline void save_model(const ModelDatabase& db, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write model file '" + path + "'");
  out << save_model(db);
}

}  // namespace portscope
