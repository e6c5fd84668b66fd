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

// AT&T-syntax x86 parsing and IACA-style marker extraction.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "portscope/machine_model.hpp"

namespace portscope {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column = 0)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(const std::string& what, int line, int column) {
    std::string pos;
    if (line > 0) pos = "line " + std::to_string(line);
    if (column > 0) pos += (pos.empty() ? "" : ", ") + std::string("column ") + std::to_string(column);
    return pos.empty() ? what : pos + ": " + what;
  }
  int line_;
  int column_;
};

struct MemoryAddress {
  std::optional<std::string> segment;
  std::optional<std::string> base;
  std::optional<std::string> index;
  int scale = 1;
  std::int64_t displacement = 0;
  // Symbolic displacement such as `table` in `table(,%rax,8)`.
  std::optional<std::string> displacement_symbol;
  bool has_displacement = false;

  bool operator==(const MemoryAddress&) const = default;
};

struct Operand {
  OperandClass cls = OperandClass::kImm;
  // Register name without '%', label symbol, or immediate text without '$'.
  std::string name;
  std::optional<std::int64_t> immediate;
  MemoryAddress mem;

  bool operator==(const Operand&) const = default;
};

enum class LineKind { kInstruction, kLabel, kDirective };

struct Instruction {
  LineKind kind = LineKind::kInstruction;
  // Lowercased mnemonic; label name for labels; directive name for directives.
  std::string mnemonic;
  std::vector<Operand> operands;
  std::string raw_text;
  int line_no = 0;

  bool operator==(const Instruction&) const = default;
};

struct MarkedKernel {
  std::vector<Instruction> lines;
  std::string source_path;
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::optional<OperandClass> register_class(std::string_view name) {
  static const char* const kGpr64[] = {"rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rsp", "rbp"};
  static const char* const kGpr32[] = {"eax", "ebx", "ecx", "edx", "esi", "edi", "esp", "ebp"};
  static const char* const kGpr16[] = {"ax", "bx", "cx", "dx", "si", "di", "sp", "bp"};
  static const char* const kGpr8[] = {"al", "bl", "cl", "dl", "ah", "bh", "ch", "dh",
                                      "sil", "dil", "spl", "bpl"};
  for (auto r : kGpr64) if (name == r) return OperandClass::kGpr64;
  for (auto r : kGpr32) if (name == r) return OperandClass::kGpr32;
  for (auto r : kGpr16) if (name == r) return OperandClass::kGpr16;
  for (auto r : kGpr8) if (name == r) return OperandClass::kGpr8;

  auto numbered = [&](std::string_view prefix, int lo, int hi) -> std::optional<std::string_view> {
    if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
    std::string_view rest = name.substr(prefix.size());
    std::size_t digits = 0;
    while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) ++digits;
    if (digits == 0 || digits > 2 || (digits == 2 && rest[0] == '0')) return std::nullopt;
    int n = std::stoi(std::string(rest.substr(0, digits)));
    if (n < lo || n > hi) return std::nullopt;
    return rest.substr(digits);
  };
  if (auto suffix = numbered("xmm", 0, 15); suffix && suffix->empty()) return OperandClass::kXmm;
  if (auto suffix = numbered("ymm", 0, 15); suffix && suffix->empty()) return OperandClass::kYmm;
  if (auto suffix = numbered("r", 8, 15)) {
    if (suffix->empty()) return OperandClass::kGpr64;
    if (*suffix == "d") return OperandClass::kGpr32;
    if (*suffix == "w") return OperandClass::kGpr16;
    if (*suffix == "b" || *suffix == "l") return OperandClass::kGpr8;
  }
  return std::nullopt;
}

inline bool is_segment_register(std::string_view name) {
  return name == "cs" || name == "ds" || name == "es" || name == "fs" || name == "gs" ||
         name == "ss";
}

inline std::optional<std::int64_t> parse_integer(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool negative = false;
  if (s.front() == '-' || s.front() == '+') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  std::uint64_t value = 0;
  for (char c : s) {
    int digit;
    if (c >= '0' && c <= '9') {
      digit = c - '0';
    } else if (base == 16 && c >= 'a' && c <= 'f') {
      digit = c - 'a' + 10;
    } else if (base == 16 && c >= 'A' && c <= 'F') {
      digit = c - 'A' + 10;
    } else {
      return std::nullopt;
    }
    if (digit >= base) return std::nullopt;
    if (value > (UINT64_MAX - static_cast<std::uint64_t>(digit)) / static_cast<std::uint64_t>(base)) {
      return std::nullopt;
    }
    value = value * static_cast<std::uint64_t>(base) + static_cast<std::uint64_t>(digit);
  }
  auto v = static_cast<std::int64_t>(value);
  return negative ? -v : v;
}

inline bool is_symbol(std::string_view s) {
  if (s.empty()) return false;
  // GNU local numeric labels: 1b, 2f.
  if (std::isdigit(static_cast<unsigned char>(s.front()))) {
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    return i + 1 == s.size() && (s.back() == 'b' || s.back() == 'f');
  }
  auto head = static_cast<unsigned char>(s.front());
  if (!(std::isalpha(head) || head == '_' || head == '.')) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '$' || c == '@';
  });
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string_view strip_comment(std::string_view line) {
  auto hash = line.find('#');
  if (hash != std::string_view::npos) line = line.substr(0, hash);
  return line;
}

}  // namespace detail

/// Classifies one comma-delimited operand token. `line`/`column` only feed
/// error messages.
inline Operand classify_operand(std::string_view token, int line = 0, int column = 0) {
  std::string_view t = detail::trim_view(token);
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError(why + " '" + std::string(t) + "'", line, column);
  };
  if (t.empty()) throw fail("empty operand");

  Operand op;
  if (t.front() == '$') {
    op.cls = OperandClass::kImm;
    op.name = std::string(t.substr(1));
    if (op.name.empty()) throw fail("empty immediate");
    op.immediate = detail::parse_integer(op.name);
    if (!op.immediate && !detail::is_symbol(op.name)) throw fail("malformed immediate");
    return op;
  }

  std::optional<std::string> segment;
  std::string_view rest = t;
  if (t.front() == '%') {
    auto colon = t.find(':');
    if (colon == std::string_view::npos) {
      std::string name = detail::lower(t.substr(1));
      auto cls = detail::register_class(name);
      if (!cls) throw fail("unknown register");
      op.cls = *cls;
      op.name = name;
      return op;
    }
    std::string seg = detail::lower(t.substr(1, colon - 1));
    if (!detail::is_segment_register(seg)) throw fail("unknown segment register");
    segment = seg;
    rest = t.substr(colon + 1);
  }

  auto open = rest.find('(');
  if (open == std::string_view::npos) {
    // Bare symbol or absolute address.
    if (!segment && detail::is_symbol(rest)) {
      op.cls = OperandClass::kLabel;
      op.name = std::string(rest);
      return op;
    }
    auto value = detail::parse_integer(rest);
    if (!value) throw fail("malformed operand");
    op.cls = OperandClass::kMem;
    op.mem.segment = segment;
    op.mem.displacement = *value;
    op.mem.has_displacement = true;
    return op;
  }

  if (rest.back() != ')') throw fail("malformed memory expression");
  op.cls = OperandClass::kMem;
  op.mem.segment = segment;
  std::string_view disp = detail::trim_view(rest.substr(0, open));
  if (!disp.empty()) {
    op.mem.has_displacement = true;
    if (auto v = detail::parse_integer(disp)) {
      op.mem.displacement = *v;
    } else {
      // symbol, symbol+off, symbol-off
      auto sign = disp.find_first_of("+-", 1);
      std::string_view sym = disp.substr(0, sign);
      if (!detail::is_symbol(sym)) throw fail("malformed displacement");
      op.mem.displacement_symbol = std::string(sym);
      if (sign != std::string_view::npos) {
        auto off = detail::parse_integer(disp.substr(sign));
        if (!off) throw fail("malformed displacement");
        op.mem.displacement = *off;
      }
    }
  }

  std::string_view inner = rest.substr(open + 1, rest.size() - open - 2);
  if (inner.find_first_of("()") != std::string_view::npos) throw fail("malformed memory expression");
  std::vector<std::string_view> parts;
  while (true) {
    auto comma = inner.find(',');
    parts.push_back(detail::trim_view(inner.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  if (parts.size() > 3) throw fail("malformed memory expression");

  auto address_register = [&](std::string_view r, bool allow_rip) -> std::string {
    if (r.size() < 2 || r.front() != '%') throw fail("malformed memory expression");
    std::string name = detail::lower(r.substr(1));
    if (allow_rip && (name == "rip" || name == "eip")) return name;
    auto cls = detail::register_class(name);
    if (!cls || (*cls != OperandClass::kGpr64 && *cls != OperandClass::kGpr32)) {
      throw fail("unknown address register");
    }
    return name;
  };
  if (!parts[0].empty()) op.mem.base = address_register(parts[0], true);
  if (parts.size() >= 2 && !parts[1].empty()) op.mem.index = address_register(parts[1], false);
  if (parts.size() == 3) {
    auto scale = detail::parse_integer(parts[2]);
    if (!scale || (*scale != 1 && *scale != 2 && *scale != 4 && *scale != 8)) {
      throw fail("scale must be 1, 2, 4 or 8");
    }
    if (!op.mem.index) throw fail("scale without index register");
    op.mem.scale = static_cast<int>(*scale);
  }
  if (!op.mem.base && !op.mem.index && !op.mem.has_displacement) {
    throw fail("memory expression without base, index or displacement");
  }
  return op;
}

/// Parses one source line. Comments start at '#'.
inline Instruction parse_instruction(std::string_view line, int line_no) {
  Instruction instr;
  instr.raw_text = std::string(line);
  while (!instr.raw_text.empty() && (instr.raw_text.back() == '\n' || instr.raw_text.back() == '\r')) {
    instr.raw_text.pop_back();
  }
  instr.line_no = line_no;

  std::string_view body = detail::trim_view(detail::strip_comment(line));
  if (body.empty()) throw ParseError("empty line", line_no);
  const auto offset = static_cast<int>(body.data() - line.data());

  if (body.back() == ':' && body.find_first_of(" \t") == std::string_view::npos) {
    std::string_view name = body.substr(0, body.size() - 1);
    if (!detail::is_symbol(name) && !std::all_of(name.begin(), name.end(), [](unsigned char c) {
          return std::isdigit(c);
        })) {
      throw ParseError("malformed label '" + std::string(name) + "'", line_no, offset + 1);
    }
    instr.kind = LineKind::kLabel;
    instr.mnemonic = std::string(name);
    return instr;
  }

  auto ws = body.find_first_of(" \t");
  std::string_view head = body.substr(0, ws);
  std::string_view rest = ws == std::string_view::npos ? std::string_view{} : body.substr(ws);

  if (head.front() == '.') {
    instr.kind = LineKind::kDirective;
    instr.mnemonic = std::string(head);
    return instr;
  }
  if (head.find(':') != std::string_view::npos) {
    throw ParseError("label and instruction on one line are not supported", line_no, offset + 1);
  }
  if (!std::all_of(head.begin(), head.end(), [](unsigned char c) { return std::isalnum(c); })) {
    throw ParseError("malformed mnemonic '" + std::string(head) + "'", line_no, offset + 1);
  }

  instr.kind = LineKind::kInstruction;
  instr.mnemonic = detail::lower(head);

  // Split operands on commas outside parentheses.
  int depth = 0;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    std::string_view tok = rest.substr(start, end - start);
    std::string_view trimmed = detail::trim_view(tok);
    int column = offset + static_cast<int>(ws) + static_cast<int>(trimmed.data() - rest.data()) + 1;
    if (trimmed.empty()) throw ParseError("empty operand", line_no, column);
    instr.operands.push_back(classify_operand(trimmed, line_no, column));
  };
  if (!detail::trim_view(rest).empty()) {
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (rest[i] == '(') ++depth;
      if (rest[i] == ')') --depth;
      if (rest[i] == ',' && depth == 0) {
        emit(i);
        start = i + 1;
      }
    }
    emit(rest.size());
  }
  return instr;
}

inline InstructionForm instruction_form(const Instruction& instr) {
  InstructionForm form;
  form.mnemonic = instr.mnemonic;
  for (const auto& op : instr.operands) form.operands.push_back(op.cls);
  return form;
}

/// Destination-last convention: a store writes a memory operand.
inline bool is_store(const Instruction& instr) {
  return instr.kind == LineKind::kInstruction && !instr.operands.empty() &&
         instr.operands.back().cls == OperandClass::kMem;
}

inline bool is_load(const Instruction& instr) {
  if (instr.kind != LineKind::kInstruction || instr.operands.size() < 2) return false;
  for (std::size_t i = 0; i + 1 < instr.operands.size(); ++i) {
    if (instr.operands[i].cls == OperandClass::kMem) return true;
  }
  return false;
}

namespace detail {

enum class MarkerKind { kNone, kStart, kEnd };

inline MarkerKind marker_mov(std::string_view line) {
  static const std::regex kMov(R"(^\s*movl?\s+\$(111|222)\s*,\s*%ebx\s*$)", std::regex::icase);
  std::string s(strip_comment(line));
  std::smatch m;
  if (!std::regex_match(s, m, kMov)) return MarkerKind::kNone;
  return m[1] == "111" ? MarkerKind::kStart : MarkerKind::kEnd;
}

inline bool marker_bytes(std::string_view line) {
  static const std::regex kBytes(R"(^\s*\.byte\s+100\s*,\s*103\s*,\s*144\s*$)", std::regex::icase);
  return std::regex_match(std::string(strip_comment(line)), kBytes);
}

}  // namespace detail

/// Returns the lines strictly between the start and end marker pairs, with
/// blank and comment-only lines dropped.
inline MarkedKernel extract_marked_kernel(std::string_view text, std::string source_path = {}) {
  struct RawLine {
    int line_no;
    std::string_view text;
  };
  std::vector<RawLine> lines;
  int n = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view l = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back({++n, l});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }

  // Index of the next non-blank, non-comment line after i.
  auto next_code = [&](std::size_t i) -> std::optional<std::size_t> {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (!detail::trim_view(detail::strip_comment(lines[j].text)).empty()) return j;
    }
    return std::nullopt;
  };

  std::optional<std::size_t> body_begin, body_end;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto kind = detail::marker_mov(lines[i].text);
    if (kind == detail::MarkerKind::kNone) continue;
    auto j = next_code(i);
    if (!j || !detail::marker_bytes(lines[*j].text)) continue;
    if (kind == detail::MarkerKind::kStart) {
      if (body_begin) throw ParseError("nested start marker", lines[i].line_no);
      body_begin = *j + 1;
    } else {
      if (!body_begin) throw ParseError("end marker before start marker", lines[i].line_no);
      body_end = i;
      break;
    }
    i = *j;
  }
  if (!body_begin) throw ParseError("start marker not found", 0);
  if (!body_end) throw ParseError("end marker not found", 0);

  MarkedKernel kernel;
  kernel.source_path = std::move(source_path);
  for (std::size_t i = *body_begin; i < *body_end; ++i) {
    if (detail::trim_view(detail::strip_comment(lines[i].text)).empty()) continue;
    kernel.lines.push_back(parse_instruction(lines[i].text, lines[i].line_no));
  }
  return kernel;
}

/// Marker pair text used to delimit a kernel.
inline std::string start_marker() { return "\tmovl\t$111, %ebx\n\t.byte\t100,103,144\n"; }
inline std::string end_marker() { return "\tmovl\t$222, %ebx\n\t.byte\t100,103,144\n"; }

}  // namespace portscope
