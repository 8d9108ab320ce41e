#include "wdiv/wasmscan.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace wdiv::wasm {

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::bad_magic: return "bad_magic";
    case ParseErrorKind::truncated_section: return "truncated_section";
    case ParseErrorKind::malformed_leb128: return "malformed_leb128";
    case ParseErrorKind::count_mismatch: return "count_mismatch";
  }
  return "unknown";
}

ParseError::ParseError(ParseErrorKind kind, std::uint64_t offset, const std::string& detail)
    : Error(std::string(to_string(kind)) + " at offset " + std::to_string(offset) + ": " + detail),
      kind_(kind),
      offset_(offset) {}

std::string_view to_string(ExternalKind kind) {
  switch (kind) {
    case ExternalKind::function: return "func";
    case ExternalKind::table: return "table";
    case ExternalKind::memory: return "memory";
    case ExternalKind::global: return "global";
    case ExternalKind::tag: return "tag";
  }
  return "unknown";
}

namespace {

class Reader {
 public:
  Reader(std::span<const std::uint8_t> data, std::uint64_t base) : data_(data), base_(base) {}

  std::uint64_t pos() const { return base_ + at_; }
  std::size_t offset() const { return at_; }
  bool eof() const { return at_ >= data_.size(); }
  std::size_t remaining() const { return data_.size() - at_; }

  std::uint8_t byte() {
    if (eof()) throw ParseError(ParseErrorKind::truncated_section, pos(), "unexpected end of data");
    return data_[at_++];
  }

  std::uint8_t peek() const {
    if (eof()) throw ParseError(ParseErrorKind::truncated_section, pos(), "unexpected end of data");
    return data_[at_];
  }

  std::span<const std::uint8_t> take(std::uint64_t n) {
    if (n > remaining()) {
      throw ParseError(ParseErrorKind::truncated_section, pos(),
                       "need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()));
    }
    auto out = data_.subspan(at_, static_cast<std::size_t>(n));
    at_ += static_cast<std::size_t>(n);
    return out;
  }

  std::span<const std::uint8_t> rest() const { return data_.subspan(at_); }

  Reader sub(std::uint64_t n) {
    const std::uint64_t start = pos();
    return Reader(take(n), start);
  }

  std::uint64_t unsigned_leb(unsigned bits) {
    const std::uint64_t start = pos();
    const unsigned max_bytes = (bits + 6) / 7;
    std::uint64_t result = 0;
    for (unsigned i = 0; i < max_bytes; ++i) {
      const std::uint8_t b = byte();
      const unsigned shift = 7 * i;
      if (i == max_bytes - 1) {
        const unsigned left = bits - shift;
        if ((b & 0x80) != 0 || (left < 7 && (b >> left) != 0)) {
          throw ParseError(ParseErrorKind::malformed_leb128, start, "unsigned LEB128 too long");
        }
      }
      result |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if ((b & 0x80) == 0) return result;
    }
    throw ParseError(ParseErrorKind::malformed_leb128, start, "unsigned LEB128 too long");
  }

  std::int64_t signed_leb(unsigned bits) {
    const std::uint64_t start = pos();
    const unsigned max_bytes = (bits + 6) / 7;
    std::uint64_t result = 0;
    for (unsigned i = 0; i < max_bytes; ++i) {
      const std::uint8_t b = byte();
      const unsigned shift = 7 * i;
      if (i == max_bytes - 1) {
        const unsigned left = bits - shift;
        bool bad = (b & 0x80) != 0;
        if (!bad && left < 7) {
          const std::uint8_t sign = (b >> (left - 1)) & 1;
          const std::uint8_t high = static_cast<std::uint8_t>((b & 0x7F) >> left);
          const std::uint8_t expect = sign ? static_cast<std::uint8_t>(0x7F >> left) : 0;
          bad = high != expect;
        }
        if (bad) throw ParseError(ParseErrorKind::malformed_leb128, start, "signed LEB128 too long");
      }
      result |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if ((b & 0x80) == 0) {
        const unsigned used = shift + 7;
        if (used < 64 && (b & 0x40) != 0) result |= ~std::uint64_t{0} << used;
        return static_cast<std::int64_t>(result);
      }
    }
    throw ParseError(ParseErrorKind::malformed_leb128, start, "signed LEB128 too long");
  }

  std::uint32_t u32() { return static_cast<std::uint32_t>(unsigned_leb(32)); }
  std::uint64_t u64() { return unsigned_leb(64); }
  std::int32_t s32() { return static_cast<std::int32_t>(signed_leb(32)); }
  std::int64_t s64() { return signed_leb(64); }
  std::int64_t s33() { return signed_leb(33); }

  std::string name() {
    const auto n = u32();
    auto raw = take(n);
    return std::string(raw.begin(), raw.end());
  }

 private:
  std::span<const std::uint8_t> data_;
  std::uint64_t base_;
  std::size_t at_ = 0;
};

void skip_valtype(Reader& r) {
  const std::uint8_t b = r.byte();
  if (b == 0x63 || b == 0x64) r.s33();
}

void skip_blocktype(Reader& r) {
  const std::uint8_t b = r.peek();
  if (b == 0x63 || b == 0x64) {
    r.byte();
    r.s33();
  } else if (b >= 0x40 && b < 0x80) {
    r.byte();
  } else {
    r.s33();
  }
}

void skip_limits(Reader& r) {
  const std::uint8_t flags = r.byte();
  r.u64();
  if (flags & 0x01) r.u64();
}

void memarg(Reader& r, Instruction& ins) {
  const auto align = r.u32();
  if (align & 0x40) r.u32();
  ins.index = r.u64();
}

struct UnknownOpcode {
  std::string what;
};

void decode_misc(Reader& r, Instruction& ins) {
  ins.sub = r.u32();
  switch (ins.sub) {
    case 0: case 1: case 2: case 3: case 4: case 5: case 6: case 7:
      break;
    case 8:  // memory.init
      ins.index = r.u32();
      r.u32();
      break;
    case 9:  // data.drop
    case 13:  // elem.drop
    case 15: case 16: case 17:  // table.grow/size/fill
      ins.index = r.u32();
      break;
    case 10:  // memory.copy
      ins.index = r.u32();
      r.u32();
      break;
    case 11:  // memory.fill
      ins.index = r.u32();
      break;
    case 12:  // table.init
    case 14:  // table.copy
      ins.index = r.u32();
      r.u32();
      break;
    default:
      throw UnknownOpcode{"unknown 0xFC sub-opcode " + std::to_string(ins.sub)};
  }
}

void decode_simd(Reader& r, Instruction& ins) {
  ins.sub = r.u32();
  const auto s = ins.sub;
  if (s <= 11 || s == 92 || s == 93) {
    memarg(r, ins);
  } else if (s == 12 || s == 13) {
    r.take(16);
  } else if (s >= 21 && s <= 34) {
    r.byte();
  } else if (s >= 84 && s <= 91) {
    memarg(r, ins);
    r.byte();
  } else if (s <= 275) {
    // Plain vector operations without immediates.
  } else {
    throw UnknownOpcode{"unknown 0xFD sub-opcode " + std::to_string(s)};
  }
}

void decode_atomic(Reader& r, Instruction& ins) {
  ins.sub = r.u32();
  if (ins.sub == 3) {
    r.byte();  // atomic.fence
  } else if (ins.sub <= 0x4E) {
    memarg(r, ins);
  } else {
    throw UnknownOpcode{"unknown 0xFE sub-opcode " + std::to_string(ins.sub)};
  }
}

}  // namespace

DecodedBody decode_expression(std::span<const std::uint8_t> code, std::uint64_t base_offset) {
  DecodedBody out;
  Reader r(code, base_offset);
  int depth = 0;
  try {
    while (!r.eof()) {
      Instruction ins;
      ins.position = r.pos();
      ins.opcode = r.byte();
      const std::uint8_t op = ins.opcode;
      bool closes = false;
      switch (op) {
        case 0x00: case 0x01: case 0x05: case 0x0F: case 0x19: case 0x1A: case 0x1B:
        case 0xD1: case 0xD3: case 0xD4: case 0x0A:
          break;
        case 0x0B:
          if (--depth < 0) closes = true;
          break;
        case 0x02: case 0x03: case 0x04: case 0x06:
          skip_blocktype(r);
          ++depth;
          break;
        case 0x1F: {
          skip_blocktype(r);
          const auto n = r.u32();
          for (std::uint32_t i = 0; i < n; ++i) {
            const auto kind = r.byte();
            if (kind <= 1) r.u32();
            else if (kind > 3) throw UnknownOpcode{"unknown catch kind"};
            r.u32();
          }
          ++depth;
          break;
        }
        case 0x18:
          ins.index = r.u32();
          --depth;
          break;
        case 0x07: case 0x08: case 0x09: case 0x0C: case 0x0D: case 0x10: case 0x12:
        case 0x14: case 0x15: case 0x20: case 0x21: case 0x22: case 0x23: case 0x24:
        case 0x25: case 0x26: case 0xD2: case 0xD5: case 0xD6:
          ins.index = r.u32();
          break;
        case 0x0E: {
          const auto n = r.u32();
          for (std::uint32_t i = 0; i < n; ++i) r.u32();
          ins.index = r.u32();
          break;
        }
        case 0x11: case 0x13:
          ins.index = r.u32();
          r.u32();
          break;
        case 0x1C: {
          const auto n = r.u32();
          for (std::uint32_t i = 0; i < n; ++i) skip_valtype(r);
          break;
        }
        case 0x3F: case 0x40:
          ins.index = r.u32();
          break;
        case 0x41:
          ins.value = r.s32();
          break;
        case 0x42:
          ins.value = r.s64();
          break;
        case 0x43:
          r.take(4);
          break;
        case 0x44:
          r.take(8);
          break;
        case 0xD0:
          r.s33();
          break;
        case op::kPrefixMisc:
          decode_misc(r, ins);
          break;
        case op::kPrefixSimd:
          decode_simd(r, ins);
          break;
        case op::kPrefixAtomic:
          decode_atomic(r, ins);
          break;
        default:
          if (op >= 0x28 && op <= 0x3E) {
            memarg(r, ins);
          } else if (op >= 0x45 && op <= 0xC4) {
            // Numeric instructions carry no immediates.
          } else {
            std::ostringstream msg;
            msg << "unknown opcode 0x" << std::hex << static_cast<int>(op) << " at offset " << std::dec
                << ins.position;
            throw UnknownOpcode{msg.str()};
          }
      }
      out.instructions.push_back(ins);
      if (closes) break;
    }
  } catch (const UnknownOpcode& e) {
    out.opaque = true;
    out.note = e.what;
  } catch (const ParseError& e) {
    out.opaque = true;
    out.note = e.what();
  }
  out.consumed = r.offset();
  return out;
}

namespace {

struct Value {
  enum Tag { other, sp, frame, restored, constant } tag = other;
  std::uint32_t global = 0;
  std::int64_t k = 0;
  bool tee = false;
};

}  // namespace

std::optional<SpPattern> detect_sp_pattern(std::span<const Instruction> body, std::size_t window) {
  std::vector<Value> stack;
  std::map<std::uint64_t, Value> locals;
  std::map<std::uint32_t, Value> globals;
  std::optional<SpPattern> found;

  auto pop = [&]() {
    if (stack.empty()) return Value{};
    Value v = stack.back();
    stack.pop_back();
    return v;
  };

  for (std::size_t i = 0; i < body.size(); ++i) {
    const auto& ins = body[i];
    switch (ins.opcode) {
      case op::kGlobalGet: {
        const auto g = static_cast<std::uint32_t>(ins.index);
        auto it = globals.find(g);
        stack.push_back(it != globals.end() ? it->second : Value{Value::sp, g, 0, false});
        break;
      }
      case op::kLocalGet: {
        auto it = locals.find(ins.index);
        stack.push_back(it != locals.end() ? it->second : Value{});
        break;
      }
      case op::kLocalSet:
        locals[ins.index] = pop();
        break;
      case op::kLocalTee:
        if (stack.empty()) stack.push_back(Value{});
        stack.back().tee = true;
        locals[ins.index] = stack.back();
        break;
      case op::kI32Const:
        stack.push_back(Value{Value::constant, 0, ins.value, false});
        break;
      case op::kI32Sub: {
        const Value b = pop();
        const Value a = pop();
        if (a.tag == Value::sp && b.tag == Value::constant && b.k > 0) {
          stack.push_back(Value{Value::frame, a.global, b.k, false});
        } else {
          stack.push_back(Value{});
        }
        break;
      }
      case op::kI32Add: {
        const Value b = pop();
        const Value a = pop();
        const Value* f = a.tag == Value::frame ? &a : (b.tag == Value::frame ? &b : nullptr);
        const Value* c = a.tag == Value::constant ? &a : (b.tag == Value::constant ? &b : nullptr);
        if (f && c && f->k == c->k) {
          stack.push_back(Value{Value::restored, f->global, 0, false});
        } else if (a.tag == Value::sp && b.tag == Value::constant && b.k < 0) {
          stack.push_back(Value{Value::frame, a.global, -b.k, false});
        } else {
          stack.push_back(Value{});
        }
        break;
      }
      case op::kGlobalSet: {
        const auto g = static_cast<std::uint32_t>(ins.index);
        const Value v = pop();
        if (!found) {
          if (i < window && v.tag == Value::frame && v.global == g && v.k <= 0xFFFFFFFFLL) {
            SpPattern p;
            p.prologue.frame_size = static_cast<std::uint32_t>(v.k);
            p.prologue.uses_tee = v.tee;
            p.prologue.global_index = g;
            found = p;
            globals[g] = Value{Value::frame, g, v.k, false};
          } else {
            globals[g] = v;
          }
        } else if (g == found->prologue.global_index) {
          if ((v.tag == Value::restored || v.tag == Value::sp) && v.global == g) {
            found->epilogue_present = true;
          }
          globals[g] = v.tag == Value::frame ? v : Value{Value::frame, g,
                                                         static_cast<std::int64_t>(found->prologue.frame_size),
                                                         false};
        }
        break;
      }
      default:
        stack.clear();
        break;
    }
  }
  return found;
}

namespace {

void parse_names(Reader r, std::map<std::uint32_t, std::string>& names) {
  while (!r.eof()) {
    const auto id = r.byte();
    const auto size = r.u32();
    Reader sub = r.sub(size);
    if (id != 1) continue;
    const auto n = sub.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto idx = sub.u32();
      names[idx] = sub.name();
    }
  }
}

struct Body {
  std::span<const std::uint8_t> bytes;
  std::uint64_t offset = 0;
};

}  // namespace

WasmModuleSummary parse_module(std::span<const std::uint8_t> bytes, const ScanOptions& options) {
  static constexpr std::uint8_t kHeader[8] = {0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00};
  for (std::size_t i = 0; i < 8; ++i) {
    if (i >= bytes.size()) {
      throw ParseError(ParseErrorKind::bad_magic, i, "module shorter than its header");
    }
    if (bytes[i] != kHeader[i]) {
      throw ParseError(ParseErrorKind::bad_magic, i,
                       i < 4 ? "not a wasm binary" : "unsupported binary version");
    }
  }

  WasmModuleSummary summary;
  Reader r(bytes.subspan(8), 8);
  std::vector<std::string> imported_functions;
  std::uint32_t declared_functions = 0;
  bool saw_function_section = false;
  std::vector<Body> bodies;
  std::uint64_t code_section_offset = 0;
  bool saw_code_section = false;
  std::map<std::uint32_t, std::string> names;

  while (!r.eof()) {
    SectionEntry entry;
    entry.offset = r.pos();
    entry.id = r.byte();
    const auto size = r.u32();
    if (size > r.remaining()) {
      throw ParseError(ParseErrorKind::truncated_section, entry.offset,
                       "section " + std::to_string(entry.id) + " declares " + std::to_string(size) +
                           " bytes, " + std::to_string(r.remaining()) + " remain");
    }
    const std::uint64_t header = r.pos() - entry.offset;
    entry.length = header + size;
    Reader s = r.sub(size);

    switch (entry.id) {
      case 0: {
        entry.name = s.name();
        if (entry.name == "name") {
          try {
            parse_names(s.sub(s.remaining()), names);
          } catch (const ParseError& e) {
            summary.notes.push_back(std::string("name section ignored: ") + e.what());
          }
        }
        break;
      }
      case 1: {
        summary.type_count = s.u32();
        for (std::uint32_t i = 0; i < summary.type_count; ++i) {
          const auto form = s.byte();
          if (form != 0x60) {
            summary.notes.push_back("type section: non-function type form, rest skipped");
            break;
          }
          for (int side = 0; side < 2; ++side) {
            const auto n = s.u32();
            for (std::uint32_t j = 0; j < n; ++j) skip_valtype(s);
          }
        }
        break;
      }
      case 2: {
        const auto n = s.u32();
        bool stop = false;
        for (std::uint32_t i = 0; i < n && !stop; ++i) {
          Import imp;
          imp.module = s.name();
          imp.field = s.name();
          const auto kind = s.byte();
          switch (kind) {
            case 0:
              s.u32();
              imported_functions.push_back(imp.field);
              break;
            case 1:
              skip_valtype(s);
              skip_limits(s);
              break;
            case 2:
              skip_limits(s);
              break;
            case 3:
              skip_valtype(s);
              s.byte();
              ++summary.global_count;
              break;
            case 4:
              s.byte();
              s.u32();
              break;
            default:
              summary.notes.push_back("import section: unknown kind " + std::to_string(kind) +
                                      ", rest skipped");
              stop = true;
              continue;
          }
          imp.kind = static_cast<ExternalKind>(kind);
          summary.imports.push_back(std::move(imp));
        }
        summary.imported_function_count = static_cast<std::uint32_t>(imported_functions.size());
        break;
      }
      case 3: {
        saw_function_section = true;
        declared_functions = s.u32();
        for (std::uint32_t i = 0; i < declared_functions; ++i) s.u32();
        break;
      }
      case 6: {
        const auto n = s.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          skip_valtype(s);
          s.byte();
          auto init = decode_expression(s.rest(), s.pos());
          if (init.opaque) {
            summary.notes.push_back("global section: undecodable initializer, rest skipped");
            break;
          }
          s.take(init.consumed);
          ++summary.global_count;
        }
        break;
      }
      case 7: {
        const auto n = s.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          Export ex;
          ex.name = s.name();
          const auto kind = s.byte();
          ex.kind = kind <= 4 ? static_cast<ExternalKind>(kind) : ExternalKind::function;
          ex.index = s.u32();
          if (kind > 4) {
            summary.notes.push_back("export " + ex.name + ": unknown kind " + std::to_string(kind));
            continue;
          }
          summary.exports.push_back(std::move(ex));
        }
        break;
      }
      case 10: {
        saw_code_section = true;
        code_section_offset = entry.offset;
        const auto n = s.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          const auto body_size = s.u32();
          Body b;
          b.offset = s.pos();
          b.bytes = s.take(body_size);
          bodies.push_back(b);
        }
        break;
      }
      default:
        break;
    }
    summary.sections.push_back(std::move(entry));
  }

  if ((saw_function_section || saw_code_section) && declared_functions != bodies.size()) {
    throw ParseError(ParseErrorKind::count_mismatch, code_section_offset,
                     std::to_string(declared_functions) + " functions declared, " +
                         std::to_string(bodies.size()) + " bodies present");
  }

  for (std::size_t i = 0; i < bodies.size(); ++i) {
    FunctionFacts facts;
    facts.index = summary.imported_function_count + static_cast<std::uint32_t>(i);
    if (auto it = names.find(facts.index); it != names.end()) facts.name = it->second;
    Reader br(bodies[i].bytes, bodies[i].offset);
    DecodedBody decoded;
    try {
      const auto groups = br.u32();
      for (std::uint32_t g = 0; g < groups; ++g) {
        br.u32();
        skip_valtype(br);
      }
      decoded = decode_expression(br.take(br.remaining()), br.pos());
    } catch (const ParseError& e) {
      decoded.opaque = true;
      decoded.note = std::string("locals: ") + e.what();
    }
    facts.opaque = decoded.opaque;
    facts.note = decoded.note;
    facts.instruction_count = decoded.instructions.size();
    if (auto p = detect_sp_pattern(decoded.instructions, options.prologue_window)) {
      facts.sp_prologue = p->prologue;
      facts.sp_epilogue_present = p->epilogue_present;
    }
    for (const auto& ins : decoded.instructions) {
      if ((ins.opcode == op::kCall || ins.opcode == 0x12) && ins.index < imported_functions.size() &&
          imported_functions[ins.index].find("stack_chk") != std::string::npos) {
        facts.calls_named_canary_check = true;
        break;
      }
    }
    summary.functions.push_back(std::move(facts));
  }
  return summary;
}

ProtectionReport protection_report(const WasmModuleSummary& summary) {
  ProtectionReport report;
  for (const auto& ex : summary.exports) {
    if (ex.kind == ExternalKind::function && ex.name == "_start") report.start_exported = true;
  }
  for (const auto& imp : summary.imports) {
    if (imp.field.find("stack_chk") != std::string::npos) {
      report.canary_imports.push_back(imp.module + "." + imp.field);
    }
  }
  for (const auto& fn : summary.functions) {
    if (fn.opaque) ++report.opaque_functions;
    if (!fn.sp_prologue) continue;
    FrameFinding f;
    f.function_index = fn.index;
    f.function_name = fn.name;
    f.frame_size = fn.sp_prologue->frame_size;
    f.sp_global = fn.sp_prologue->global_index;
    f.uses_tee = fn.sp_prologue->uses_tee;
    f.epilogue_present = fn.sp_epilogue_present;
    f.canary_check = fn.calls_named_canary_check;
    report.frames.push_back(std::move(f));
  }
  return report;
}

std::string ProtectionReport::text() const {
  std::ostringstream out;
  out << "_start exported: " << (start_exported ? "yes" : "no") << "\n";
  out << "shadow-stack frames: " << frames.size() << "\n";
  for (const auto& f : frames) {
    out << "  func " << f.function_index;
    if (!f.function_name.empty()) out << " " << f.function_name;
    out << ": frame " << f.frame_size << " bytes, "
        << (f.canary_check ? "canary check" : "no canary check") << " (sp global " << f.sp_global
        << (f.uses_tee ? ", via local.tee" : "") << (f.epilogue_present ? ", restored" : ", not restored")
        << ")\n";
  }
  out << "canary imports: ";
  if (canary_imports.empty()) {
    out << "none";
  } else {
    for (std::size_t i = 0; i < canary_imports.size(); ++i) out << (i ? ", " : "") << canary_imports[i];
  }
  out << "\n";
  if (opaque_functions) out << "opaque functions: " << opaque_functions << "\n";
  return out.str();
}

std::string ProtectionReport::json() const {
  nlohmann::ordered_json j;
  j["start_exported"] = start_exported;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : frames) {
    arr.push_back({{"function_index", f.function_index},
                   {"function_name", f.function_name},
                   {"frame_size", f.frame_size},
                   {"sp_global", f.sp_global},
                   {"uses_tee", f.uses_tee},
                   {"epilogue_present", f.epilogue_present},
                   {"canary_check", f.canary_check}});
  }
  j["frames"] = arr;
  j["canary_imports"] = canary_imports;
  j["opaque_functions"] = opaque_functions;
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

}  // namespace wdiv::wasm
