#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wdiv/errors.hpp"

namespace wdiv::wasm {

enum class ParseErrorKind { bad_magic, truncated_section, malformed_leb128, count_mismatch };

std::string_view to_string(ParseErrorKind kind);

/// Structural decoding failure, positioned at the offending byte.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::uint64_t offset, const std::string& detail);

  ParseErrorKind kind() const { return kind_; }
  std::uint64_t offset() const { return offset_; }

 private:
  ParseErrorKind kind_;
  std::uint64_t offset_;
};

enum class ExternalKind : std::uint8_t { function = 0, table = 1, memory = 2, global = 3, tag = 4 };

std::string_view to_string(ExternalKind kind);

namespace op {
inline constexpr std::uint8_t kBlock = 0x02;
inline constexpr std::uint8_t kLoop = 0x03;
inline constexpr std::uint8_t kIf = 0x04;
inline constexpr std::uint8_t kEnd = 0x0B;
inline constexpr std::uint8_t kCall = 0x10;
inline constexpr std::uint8_t kCallIndirect = 0x11;
inline constexpr std::uint8_t kLocalGet = 0x20;
inline constexpr std::uint8_t kLocalSet = 0x21;
inline constexpr std::uint8_t kLocalTee = 0x22;
inline constexpr std::uint8_t kGlobalGet = 0x23;
inline constexpr std::uint8_t kGlobalSet = 0x24;
inline constexpr std::uint8_t kI32Const = 0x41;
inline constexpr std::uint8_t kI64Const = 0x42;
inline constexpr std::uint8_t kI32Add = 0x6A;
inline constexpr std::uint8_t kI32Sub = 0x6B;
inline constexpr std::uint8_t kPrefixMisc = 0xFC;
inline constexpr std::uint8_t kPrefixSimd = 0xFD;
inline constexpr std::uint8_t kPrefixAtomic = 0xFE;
}  // namespace op

/// One decoded instruction. Only the first index/offset immediate and the
/// constant value are kept; other immediates are skipped.
struct Instruction {
  std::uint8_t opcode = 0;
  /// Sub-opcode for 0xFC/0xFD/0xFE prefixed instructions.
  std::uint32_t sub = 0;
  /// Local/global/function index, branch depth, or memarg offset.
  std::uint64_t index = 0;
  /// i32.const / i64.const value.
  std::int64_t value = 0;
  /// Byte offset of the opcode within the module.
  std::uint64_t position = 0;
};

struct DecodedBody {
  std::vector<Instruction> instructions;
  /// Decoding stopped early (unknown opcode or bad immediate); see note.
  bool opaque = false;
  std::string note;
  /// Bytes consumed, including the closing `end` when reached.
  std::size_t consumed = 0;
};

/// Decodes an expression until its closing `end` (or the span's end).
/// Never throws; failures mark the body opaque.
DecodedBody decode_expression(std::span<const std::uint8_t> code, std::uint64_t base_offset);

struct SpPrologue {
  std::uint32_t frame_size = 0;
  bool uses_tee = false;
  /// Global used as stack pointer; 0 by convention, reported rather than assumed.
  std::uint32_t global_index = 0;

  friend bool operator==(const SpPrologue&, const SpPrologue&) = default;
};

struct SpPattern {
  SpPrologue prologue;
  bool epilogue_present = false;

  friend bool operator==(const SpPattern&, const SpPattern&) = default;
};

inline constexpr std::size_t kDefaultPrologueWindow = 12;

/// Finds the stack-pointer frame allocation
/// `global.get G; i32.const K; i32.sub; [local.tee L;] global.set G` within the
/// first `window` instructions, tolerating the frame base being shuffled
/// through locals, and a later restore of G to its value plus K.
std::optional<SpPattern> detect_sp_pattern(std::span<const Instruction> body,
                                           std::size_t window = kDefaultPrologueWindow);

struct SectionEntry {
  std::uint8_t id = 0;
  /// Offset of the section id byte.
  std::uint64_t offset = 0;
  /// Total bytes including id and size header.
  std::uint64_t length = 0;
  /// Name of a custom section (id 0).
  std::string name;
};

struct Export {
  std::string name;
  ExternalKind kind = ExternalKind::function;
  std::uint32_t index = 0;
};

struct Import {
  std::string module;
  std::string field;
  ExternalKind kind = ExternalKind::function;
};

struct FunctionFacts {
  /// Index in the function index space (imports first).
  std::uint32_t index = 0;
  std::string name;
  std::optional<SpPrologue> sp_prologue;
  bool sp_epilogue_present = false;
  /// Any direct call to an imported function whose field name contains "stack_chk".
  bool calls_named_canary_check = false;
  bool opaque = false;
  std::string note;
  std::size_t instruction_count = 0;
};

struct WasmModuleSummary {
  std::vector<SectionEntry> sections;
  std::vector<Export> exports;
  std::vector<Import> imports;
  std::uint32_t type_count = 0;
  /// Imported plus defined globals.
  std::uint32_t global_count = 0;
  std::uint32_t imported_function_count = 0;
  std::vector<FunctionFacts> functions;
  std::vector<std::string> notes;
};

struct ScanOptions {
  std::size_t prologue_window = kDefaultPrologueWindow;
};

/// Decodes a binary module (format version 1). Throws ParseError only.
WasmModuleSummary parse_module(std::span<const std::uint8_t> bytes, const ScanOptions& options = {});

struct FrameFinding {
  std::uint32_t function_index = 0;
  std::string function_name;
  std::uint32_t frame_size = 0;
  std::uint32_t sp_global = 0;
  bool uses_tee = false;
  bool epilogue_present = false;
  bool canary_check = false;
};

struct ProtectionReport {
  bool start_exported = false;
  std::vector<FrameFinding> frames;
  /// Imports whose field name looks like a stack-protector hook.
  std::vector<std::string> canary_imports;
  std::size_t opaque_functions = 0;

  std::string text() const;
  std::string json() const;
};

ProtectionReport protection_report(const WasmModuleSummary& summary);

}  // namespace wdiv::wasm
