#include "wdiv/elf_symbols.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "wdiv/common.hpp"
#include "wdiv/process.hpp"

namespace wdiv {

namespace {

struct Image {
  std::span<const std::uint8_t> bytes;
  bool is64 = true;
  bool little = true;

  bool has(std::uint64_t off, std::uint64_t len) const {
    return off <= bytes.size() && len <= bytes.size() - off;
  }

  std::uint64_t read(std::uint64_t off, unsigned width) const {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) {
      const std::uint64_t b = bytes[off + (little ? i : width - 1 - i)];
      v |= b << (8 * i);
    }
    return v;
  }
};

struct Section {
  std::uint32_t type = 0;
  std::uint32_t link = 0;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  std::uint64_t entsize = 0;
};

constexpr std::uint32_t kSymtab = 2;
constexpr std::uint32_t kDynsym = 11;

}  // namespace

std::optional<std::vector<std::string>> elf_undefined_symbols(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "\x7f" "ELF", 4) != 0) return std::nullopt;
  Image img{bytes};
  if (bytes[4] != 1 && bytes[4] != 2) return std::nullopt;
  if (bytes[5] != 1 && bytes[5] != 2) return std::nullopt;
  img.is64 = bytes[4] == 2;
  img.little = bytes[5] == 1;
  const unsigned word = img.is64 ? 8 : 4;

  const std::uint64_t ehsize = img.is64 ? 64 : 52;
  if (!img.has(0, ehsize)) return std::nullopt;
  const std::uint64_t shoff = img.read(img.is64 ? 0x28 : 0x20, word);
  const std::uint64_t shentsize = img.read(img.is64 ? 0x3A : 0x2E, 2);
  const std::uint64_t shnum = img.read(img.is64 ? 0x3C : 0x30, 2);
  const std::uint64_t min_entsize = img.is64 ? 64 : 40;
  if (shnum == 0) return std::vector<std::string>{};
  if (shentsize < min_entsize || !img.has(shoff, shentsize * shnum)) return std::nullopt;

  std::vector<Section> sections(shnum);
  for (std::uint64_t i = 0; i < shnum; ++i) {
    const std::uint64_t at = shoff + i * shentsize;
    Section& s = sections[i];
    s.type = static_cast<std::uint32_t>(img.read(at + 4, 4));
    if (img.is64) {
      s.offset = img.read(at + 0x18, 8);
      s.size = img.read(at + 0x20, 8);
      s.link = static_cast<std::uint32_t>(img.read(at + 0x28, 4));
      s.entsize = img.read(at + 0x38, 8);
    } else {
      s.offset = img.read(at + 0x10, 4);
      s.size = img.read(at + 0x14, 4);
      s.link = static_cast<std::uint32_t>(img.read(at + 0x18, 4));
      s.entsize = img.read(at + 0x24, 4);
    }
  }

  std::vector<std::string> names;
  const std::uint64_t symsize = img.is64 ? 24 : 16;
  for (const auto& s : sections) {
    if (s.type != kSymtab && s.type != kDynsym) continue;
    if (s.link >= sections.size() || s.entsize < symsize || !img.has(s.offset, s.size)) return std::nullopt;
    const Section& strtab = sections[s.link];
    if (!img.has(strtab.offset, strtab.size)) return std::nullopt;
    for (std::uint64_t at = s.offset + s.entsize; at + symsize <= s.offset + s.size; at += s.entsize) {
      const std::uint64_t name = img.read(at, 4);
      const std::uint64_t shndx = img.read(at + (img.is64 ? 6 : 14), 2);
      if (shndx != 0 || name == 0 || name >= strtab.size) continue;
      const char* begin = reinterpret_cast<const char*>(bytes.data() + strtab.offset + name);
      const std::size_t max = static_cast<std::size_t>(strtab.size - name);
      std::string sym(begin, strnlen(begin, max));
      if (auto at_sign = sym.find('@'); at_sign != std::string::npos) sym.resize(at_sign);
      if (!sym.empty()) names.push_back(std::move(sym));
    }
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

std::optional<std::vector<std::string>> extract_undefined_symbols(const std::filesystem::path& binary,
                                                                  const SymbolExtractor& how) {
  if (how.external_command.empty()) {
    try {
      const Bytes image = read_file(binary);
      return elf_undefined_symbols(image);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  try {
    ProcessSpec spec;
    spec.argv = split_command(how.external_command);
    spec.argv.push_back(binary.string());
    spec.timeout = std::chrono::seconds(30);
    const ProcessResult result = run_process(spec);
    if (result.kind != ProcessResult::Kind::exited || result.exit_code != 0) return std::nullopt;
    std::vector<std::string> names;
    std::istringstream lines(to_text(result.out.data));
    std::string line;
    while (std::getline(lines, line)) {
      std::istringstream fields(line);
      std::string field, last;
      while (fields >> field) last = field;
      if (auto at_sign = last.find('@'); at_sign != std::string::npos) last.resize(at_sign);
      if (!last.empty() && last.back() != ':') names.push_back(last);
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    return names;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace wdiv
