#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wdiv {

/// Undefined symbol names from an ELF image's .dynsym and .symtab, sorted and
/// de-duplicated. nullopt when the bytes are not a well-formed ELF file.
std::optional<std::vector<std::string>> elf_undefined_symbols(std::span<const std::uint8_t> image);

/// Either the built-in reader (empty command) or an external tool such as
/// `nm -D --undefined-only`, whose last whitespace field per line is the name.
struct SymbolExtractor {
  std::string external_command;
};

/// nullopt when the file cannot be read or the tool fails; never throws.
std::optional<std::vector<std::string>> extract_undefined_symbols(const std::filesystem::path& binary,
                                                                  const SymbolExtractor& how = {});

}  // namespace wdiv
