#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cshield/pomdp.hpp"

namespace cshield {

/// Parses the explicit text format:
///
///   pomdp <name>
///   states <N>
///   actions <a1> <a2> ...
///   observations <z1> <z2> ...
///   init <s> ...
///   obs <s> <z> [<z> ...]
///   trans <s> <a> <s'> [weight]
///   reward <s> <a|*> <r>
///   label <s> reach|avoid
///   grid <n>
///   cell <s> <x> <y> [energy | adv-x adv-y]
///
/// `#` starts a comment. Errors carry the offending line number.
Pomdp parse_pomdp(std::string_view text);

/// Canonical form; parse(serialize(m)) == m.
std::string serialize_pomdp(const Pomdp& model);

Pomdp load_pomdp(const std::filesystem::path& path);
void save_pomdp(const Pomdp& model, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace cshield
