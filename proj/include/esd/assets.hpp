#pragma once

#include <string_view>
#include <vector>

namespace esd {

/// Built-in default resources compiled from data/defaults (dictionaries,
/// gazetteers, prompt templates). Names are paths relative to that
/// directory, e.g. "abbreviations.json" or "prompts/intent.txt".
/// Throws InvalidArgument for an unknown name.
std::string_view asset(std::string_view name);

std::vector<std::string_view> asset_names();

}  // namespace esd
