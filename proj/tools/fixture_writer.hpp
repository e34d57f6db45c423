#pragma once

#include <filesystem>
#include <vector>

namespace lpo::cli {

/// Writes every shipped data file below `root` and returns the paths written,
/// relative to `root`. Output is a pure function of the constants inside.
std::vector<std::filesystem::path> write_fixtures(const std::filesystem::path& root);

}  // namespace lpo::cli
