#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>

namespace degdiff::csv {

/// Writes through `body` into a sibling temp file, then renames it over
/// `path`. A failed write leaves any existing file untouched.
void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

}  // namespace degdiff::csv
