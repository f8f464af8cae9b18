#include "degdiff/csv.hpp"

#include <fmt/format.h>

#include <fstream>
#include <stdexcept>
#include <system_error>

namespace degdiff::csv {

void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", tmp.string()));
    body(out);
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error(fmt::format("write to {} failed", tmp.string()));
    }
  }
  fs::rename(tmp, path);
}

}  // namespace degdiff::csv
