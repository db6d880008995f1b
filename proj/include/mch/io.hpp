#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mch/common.hpp"

namespace mch {

/// Shortest round-trippable decimal form; deterministic across runs.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Line-buffered CSV writer with a fixed header.
class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path,
            const std::vector<std::string>& header)
      : out_(path) {
    require(out_.good(), "CsvWriter: cannot open " + path.string());
    for (size_t i = 0; i < header.size(); ++i)
      out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

  void close() { out_.close(); }

private:
  std::ofstream out_;
};

}  // namespace mch
