#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace gazecam {

// Minimal CSV support: comma-separated, no quoting or embedded commas. All
// files the workbench reads and writes follow this restriction.
std::vector<std::string> split_csv_line(const std::string& line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;          // -1 when absent
  int require_column(const std::string& name) const;  // format error when absent
};

CsvTable read_csv(const std::string& path);

// Deterministic number formatting for reproducible artifacts.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void write_row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
  std::size_t width_;
};

}  // namespace gazecam
