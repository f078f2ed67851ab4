#pragma once

// CSV and JSON emission. Every CSV starts with a schema line
// "# ionbell <kind> v<version>" followed by a header row; floats use 17
// significant digits so values round-trip exactly.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace ionbell::cli {

inline constexpr int kSchemaVersion = 1;

std::string format_double(double x);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& kind,
            const std::vector<std::string>& columns, const std::string& schema_note = {});

  CsvWriter& operator<<(double x);
  CsvWriter& operator<<(int x);
  CsvWriter& operator<<(bool x);
  CsvWriter& operator<<(const std::string& x);
  void end_row();
  void close();

 private:
  void sep();
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_ = 0, filled_ = 0;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace ionbell::cli
