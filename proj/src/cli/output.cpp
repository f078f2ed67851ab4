#include "cli/output.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace ionbell::cli {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  if (ec != std::errc()) throw std::runtime_error("float formatting failed");
  return std::string(buf, p);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& kind,
                     const std::vector<std::string>& columns, const std::string& schema_note)
    : out_(path, std::ios::binary), path_(path), columns_(columns.size()) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  out_ << "# ionbell " << kind << " v" << kSchemaVersion;
  if (!schema_note.empty()) out_ << ' ' << schema_note;
  out_ << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::sep() {
  if (filled_ == columns_) throw std::logic_error("too many fields in row of " + path_.string());
  if (filled_++) out_ << ',';
}

CsvWriter& CsvWriter::operator<<(double x) {
  sep();
  out_ << format_double(x);
  return *this;
}

CsvWriter& CsvWriter::operator<<(int x) {
  sep();
  out_ << x;
  return *this;
}

CsvWriter& CsvWriter::operator<<(bool x) {
  sep();
  out_ << (x ? 1 : 0);
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& x) {
  sep();
  out_ << x;
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != columns_) throw std::logic_error("short row in " + path_.string());
  out_ << '\n';
  filled_ = 0;
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw std::runtime_error("failed writing " + path_.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace ionbell::cli
