#include "grasplab/emit.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace grasplab {

std::vector<std::string> MetricsLog::schema(int agents, int arms) {
  std::vector<std::string> c{"t", "e_p", "e_v", "e_R", "e_omega", "Psi", "dW", "sigma_L", "sigma_A"};
  for (int j = 1; j <= agents; ++j) {
    for (int b = 1; b <= arms; ++b) c.push_back("lam_" + std::to_string(j) + "_" + std::to_string(b));
  }
  c.push_back("eta");
  c.push_back("phi");
  return c;
}

int MetricsLog::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> MetricsLog::series(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw std::out_of_range("no column '" + name + "' in log");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
    os << '\n';
  }
}

void write_log_csv(std::ostream& os, const MetricsLog& log) { write_csv(os, log.columns, log.rows); }

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("bad number '" + s + "' in CSV");
  }
  return v;
}

}  // namespace

MetricsLog read_log_csv(std::istream& is) {
  MetricsLog log;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV");
  log.columns = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != log.columns.size()) throw std::runtime_error("CSV row width mismatch");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    log.rows.push_back(std::move(row));
  }
  return log;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_log_file(const std::filesystem::path& path, const MetricsLog& log) {
  std::ostringstream os;
  write_log_csv(os, log);
  write_text_file(path, os.str());
}

MetricsLog read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  return read_log_csv(in);
}

}  // namespace grasplab
