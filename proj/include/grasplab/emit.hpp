#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace grasplab {

/// Uniformly sampled metric time series; one row per logging instant in [0, horizon).
struct MetricsLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// t, e_p, e_v, e_R, e_omega, Psi, dW, sigma_L, sigma_A, lam_j_b..., eta, phi.
  static std::vector<std::string> schema(int agents, int arms);

  int column(const std::string& name) const;  // -1 if absent
  std::vector<double> series(const std::string& name) const;
  bool empty() const { return rows.empty(); }
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Comma separated, header row, LF line endings.
void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_log_csv(std::ostream& os, const MetricsLog& log);
MetricsLog read_log_csv(std::istream& is);

/// Writes `content` to `path`, creating parent directories. Throws
/// std::runtime_error naming the path on failure.
void write_text_file(const std::filesystem::path& path, const std::string& content);
void write_log_file(const std::filesystem::path& path, const MetricsLog& log);
MetricsLog read_log_file(const std::filesystem::path& path);

}  // namespace grasplab
