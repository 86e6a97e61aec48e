#include "twbreather/series_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "twbreather/errors.hpp"

namespace twb {

namespace {

struct OutputInfo {
  Output output;
  std::string_view name;
  std::string_view file;
  std::string_view header;
};

constexpr std::array<OutputInfo, 7> kOutputs{{
    {Output::density_map, "density_map", "density_map.csv", "t,z,n,n_err"},
    {Output::center_density, "center_density", "center_density.csv", "t,n0,n0_err,n0_meanfield"},
    {Output::mu, "mu", "mu.csv", "t,mu,mu_err"},
    {Output::eigenvalues, "eigenvalues", "eigenvalues.csv", "t,rank,fraction"},
    {Output::invariants, "invariants", "invariants.csv", "t,Nbar_drift,Pbar_drift,Hbar_drift"},
    {Output::com, "com", "com.csv", "t,var_X,var_X_err"},
    {Output::g1_matrix, "g1_matrix", "g1_matrix.txt", ""},
}};

const OutputInfo& info(Output o) {
  for (const auto& i : kOutputs)
    if (i.output == o) return i;
  throw ConfigError("unknown output");
}

class CsvWriter {
 public:
  explicit CsvWriter(Output o) {
    out_ << kCsvVersionLine << '\n' << output_header(o) << '\n';
  }

  template <typename... Values>
  void row(Values... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << format_double(static_cast<double>(values)), first = false), ...);
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

}  // namespace

std::string_view output_name(Output o) { return info(o).name; }
std::string_view output_file(Output o) { return info(o).file; }
std::string_view output_header(Output o) { return info(o).header; }

Output parse_output(std::string_view name) {
  for (const auto& i : kOutputs)
    if (i.name == name) return i.output;
  throw ConfigError("unknown output '" + std::string(name) + "'");
}

std::vector<Output> default_outputs() {
  return {Output::density_map, Output::center_density, Output::mu,
          Output::eigenvalues, Output::invariants,     Output::com};
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::filesystem::path> write_series(const ObservableSeries& s, const std::filesystem::path& dir,
                                                const std::vector<Output>& outputs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  for (Output o : outputs) {
    const std::filesystem::path path = dir / output_file(o);
    std::string text;
    if (o == Output::g1_matrix) {
      if (s.g1.size() != s.g1_snapshots.size()) {
        throw ConfigError("g1_matrix output requested but the series holds no G1 matrices");
      }
      std::ostringstream out;
      out << kG1VersionLine << '\n'
          << "# M=" << s.z.size() << " snapshots=" << s.g1.size()
          << " row-major; row j holds Re,Im of G1(z_j,z_l) for l=0..M-1\n";
      for (std::size_t i = 0; i < s.g1.size(); ++i) {
        out << "t=" << format_double(s.times(s.g1_snapshots[i])) << '\n';
        const auto& g = s.g1[i];
        for (Index j = 0; j < g.rows(); ++j) {
          for (Index l = 0; l < g.cols(); ++l) {
            out << (l ? "," : "") << format_double(g(j, l).real()) << ',' << format_double(g(j, l).imag());
          }
          out << '\n';
        }
      }
      text = out.str();
    } else {
      CsvWriter w(o);
      const Index S = s.times.size();
      switch (o) {
        case Output::density_map:
          for (Index t = 0; t < S; ++t)
            for (Index j = 0; j < s.z.size(); ++j)
              w.row(s.times(t), s.z(j), s.density(t, j), s.density_err(t, j));
          break;
        case Output::center_density:
          for (Index t = 0; t < S; ++t) w.row(s.times(t), s.n0(t), s.n0_err(t), s.n0_meanfield(t));
          break;
        case Output::mu:
          for (Index t = 0; t < S; ++t) w.row(s.times(t), s.mu(t), s.mu_err(t));
          break;
        case Output::eigenvalues:
          for (std::size_t i = 0; i < s.g1_snapshots.size(); ++i)
            for (Index r = 0; r < s.eigen_fractions.cols(); ++r)
              w.row(s.times(s.g1_snapshots[i]), r + 1, s.eigen_fractions(static_cast<Index>(i), r));
          break;
        case Output::invariants:
          for (Index t = 0; t < S; ++t)
            w.row(s.times(t), s.drift_number(t), s.drift_momentum(t), s.drift_energy(t));
          break;
        case Output::com:
          for (Index t = 0; t < S; ++t) w.row(s.times(t), s.com_var(t), s.com_var_err(t));
          break;
        case Output::g1_matrix:
          break;
      }
      text = w.str();
    }
    write_text_file(path, text);
    written.push_back(path);
  }
  return written;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(f, line) || line != kCsvVersionLine) {
    throw IoError("'" + path.string() + "' lacks the csv version line");
  }
  if (!std::getline(f, line)) throw IoError("'" + path.string() + "' has no header row");
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  }
  std::size_t lineno = 2;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0;
      std::string_view cell(p, static_cast<std::size_t>(comma - p));
      if (cell == "nan" || cell == "-nan") {
        v = std::numeric_limits<double>::quiet_NaN();
      } else {
        auto res = std::from_chars(p, comma, v);
        if (res.ec != std::errc{} || res.ptr != comma) {
          throw IoError("'" + path.string() + "' line " + std::to_string(lineno) + ": bad number");
        }
      }
      row.push_back(v);
      p = comma + 1;
    }
    if (row.size() != table.header.size()) {
      throw IoError("'" + path.string() + "' line " + std::to_string(lineno) + ": wrong column count");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace twb
