#include "alecton/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace alecton {

namespace {

void append_comments(std::string& out, const std::vector<std::string>& lines) {
  for (const std::string& c : lines) {
    out += "# ";
    out += c;
    out += '\n';
  }
}

std::string format_wall(double ms) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  return buf;
}

// Splits on the separator, trimming nothing: the formats are strict.
std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw ParseError("trailing junk", line);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + tok + "' at line " +
                         std::to_string(line),
                     line);
  }
}

std::size_t parse_index(const std::string& tok, std::size_t line) {
  if (tok.empty()) throw ParseError("empty index at line " + std::to_string(line), line);
  for (char c : tok)
    if (c < '0' || c > '9')
      throw ParseError("expected a nonnegative integer, got '" + tok +
                           "' at line " + std::to_string(line),
                       line);
  try {
    return static_cast<std::size_t>(std::stoull(tok));
  } catch (const std::exception&) {
    throw ParseError("index out of numeric range at line " + std::to_string(line),
                     line);
  }
}

}  // namespace

std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::string why = std::strerror(errno);
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot rename " + tmp + " to " + path + ": " + why);
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_spectral_truth(const std::string& path, const GroundTruth& truth) {
  if (truth.kind() != GroundTruth::Kind::Spectral)
    throw ParameterError("write_spectral_truth: truth is not spectral form");
  const std::size_t n = truth.dim();
  const std::size_t r = truth.rank();
  const TallMatrix& u = truth.basis();

  std::string out;
  out.reserve(32 + n * r * 26);
  out += std::to_string(n) + " " + std::to_string(r) + "\n";
  for (std::size_t i = 0; i < r; ++i) {
    if (i) out += ' ';
    out += format_double(truth.eigenvalues()[i], 17);
  }
  out += '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      if (j) out += ' ';
      out += format_double(u(i, j), 17);
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

GroundTruth read_spectral_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::size_t line_no = 1;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty truth file", line_no);
  std::istringstream header(line);
  std::size_t n = 0, r = 0;
  if (!(header >> n >> r) || n == 0 || r == 0 || r > n)
    throw ParseError("bad header '" + line + "' (want: n rank)", line_no);

  ++line_no;
  if (!std::getline(in, line)) throw ParseError("missing eigenvalues line", line_no);
  std::vector<std::string> toks = split(line, ' ');
  if (toks.size() != r)
    throw ParseError("expected " + std::to_string(r) + " eigenvalues, got " +
                         std::to_string(toks.size()),
                     line_no);
  Vector eigenvalues(r);
  for (std::size_t i = 0; i < r; ++i) eigenvalues[i] = parse_double(toks[i], line_no);

  TallMatrix u(n, r);
  for (std::size_t i = 0; i < n; ++i) {
    ++line_no;
    if (!std::getline(in, line))
      throw ParseError("truncated eigenvector matrix (row " + std::to_string(i) +
                           ")",
                       line_no);
    toks = split(line, ' ');
    if (toks.size() != r)
      throw ParseError("expected " + std::to_string(r) + " values at line " +
                           std::to_string(line_no),
                       line_no);
    for (std::size_t j = 0; j < r; ++j) u(i, j) = parse_double(toks[j], line_no);
  }
  return GroundTruth::spectral(eigenvalues, u);
}

TripletData read_triplets(const std::string& path, std::size_t rows,
                          std::size_t cols) {
  if (rows == 0 || cols == 0)
    throw ParameterError("read_triplets: rows and cols must be positive");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  TripletData data;
  data.rows = rows;
  data.cols = cols;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> toks = split(line, ',');
    if (toks.size() != 3)
      throw ParseError("expected row,col,value at line " + std::to_string(line_no),
                       line_no);
    Triplet t;
    t.row = parse_index(toks[0], line_no);
    t.col = parse_index(toks[1], line_no);
    t.value = parse_double(toks[2], line_no);
    if (t.row >= rows || t.col >= cols)
      throw ParseError("index (" + toks[0] + "," + toks[1] +
                           ") out of range at line " + std::to_string(line_no),
                       line_no);
    data.entries.push_back(t);
  }
  if (data.entries.empty())
    throw ParseError("no entries in " + path + " (degenerate zero target)", 0);
  return data;
}

std::string trace_csv(const ConvergenceTrace& trace,
                      const std::vector<std::string>& comments) {
  std::string out;
  append_comments(out, comments);
  out += "step,rho,tau,wall_ms\n";
  for (const TraceRecord& r : trace.records) {
    out += std::to_string(r.step);
    out += ',';
    if (r.rho) out += format_double(*r.rho, 12);
    out += ',';
    if (r.tau) out += format_double(*r.tau, 12);
    out += ',';
    out += format_wall(r.wall_ms);
    out += '\n';
  }
  return out;
}

std::string zp_csv(const std::vector<ZpEstimate>& rows, bool with_closed_form,
                   const std::vector<std::string>& comments) {
  std::string out;
  append_comments(out, comments);
  out += with_closed_form ? "gamma,p,n_samples,value,std_err,closed_form\n"
                          : "gamma,p,n_samples,value,std_err\n";
  for (const ZpEstimate& e : rows) {
    out += format_double(e.gamma, 12);
    out += ',' + std::to_string(e.p);
    out += ',' + std::to_string(e.num_samples);
    out += ',' + format_double(e.value, 12);
    out += ',' + format_double(e.std_err, 12);
    if (with_closed_form) {
      out += ',';
      if (e.p == 1) out += format_double(z1_closed_form(e.gamma), 12);
    }
    out += '\n';
  }
  return out;
}

std::string oaat_csv(const std::vector<OaatComponent>& rows,
                     const std::vector<std::string>& comments) {
  std::string out;
  append_comments(out, comments);
  out += "component,steps,residual_fro,wall_ms\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',' + std::to_string(rows[i].steps);
    out += ',' + format_double(rows[i].residual_fro, 12);
    out += ',' + format_wall(rows[i].wall_ms);
    out += '\n';
  }
  return out;
}

std::string failure_csv(const std::vector<TrialOutcome>& rows,
                        const std::vector<std::string>& comments) {
  std::string out;
  append_comments(out, comments);
  out += "trial,converged,steps_to_success\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',' + std::to_string(rows[i].converged ? 1 : 0);
    out += ',' + std::to_string(rows[i].steps_to_success);
    out += '\n';
  }
  return out;
}

}  // namespace alecton
