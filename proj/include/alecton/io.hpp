#pragma once

#include <string>
#include <vector>

#include "alecton/analysis.hpp"
#include "alecton/sampling.hpp"
#include "alecton/solver.hpp"

namespace alecton {

// Shortest decimal form carrying `digits` significant digits.
std::string format_double(double v, int digits = 12);

// Writes content to <path>.tmp and renames it into place, so a crashed or
// failed run never leaves a partial output file.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

// Spectral ground-truth text format:
//   line 1:       n rank
//   line 2:       rank eigenvalues, descending
//   lines 3..n+2: eigenvector matrix, one n-row of rank values per line
// Values use 17 significant digits so the round trip is exact.
void write_spectral_truth(const std::string& path, const GroundTruth& truth);
GroundTruth read_spectral_truth(const std::string& path);

struct TripletData {
  std::size_t rows = 0, cols = 0;
  std::vector<Triplet> entries;  // file order, duplicates preserved
};

// `row,col,value` lines with 0-based indices; `#` starts a comment line;
// blank lines are skipped. Malformed lines and out-of-range indices raise
// ParseError carrying the 1-based line number. An entry-free file is an
// error (a degenerate all-zero target).
TripletData read_triplets(const std::string& path, std::size_t rows,
                          std::size_t cols);

// CSV builders. Each `comments` element becomes one "# ..." line before the
// header, recording the resolved run configuration. wall_ms columns are the
// only nondeterministic content.
std::string trace_csv(const ConvergenceTrace& trace,
                      const std::vector<std::string>& comments);
std::string zp_csv(const std::vector<ZpEstimate>& rows, bool with_closed_form,
                   const std::vector<std::string>& comments);
std::string oaat_csv(const std::vector<OaatComponent>& rows,
                     const std::vector<std::string>& comments);
std::string failure_csv(const std::vector<TrialOutcome>& rows,
                        const std::vector<std::string>& comments);

}  // namespace alecton
