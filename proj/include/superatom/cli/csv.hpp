// Copyright 2026 The superatom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "superatom/observables.hpp"

namespace superatom::cli {

/// t_us,pr0,pr1,pr2,pr_ge3,pop_e_total,purity,trace_err,per_atom_rr_0..N-1[,stderr_pr1]
inline std::string series_header(int n_atoms, bool with_stderr) {
  std::string h = "t_us,pr0,pr1,pr2,pr_ge3,pop_e_total,purity,trace_err";
  for (int j = 0; j < n_atoms; ++j) h += ",per_atom_rr_" + std::to_string(j);
  if (with_stderr) h += ",stderr_pr1";
  return h;
}

inline std::string series_csv(const ObservableSeries& s) {
  const bool with_stderr = !s.stderr_pr1.empty();
  std::string out = series_header(s.n_atoms, with_stderr);
  out += '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_number(s.times[i]);
    for (int n = 0; n < kRydbergBins; ++n) {
      out += ',';
      out += format_number(s.pr(i, n));
    }
    for (double v : {s.pop_e_total[i], s.purity[i], s.trace_error[i]}) {
      out += ',';
      out += format_number(v);
    }
    for (double v : s.per_atom_rr[i]) {
      out += ',';
      out += format_number(v);
    }
    if (with_stderr) {
      out += ',';
      out += format_number(s.stderr_pr1[i]);
    }
    out += '\n';
  }
  return out;
}

/// Writes via a temporary sibling and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

/// Minimal reader for the files above: header names and numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return k;
    }
    throw std::out_of_range("no column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  CsvTable table;
  std::string line;
  auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) return table;
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{}) throw std::runtime_error("bad number '" + cell + "' in '" + path.string() + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace superatom::cli
