// Copyright 2026 The PUMC Authors. All Rights Reserved.
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

#include <pumc/data.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace pumc {

BinaryMatrix gen_synthetic(Index m, Index k, double q, std::uint64_t seed) {
  if (m < 1 || k < 1) throw std::invalid_argument("gen_synthetic: m and k must be >= 1");
  if (k >= m) throw std::invalid_argument("gen_synthetic: k must be smaller than m");
  if (!std::isfinite(q)) throw std::invalid_argument("gen_synthetic: q must be finite");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd left(m, k);
  Eigen::MatrixXd right(k, m);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < m; ++i) left(i, j) = normal(rng);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < k; ++i) right(i, j) = normal(rng);
  const Eigen::MatrixXd product = left * right;
  std::vector<Entry> pos;
  pos.reserve(static_cast<std::size_t>(m * m / 2));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      if (product(i, j) >= q) pos.push_back({i, j});
  return BinaryMatrix(m, m, std::move(pos));
}

SampleSplit sample_one_sided(const BinaryMatrix& truth, double delta, std::uint64_t seed) {
  if (!(delta > 0.0)) throw std::invalid_argument("no observations");
  if (delta > 1.0) throw std::invalid_argument("sample_one_sided: delta must be <= 1");
  if (truth.nnz() == 0) throw std::invalid_argument("sample_one_sided: matrix has no positives");
  const auto count = static_cast<std::size_t>(std::llround(delta * static_cast<double>(truth.nnz())));
  if (count == 0) throw std::invalid_argument("no observations");
  std::vector<Entry> chosen;
  chosen.reserve(count);
  std::mt19937_64 rng(seed);
  // Selection sampling keeps the sorted order of the positives.
  std::sample(truth.positives().begin(), truth.positives().end(), std::back_inserter(chosen), count,
              rng);
  ObservationSet observed(truth.rows(), truth.cols(), std::move(chosen));
  ObservationSet heldout = truth.positives().minus(observed);
  return SampleSplit{std::move(observed), std::move(heldout), delta};
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

char sniff_delimiter(std::string_view line) {
  if (line.find('\t') != std::string_view::npos) return '\t';
  if (line.find(',') != std::string_view::npos) return ',';
  if (line.find(';') != std::string_view::npos) return ';';
  return ' ';
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  if (delim == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  // std::from_chars for double is available in libstdc++ 11.
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

bool is_integer(const std::string& s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size();
}

/// Dense 0-based index for every id: numeric order when all ids are integers,
/// lexicographic otherwise.
std::unordered_map<std::string, Index> dense_index(std::vector<std::string>& ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (std::all_of(ids.begin(), ids.end(), is_integer)) {
    std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
      return std::stoll(a) < std::stoll(b);
    });
  }
  std::unordered_map<std::string, Index> map;
  map.reserve(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) map.emplace(ids[k], static_cast<Index>(k));
  return map;
}

}  // namespace

RatingsData parse_ratings(std::istream& in, std::optional<double> threshold) {
  RatingsData data;
  std::map<std::pair<std::string, std::string>, double> records;
  std::string line;
  char delim = 0;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (delim == 0) delim = sniff_delimiter(view);
    const auto fields = split(view, delim);
    double rating = 0.0;
    const bool ok = fields.size() >= 3 && !fields[0].empty() && !fields[1].empty() &&
                    parse_double(fields[2], rating);
    if (!ok) {
      if (!first) {
        ++data.malformed;
        if (data.malformed <= 5)
          data.warnings.push_back("malformed record at line " + std::to_string(line_no));
      }
      first = false;
      continue;
    }
    first = false;
    ++data.ratings;
    auto key = std::make_pair(std::string(fields[0]), std::string(fields[1]));
    auto [it, inserted] = records.insert_or_assign(std::move(key), rating);
    if (!inserted) {
      ++data.duplicates;
      if (data.duplicates <= 5)
        data.warnings.push_back("duplicate (user, item) at line " + std::to_string(line_no) +
                                ", last record wins");
    }
  }
  if (records.empty()) throw std::runtime_error("ingest_ratings: zero valid records");

  std::vector<std::string> users;
  std::vector<std::string> items;
  double sum = 0.0;
  for (const auto& [key, rating] : records) {
    users.push_back(key.first);
    items.push_back(key.second);
    sum += rating;
  }
  const auto user_index = dense_index(users);
  const auto item_index = dense_index(items);
  data.threshold = threshold.value_or(sum / static_cast<double>(records.size()));

  std::vector<Entry> pos;
  for (const auto& [key, rating] : records)
    if (rating >= data.threshold) pos.push_back({user_index.at(key.first), item_index.at(key.second)});
  data.matrix = BinaryMatrix(static_cast<Index>(users.size()), static_cast<Index>(items.size()),
                             std::move(pos));
  data.users = std::move(users);
  data.items = std::move(items);
  if (data.malformed > 0)
    data.warnings.push_back(std::to_string(data.malformed) + " malformed record(s) skipped");
  return data;
}

RatingsData ingest_ratings(const std::string& path, std::optional<double> threshold) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_ratings: cannot read " + path);
  return parse_ratings(in, threshold);
}

void write_binary_matrix(std::ostream& out, const BinaryMatrix& m) {
  out << m.rows() << ' ' << m.cols() << ' ' << m.nnz() << '\n';
  for (const Entry& e : m.positives()) out << e.row + 1 << ' ' << e.col + 1 << '\n';
}

void write_binary_matrix(const std::string& path, const BinaryMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_binary_matrix(out, m);
  if (!out) throw std::runtime_error("write failed: " + path);
}

BinaryMatrix read_binary_matrix(std::istream& in) {
  long long rows = 0;
  long long cols = 0;
  long long nnz = 0;
  if (!(in >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
    throw std::runtime_error("binary matrix: bad header");
  std::vector<Entry> pos;
  pos.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    long long i = 0;
    long long j = 0;
    if (!(in >> i >> j)) throw std::runtime_error("binary matrix: truncated entry list");
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw std::runtime_error("binary matrix: index out of range");
    pos.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1)});
  }
  return BinaryMatrix(static_cast<Index>(rows), static_cast<Index>(cols), std::move(pos));
}

BinaryMatrix read_binary_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_binary_matrix(in);
}

std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = mix_seed(master);
  for (std::uint64_t c : coords) h = mix_seed(h ^ mix_seed(c + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace pumc
