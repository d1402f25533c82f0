#include "rsdesign/design.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace rsdesign {

Point Design::point(int run) const {
  Point pt(static_cast<std::size_t>(k()));
  for (int f = 0; f < k(); ++f) pt[f] = runs(run, f);
  return pt;
}

std::vector<int> Design::block_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(block_count), 0);
  for (int b : blocks) ++sizes.at(static_cast<std::size_t>(b - 1));
  return sizes;
}

void Design::validate(const FactorSpace& space) const {
  if (n() < 1) throw ConfigError("design has no runs");
  if (k() != space.k()) {
    throw ConfigError("design has " + std::to_string(k()) + " factor columns but the factor space has " +
                      std::to_string(space.k()));
  }
  for (int i = 0; i < n(); ++i) {
    for (int f = 0; f < k(); ++f) {
      if (!space.contains(f, runs(i, f))) {
        throw ConfigError("run " + std::to_string(i + 1) + ": level " + format_exact(runs(i, f)) +
                          " is not a level of factor x" + std::to_string(f + 1));
      }
    }
  }
  if (blocked()) {
    if (static_cast<int>(blocks.size()) != n()) throw ConfigError("block column length differs from run count");
    for (int i = 0; i < n(); ++i) {
      if (blocks[static_cast<std::size_t>(i)] < 1 || blocks[static_cast<std::size_t>(i)] > block_count) {
        throw ConfigError("run " + std::to_string(i + 1) + ": block index out of range");
      }
    }
  } else if (!blocks.empty()) {
    throw ConfigError("block indices given for an unblocked design");
  }
  if (!fixed.empty() && static_cast<int>(fixed.size()) != n()) {
    throw ConfigError("fixed column length differs from run count");
  }
}

std::vector<int> treatment_ids(const Design& design) {
  std::map<Point, int> seen;
  std::vector<int> ids(static_cast<std::size_t>(design.n()));
  for (int i = 0; i < design.n(); ++i) {
    auto [it, inserted] = seen.emplace(design.point(i), static_cast<int>(seen.size()));
    ids[static_cast<std::size_t>(i)] = it->second;
  }
  return ids;
}

int unique_treatments(const Design& design) {
  const auto ids = treatment_ids(design);
  return ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
}

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[static_cast<std::size_t>(x)] != x) {
    parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    x = parent[static_cast<std::size_t>(x)];
  }
  return x;
}

int count_distinct(std::span<const int> ids) {
  std::vector<int> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

}  // namespace

int block_treatment_rank(std::span<const int> treatment, std::span<const int> blocks, int block_count) {
  // Relabel treatments densely so the union-find array stays small.
  std::vector<int> labels(treatment.begin(), treatment.end());
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const int t = static_cast<int>(sorted.size());

  // Nodes 0..b-1 are blocks, b..b+t-1 treatments.
  std::vector<int> parent(static_cast<std::size_t>(block_count + t));
  std::iota(parent.begin(), parent.end(), 0);
  int components = block_count + t;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int tr = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), labels[i]) - sorted.begin());
    const int a = find_root(parent, blocks[i] - 1);
    const int b = find_root(parent, block_count + tr);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  // Blocks with no runs are isolated components and add nothing to the rank.
  return block_count + t - components;
}

Matrix block_treatment_matrix(const Design& design) {
  const auto ids = treatment_ids(design);
  const int t = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
  const int b = design.block_count;
  Matrix zt = Matrix::Zero(design.n(), b + t);
  for (int i = 0; i < design.n(); ++i) {
    if (b > 0) zt(i, design.blocks[static_cast<std::size_t>(i)] - 1) = 1.0;
    zt(i, b + ids[static_cast<std::size_t>(i)]) = 1.0;
  }
  return zt;
}

DofSummary dof_from_treatments(std::span<const int> treatment, std::span<const int> blocks,
                               int block_count, int p) {
  DofSummary s;
  const int n = static_cast<int>(treatment.size());
  s.t = count_distinct(treatment);
  if (block_count > 0) {
    s.residual = n - block_count - p;
    s.d = n - block_treatment_rank(treatment, blocks, block_count);
  } else {
    s.residual = n - p;
    s.d = n - s.t;
  }
  s.lof = s.residual - s.d;
  return s;
}

DofSummary pure_error_dof(const Design& design, const ModelSpec& spec) {
  const auto ids = treatment_ids(design);
  const auto s = dof_from_treatments(ids, design.blocks, design.block_count, spec.p());
  if (s.residual < 0) {
    throw ModelTooLarge("design with " + std::to_string(design.n()) + " runs cannot support " +
                        std::to_string(spec.p()) + " primary terms" +
                        (design.blocked() ? " plus " + std::to_string(design.block_count) + " blocks" : ""));
  }
  if (s.lof < 0) {
    throw ModelTooLarge("design has " + std::to_string(s.t) +
                        " distinct treatments, too few to estimate the primary model");
  }
  return s;
}

std::string format_exact(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, int line_no) {
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("design CSV line " + std::to_string(line_no) + ": cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

Design read_design_csv(std::istream& in, const FactorSpace& space) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("design CSV is empty");
  const auto header = split_csv_line(line);
  int block_col = -1;
  int fixed_col = -1;
  std::vector<int> coord_cols;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[static_cast<std::size_t>(c)] == "block") {
      block_col = c;
    } else if (header[static_cast<std::size_t>(c)] == "fixed") {
      fixed_col = c;
    } else {
      coord_cols.push_back(c);
    }
  }
  if (static_cast<int>(coord_cols.size()) != space.k()) {
    throw ConfigError("design CSV has " + std::to_string(coord_cols.size()) +
                      " coordinate columns but the configuration declares " + std::to_string(space.k()) +
                      " factors");
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> blocks;
  std::vector<bool> fixed;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError("design CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells");
    }
    std::vector<double> row;
    for (int c : coord_cols) row.push_back(parse_number(cells[static_cast<std::size_t>(c)], line_no));
    rows.push_back(std::move(row));
    if (block_col >= 0) {
      const double b = parse_number(cells[static_cast<std::size_t>(block_col)], line_no);
      if (b != static_cast<int>(b) || b < 1) {
        throw ConfigError("design CSV line " + std::to_string(line_no) + ": block must be a positive integer");
      }
      blocks.push_back(static_cast<int>(b));
    }
    if (fixed_col >= 0) {
      const auto& f = cells[static_cast<std::size_t>(fixed_col)];
      if (f != "0" && f != "1") {
        throw ConfigError("design CSV line " + std::to_string(line_no) + ": fixed must be 0 or 1");
      }
      fixed.push_back(f == "1");
    }
  }

  Design design;
  design.runs.resize(static_cast<Eigen::Index>(rows.size()), space.k());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int f = 0; f < space.k(); ++f) design.runs(static_cast<Eigen::Index>(i), f) = rows[i][static_cast<std::size_t>(f)];
  }
  design.blocks = std::move(blocks);
  design.block_count = design.blocks.empty() ? 0 : *std::max_element(design.blocks.begin(), design.blocks.end());
  design.fixed = std::move(fixed);
  design.validate(space);
  return design;
}

Design read_design_csv_file(const std::string& path, const FactorSpace& space) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open design file '" + path + "'");
  return read_design_csv(in, space);
}

void write_design_csv(std::ostream& out, const Design& design) {
  for (int f = 0; f < design.k(); ++f) out << (f ? "," : "") << 'x' << f + 1;
  if (design.blocked()) out << ",block";
  if (!design.fixed.empty()) out << ",fixed";
  out << '\n';
  for (int i = 0; i < design.n(); ++i) {
    for (int f = 0; f < design.k(); ++f) out << (f ? "," : "") << format_exact(design.runs(i, f));
    if (design.blocked()) out << ',' << design.blocks[static_cast<std::size_t>(i)];
    if (!design.fixed.empty()) out << ',' << (design.is_fixed(i) ? 1 : 0);
    out << '\n';
  }
}

void write_design_csv_file(const std::string& path, const Design& design) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write design file '" + path + "'");
  write_design_csv(out, design);
}

}  // namespace rsdesign
