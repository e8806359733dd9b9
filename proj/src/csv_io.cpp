#include "protokd/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "protokd/error.hpp"

namespace protokd {

namespace {

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& c : cells) {
    while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
    while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) c.remove_suffix(1);
  }
  return cells;
}

// Consecutive columns prefix_0, prefix_1, ... starting at `at`.
std::size_t count_indexed(const std::vector<std::string_view>& header, std::size_t at,
                          std::string_view prefix) {
  std::size_t n = 0;
  while (at + n < header.size() && header[at + n] == std::string(prefix) + std::to_string(n)) ++n;
  return n;
}

[[noreturn]] void parse_fail(std::size_t row, std::size_t col, std::string_view what) {
  throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " +
                                         std::to_string(col) + ": " + std::string(what));
}

template <typename T>
T parse_integer(std::string_view cell, std::size_t row, std::size_t col) {
  T value{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
    parse_fail(row, col, "expected a non-negative integer, got '" + std::string(cell) + "'");
  }
  return value;
}

double parse_real(std::string_view cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
    parse_fail(row, col, "expected a number, got '" + std::string(cell) + "'");
  }
  return value;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

PairedFeatureSet parse_csv(std::string_view text, const CsvSchema& schema) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty()) throw Error(ErrorCode::SchemaMismatch, "empty CSV file");

  const auto header = split_row(lines.front());
  if (header.size() < 3 || header[0] != "instance_id" || header[1] != "class_id" ||
      header[2] != "level_id") {
    throw Error(ErrorCode::SchemaMismatch,
                "header must start with instance_id,class_id,level_id");
  }
  std::size_t at = 3;
  const std::size_t dim_t = count_indexed(header, at, "ft_");
  at += dim_t;
  const std::size_t dim_s = count_indexed(header, at, "fs_");
  at += dim_s;
  const std::size_t classes = count_indexed(header, at, "lt_");
  at += classes;
  if (classes > 0) {
    if (count_indexed(header, at, "ls_") != classes) {
      throw Error(ErrorCode::SchemaMismatch, "lt_ and ls_ column counts differ");
    }
    at += classes;
  }
  const bool has_ambiguous = at < header.size() && header[at] == "ambiguous";
  if (has_ambiguous) ++at;
  if (at != header.size()) {
    throw Error(ErrorCode::SchemaMismatch, "unexpected column '" + std::string(header[at]) + "'");
  }
  if (dim_t == 0 || dim_s == 0) throw Error(ErrorCode::SchemaMismatch, "missing ft_/fs_ columns");
  if (schema.dim_t && *schema.dim_t != dim_t) {
    throw Error(ErrorCode::SchemaMismatch, "expected D_t=" + std::to_string(*schema.dim_t));
  }
  if (schema.dim_s && *schema.dim_s != dim_s) {
    throw Error(ErrorCode::SchemaMismatch, "expected D_s=" + std::to_string(*schema.dim_s));
  }
  if (schema.require_logits && classes == 0) {
    throw Error(ErrorCode::SchemaMismatch, "logit columns are required");
  }

  PairedFeatureSet set;
  set.dim_t = dim_t;
  set.dim_s = dim_s;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li + 1;  // 1-based file line
    if (lines[li].find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto cells = split_row(lines[li]);
    if (cells.size() != header.size()) {
      parse_fail(row, cells.size() + 1, "expected " + std::to_string(header.size()) + " cells");
    }
    FeatureRecord r;
    std::size_t c = 0;
    r.instance_id = parse_integer<std::uint64_t>(cells[c], row, c + 1);
    ++c;
    r.group.class_id = parse_integer<std::uint32_t>(cells[c], row, c + 1);
    ++c;
    r.group.level_id = parse_integer<std::uint32_t>(cells[c], row, c + 1);
    ++c;
    auto read_reals = [&](std::size_t n) {
      Vector v(n);
      for (double& x : v) {
        x = parse_real(cells[c], row, c + 1);
        ++c;
      }
      return v;
    };
    r.f_t = read_reals(dim_t);
    r.f_s = read_reals(dim_s);
    if (classes > 0) {
      r.logits_t = read_reals(classes);
      r.logits_s = read_reals(classes);
    }
    if (has_ambiguous) {
      const auto flag = parse_integer<unsigned>(cells[c], row, c + 1);
      if (flag > 1) parse_fail(row, c + 1, "ambiguous must be 0 or 1");
      r.ambiguous = flag == 1;
    }
    set.records.push_back(std::move(r));
  }

  const auto report = validate(set);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    const std::string where = v.record ? "row " + std::to_string(*v.record + 2) + ": " : "";
    throw Error(ErrorCode::InvalidSet, where + v.reason);
  }
  return set;
}

PairedFeatureSet import_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::string format_csv(const PairedFeatureSet& set) {
  const bool logits = set.has_logits();
  const std::size_t classes = logits ? set.records.front().logits_t->size() : 0;
  const bool ambiguous = !set.records.empty() && set.records.front().ambiguous.has_value();

  std::string out = "instance_id,class_id,level_id";
  for (std::size_t i = 0; i < set.dim_t; ++i) out += ",ft_" + std::to_string(i);
  for (std::size_t i = 0; i < set.dim_s; ++i) out += ",fs_" + std::to_string(i);
  for (std::size_t i = 0; i < classes; ++i) out += ",lt_" + std::to_string(i);
  for (std::size_t i = 0; i < classes; ++i) out += ",ls_" + std::to_string(i);
  if (ambiguous) out += ",ambiguous";
  out += '\n';

  for (const auto& r : set.records) {
    out += std::to_string(r.instance_id) + ',' + std::to_string(r.group.class_id) + ',' +
           std::to_string(r.group.level_id);
    auto put = [&](const Vector& v) {
      for (double x : v) out += ',' + format_real(x);
    };
    put(r.f_t);
    put(r.f_s);
    if (logits) {
      put(*r.logits_t);
      put(*r.logits_s);
    }
    if (ambiguous) out += r.ambiguous.value_or(false) ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

void export_csv(const std::filesystem::path& path, const PairedFeatureSet& set) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << format_csv(set);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace protokd
