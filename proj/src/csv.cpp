#include "dot/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dot/errors.hpp"

namespace dot::csv {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void fail(const Table& t, const Row& r, const std::string& what) {
  throw ValidationError(t.source + ":" + std::to_string(r.line) + ": " + what);
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

}  // namespace

int Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

Table parse(std::string_view text, const std::string& source) {
  Table t;
  t.source = source;
  std::size_t line_no = 0, pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    t.rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw ValidationError(source + ": missing header line");
  return t;
}

Table read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void expect_header(const Table& t, const std::vector<std::string>& required,
                   const std::vector<std::string>& optional) {
  bool ok = t.header.size() >= required.size() && t.header.size() <= required.size() + optional.size();
  for (std::size_t i = 0; ok && i < t.header.size(); ++i) {
    const auto& want = i < required.size() ? required[i] : optional[i - required.size()];
    ok = t.header[i] == want;
  }
  if (!ok) {
    std::string want = join(required);
    if (!optional.empty()) want += "[," + join(optional) + "]";
    throw ValidationError(t.source + ":1: header must be '" + want + "', found '" + join(t.header) + "'");
  }
}

double to_double(const Table& t, const Row& r, std::size_t col) {
  const std::string& s = r.fields[col];
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    fail(t, r, "column '" + t.header[col] + "' is not a finite number: '" + s + "'");
  return v;
}

std::int64_t to_int(const Table& t, const Row& r, std::size_t col) {
  const std::string& s = r.fields[col];
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(t, r, "column '" + t.header[col] + "' is not an integer: '" + s + "'");
  return v;
}

std::string format_exact(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

}  // namespace dot::csv
