#include "corrkit/interchange.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace corrkit {
namespace {

// Half a unit in the last printed decimal.
constexpr double kPrintSlack = 0.5e-4;

bool valid_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg);
}

double parse_double(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

void check_point(const Vec2& p, const std::optional<ImageBounds>& b, std::size_t line,
                 const char* which) {
  const bool ok = p.x() >= 0.0 && p.y() >= 0.0 &&
                  (!b || (p.x() < b->width + kPrintSlack && p.y() < b->height + kPrintSlack));
  if (!ok) fail(line, std::string(which) + " coordinate out of bounds");
}

}  // namespace

std::string serialize_corrs(const CorrespondenceSet& set) {
  if (!valid_token(set.frame_a.video) || !valid_token(set.frame_b.video)) {
    throw Error(ErrorCode::InvalidArgument, "video ids must be non-empty and whitespace-free");
  }
  std::string out = "corrs v1 " + set.frame_a.to_string() + " " + set.frame_b.to_string() + " " +
                    std::to_string(set.size()) + "\n";
  out.reserve(out.size() + set.size() * 64);
  char buf[160];
  for (const Match& m : set.matches) {
    if (!valid_token(m.source)) {
      throw Error(ErrorCode::InvalidArgument, "match source tags must be non-empty and whitespace-free");
    }
    const int n = std::snprintf(buf, sizeof(buf), "%.4f\t%.4f\t%.4f\t%.4f\t%.6f\t", m.pa.x(),
                                m.pa.y(), m.pb.x(), m.pb.y(), m.confidence);
    out.append(buf, static_cast<std::size_t>(n));
    out += m.source;
    out += '\n';
  }
  return out;
}

CorrespondenceSet parse_corrs(std::string_view text, std::optional<ImageBounds> bounds_a,
                              std::optional<ImageBounds> bounds_b) {
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) fail(1, "missing header");

  const auto header = split(lines[0], ' ');
  if (header.size() != 5 || header[0] != "corrs" || header[1] != "v1") {
    fail(1, "header must be 'corrs v1 <frame_a> <frame_b> <count>'");
  }
  CorrespondenceSet set;
  try {
    set.frame_a = FrameId::parse(header[2]);
    set.frame_b = FrameId::parse(header[3]);
  } catch (const Error& e) {
    fail(1, e.what());
  }
  std::size_t count = 0;
  {
    const auto s = header[4];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), count);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(1, "malformed count '" + std::string(s) + "'");
  }
  if (lines.size() - 1 != count) {
    fail(lines.size() - 1 < count ? lines.size() + 1 : count + 2,
         "count says " + std::to_string(count) + " rows, found " + std::to_string(lines.size() - 1));
  }
  set.matches.reserve(count);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    const auto f = split(lines[i], '\t');
    if (f.size() != 6) fail(ln, "expected 6 tab-separated fields");
    Match m;
    m.pa = {parse_double(f[0], ln, "x_a"), parse_double(f[1], ln, "y_a")};
    m.pb = {parse_double(f[2], ln, "x_b"), parse_double(f[3], ln, "y_b")};
    m.confidence = parse_double(f[4], ln, "confidence");
    if (m.confidence < 0.0 || m.confidence > 1.0) fail(ln, "confidence outside [0,1]");
    if (!valid_token(f[5])) fail(ln, "empty source tag");
    m.source = std::string(f[5]);
    check_point(m.pa, bounds_a, ln, "frame A");
    check_point(m.pb, bounds_b, ln, "frame B");
    set.matches.push_back(std::move(m));
  }
  return set;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + ": " + ec.message());
}

void write_corrs(const std::filesystem::path& path, const CorrespondenceSet& set) {
  write_text_file_atomic(path, serialize_corrs(set));
}

CorrespondenceSet read_corrs(const std::filesystem::path& path, std::optional<ImageBounds> bounds_a,
                             std::optional<ImageBounds> bounds_b) {
  return parse_corrs(read_text_file(path), bounds_a, bounds_b);
}

}  // namespace corrkit
