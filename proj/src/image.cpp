#include "corrkit/image.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <string>

namespace corrkit {
namespace {

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (tok.empty()) throw Error(ErrorCode::ParseError, "truncated PGM header in " + path.string());
  // c is the single whitespace byte that terminates the header field.
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string t = next_token(in, path);
  try {
    std::size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used != t.size() || v <= 0) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad PGM header field '" + t + "' in " + path.string());
  }
}

PgmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  if (next_token(in, path) != "P5") throw Error(ErrorCode::ParseError, path.string() + " is not a binary PGM (P5)");
  PgmHeader h;
  h.width = header_int(in, path);
  h.height = header_int(in, path);
  h.maxval = header_int(in, path);
  if (h.maxval > 255) throw Error(ErrorCode::ParseError, "only 8-bit PGM is supported: " + path.string());
  return h;
}

std::uint32_t load_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32le(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
}


}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const PgmHeader h = read_header(in, path);
  GrayImage img(h.width, h.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw Error(ErrorCode::ParseError, "truncated PGM payload in " + path.string());
  }
  return img;
}

ImageBounds read_pgm_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const PgmHeader h = read_header(in, path);
  return {h.width, h.height};
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.empty()) throw Error(ErrorCode::InvalidArgument, "cannot write an empty image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

DepthMap read_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), 16);
  if (in.gcount() != 16 || std::memcmp(header, "ZEBD", 4) != 0) {
    throw Error(ErrorCode::ParseError, path.string() + " is not a ZEBD depth file");
  }
  const std::uint32_t w = load_u32le(header + 4);
  const std::uint32_t h = load_u32le(header + 8);
  if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) {
    throw Error(ErrorCode::ParseError, "implausible depth size in " + path.string());
  }
  DepthMap d(static_cast<int>(w), static_cast<int>(h));
  std::vector<unsigned char> raw(d.values.size() * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw Error(ErrorCode::ParseError, "truncated depth payload in " + path.string());
  }
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    d.values[i] = std::bit_cast<float>(load_u32le(raw.data() + 4 * i));
  }
  return d;
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  std::vector<unsigned char> raw(16 + depth.values.size() * 4, 0);
  std::memcpy(raw.data(), "ZEBD", 4);
  store_u32le(raw.data() + 4, static_cast<std::uint32_t>(depth.width));
  store_u32le(raw.data() + 8, static_cast<std::uint32_t>(depth.height));
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    store_u32le(raw.data() + 16 + 4 * i, std::bit_cast<std::uint32_t>(depth.values[i]));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace corrkit
