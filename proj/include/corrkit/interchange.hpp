#pragma once

// Text interchange format for correspondence sets, shared with external
// matchers:
//
//   corrs v1 <frame_a> <frame_b> <count>
//   x_a<TAB>y_a<TAB>x_b<TAB>y_b<TAB>confidence<TAB>source      (count lines)
//
// Coordinates carry 4 decimals, confidence 6. Frame ids are "<video>:<index>".

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "corrkit/correspondence.hpp"

namespace corrkit {

struct ImageBounds {
  int width = 0;
  int height = 0;

  bool operator==(const ImageBounds&) const = default;
};

std::string serialize_corrs(const CorrespondenceSet& set);

// Throws Error(ParseError) with the offending line number. When bounds are
// given, coordinates must fall inside [0, width) x [0, height) up to the
// printed precision.
CorrespondenceSet parse_corrs(std::string_view text, std::optional<ImageBounds> bounds_a = {},
                              std::optional<ImageBounds> bounds_b = {});

// Writes via a temporary file and rename. Throws Error(IoError).
void write_corrs(const std::filesystem::path& path, const CorrespondenceSet& set);
CorrespondenceSet read_corrs(const std::filesystem::path& path,
                             std::optional<ImageBounds> bounds_a = {},
                             std::optional<ImageBounds> bounds_b = {});

std::string read_text_file(const std::filesystem::path& path);
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace corrkit
