#pragma once

// Binary and text file formats. All binary formats are little-endian:
//   8-byte magic, u16 version, u32 count, u32 width, payload.
//
//   DSCHFEAT  n, d, then n*d fp32 row-major
//   DSCHCODE  n, r, then n*ceil(r/8) bytes, bit k of a code at byte k/8, bit k%8
//   DSCHMODL  d, r, then fp64: feature mean (d), feature scale (d), W1 (d x 1000),
//             b1 (1000), W2 (1000 x r), b2 (r), each row-major
//
// Label files are text, one line per sample of comma-separated class indices.

#include <string>
#include <vector>

#include "dsch/encoder.hpp"
#include "dsch/retrieval.hpp"

namespace dsch::io {

inline constexpr std::uint16_t kFormatVersion = 1;

Matrix read_features(const std::string& path);
void write_features(const std::string& path, const Matrix& features);

BinaryCodes read_codes(const std::string& path);
void write_codes(const std::string& path, const BinaryCodes& codes);

HashModel read_model(const std::string& path);
void write_model(const std::string& path, const HashModel& model);

std::vector<std::vector<int>> read_label_lists(const std::string& path);
void write_label_lists(const std::string& path, const std::vector<std::vector<int>>& lists);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);
bool files_identical(const std::string& a, const std::string& b);

}  // namespace dsch::io
