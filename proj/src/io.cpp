#include "dsch/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace dsch::io {

namespace {

constexpr std::size_t kMagicBytes = 8;
constexpr std::size_t kHeaderBytes = kMagicBytes + 2 + 4 + 4;

struct Header {
  std::uint32_t count = 0;
  std::uint32_t width = 0;
};

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <class T>
  void le(T v) {
    using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
    U u;
    std::memcpy(&u, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void matrix_f64(const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) le<double>(m(i, j));
  }
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(path, 0, "cannot open file for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw FormatError(path, 0, "write failed");
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::string path, std::vector<std::uint8_t> data, std::size_t offset)
      : path_(std::move(path)), data_(std::move(data)), base_(offset) {}

  template <class T>
  T le() {
    if (pos_ + sizeof(T) > data_.size()) throw FormatError(path_, base_ + pos_, "unexpected end of file");
    using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, &u, sizeof(T));
    return v;
  }
  Matrix matrix_f64(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = le<double>();
    return m;
  }
  const std::uint8_t* raw(std::size_t n) {
    if (pos_ + n > data_.size()) throw FormatError(path_, base_ + pos_, "unexpected end of file");
    const std::uint8_t* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t offset() const { return base_ + pos_; }

 private:
  std::string path_;
  std::vector<std::uint8_t> data_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open file");
  return in;
}

/// Reads and validates the fixed header. Nothing proportional to the declared
/// sizes is allocated here.
Header read_header(std::ifstream& in, const std::string& path, const char (&magic)[kMagicBytes + 1]) {
  std::array<std::uint8_t, kHeaderBytes> h{};
  in.read(reinterpret_cast<char*>(h.data()), static_cast<std::streamsize>(h.size()));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got < kMagicBytes || std::memcmp(h.data(), magic, kMagicBytes) != 0) {
    throw FormatError(path, 0, std::string("bad magic, expected ") + magic);
  }
  if (got < kHeaderBytes) throw FormatError(path, got, "truncated header");
  const auto version = static_cast<std::uint16_t>(h[8] | (h[9] << 8));
  if (version != kFormatVersion) {
    throw FormatError(path, 8, "unsupported format version " + std::to_string(version));
  }
  auto u32 = [&](std::size_t at) {
    return static_cast<std::uint32_t>(h[at]) | (static_cast<std::uint32_t>(h[at + 1]) << 8) |
           (static_cast<std::uint32_t>(h[at + 2]) << 16) | (static_cast<std::uint32_t>(h[at + 3]) << 24);
  };
  return {u32(10), u32(14)};
}

ByteReader read_payload(std::ifstream& in, const std::string& path, unsigned long long expected) {
  const auto size = static_cast<unsigned long long>(std::filesystem::file_size(path));
  if (size != kHeaderBytes + expected) {
    throw FormatError(path, kHeaderBytes,
                      "payload is " + std::to_string(size - std::min<unsigned long long>(size, kHeaderBytes)) +
                          " bytes but header declares " + std::to_string(expected));
  }
  std::vector<std::uint8_t> data(static_cast<std::size_t>(expected));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<unsigned long long>(in.gcount()) != expected) throw FormatError(path, kHeaderBytes, "short read");
  return ByteReader(path, std::move(data), kHeaderBytes);
}

void write_header(ByteWriter& w, const char (&magic)[kMagicBytes + 1], std::uint32_t count, std::uint32_t width) {
  w.bytes(magic, kMagicBytes);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::uint32_t>(count);
  w.le<std::uint32_t>(width);
}

std::uint32_t checked_u32(Index v, const char* what) {
  if (v < 0 || v > static_cast<Index>(UINT32_MAX)) throw ContractError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

Matrix read_features(const std::string& path) {
  auto in = open_input(path);
  const Header h = read_header(in, path, "DSCHFEAT");
  ByteReader r = read_payload(in, path, 4ull * h.count * h.width);
  Matrix m(static_cast<Index>(h.count), static_cast<Index>(h.width));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const std::size_t at = r.offset();
      const float f = r.le<float>();
      if (!std::isfinite(f)) throw FormatError(path, at, "non-finite feature value");
      m(i, j) = f;
    }
  return m;
}

void write_features(const std::string& path, const Matrix& features) {
  ByteWriter w;
  write_header(w, "DSCHFEAT", checked_u32(features.rows(), "n"), checked_u32(features.cols(), "d"));
  for (Index i = 0; i < features.rows(); ++i)
    for (Index j = 0; j < features.cols(); ++j) w.le<float>(static_cast<float>(features(i, j)));
  w.save(path);
}

BinaryCodes read_codes(const std::string& path) {
  auto in = open_input(path);
  const Header h = read_header(in, path, "DSCHCODE");
  if (h.width == 0) throw FormatError(path, 14, "code length must be positive");
  const std::size_t row_bytes = (h.width + 7) / 8;
  ByteReader r = read_payload(in, path, 1ull * h.count * row_bytes);
  BinaryCodes codes(h.count, h.width);
  for (std::size_t i = 0; i < h.count; ++i) {
    const std::size_t at = r.offset();
    const std::uint8_t* p = r.raw(row_bytes);
    if (h.width % 8 != 0 && (p[row_bytes - 1] >> (h.width % 8)) != 0) {
      throw FormatError(path, at + row_bytes - 1, "padding bits must be zero");
    }
    codes.set_row_bytes(i, {p, row_bytes});
  }
  return codes;
}

void write_codes(const std::string& path, const BinaryCodes& codes) {
  ByteWriter w;
  write_header(w, "DSCHCODE", checked_u32(static_cast<Index>(codes.size()), "n"),
               checked_u32(static_cast<Index>(codes.code_length()), "r"));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto bytes = codes.row_bytes(i);
    w.bytes(bytes.data(), bytes.size());
  }
  w.save(path);
}

HashModel read_model(const std::string& path) {
  auto in = open_input(path);
  const Header h = read_header(in, path, "DSCHMODL");
  if (h.count == 0 || h.width == 0) throw FormatError(path, 10, "model dimensions must be positive");
  const unsigned long long d = h.count, r = h.width, hidden = static_cast<unsigned long long>(kHiddenUnits);
  ByteReader rd = read_payload(in, path, 8ull * (2 * d + d * hidden + hidden + hidden * r + r));
  HashModel m;
  const auto di = static_cast<Index>(d), ri = static_cast<Index>(r);
  m.feature_mean = rd.matrix_f64(1, di);
  m.feature_scale = rd.matrix_f64(1, di);
  m.w1 = rd.matrix_f64(di, kHiddenUnits);
  m.b1 = rd.matrix_f64(1, kHiddenUnits);
  m.w2 = rd.matrix_f64(kHiddenUnits, ri);
  m.b2 = rd.matrix_f64(1, ri);
  if (!m.all_finite()) throw FormatError(path, kHeaderBytes, "model contains non-finite parameters");
  if ((m.feature_scale.array() <= 0.0).any()) throw FormatError(path, kHeaderBytes, "feature scale must be positive");
  return m;
}

void write_model(const std::string& path, const HashModel& model) {
  ByteWriter w;
  write_header(w, "DSCHMODL", checked_u32(model.input_dim(), "d"), checked_u32(model.code_length(), "r"));
  w.matrix_f64(model.feature_mean);
  w.matrix_f64(model.feature_scale);
  w.matrix_f64(model.w1);
  w.matrix_f64(model.b1);
  w.matrix_f64(model.w2);
  w.matrix_f64(model.b2);
  w.save(path);
}

std::vector<std::vector<int>> read_label_lists(const std::string& path) {
  const std::string text = read_text(path);
  std::vector<std::vector<int>> lists;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::vector<int> row;
    std::size_t p = pos;
    std::size_t line_end = end;
    if (line_end > pos && text[line_end - 1] == '\r') --line_end;
    while (p < line_end) {
      std::size_t comma = text.find(',', p);
      if (comma == std::string::npos || comma > line_end) comma = line_end;
      std::size_t a = p, b = comma;
      while (a < b && text[a] == ' ') ++a;
      while (b > a && text[b - 1] == ' ') --b;
      if (a == b) throw FormatError(path, p, "empty class index");
      long value = 0;
      for (std::size_t k = a; k < b; ++k) {
        if (text[k] < '0' || text[k] > '9') throw FormatError(path, k, "class index must be a nonnegative integer");
        value = value * 10 + (text[k] - '0');
        if (value > 1'000'000) throw FormatError(path, a, "class index too large");
      }
      row.push_back(static_cast<int>(value));
      p = comma + 1;
    }
    lists.push_back(std::move(row));
    pos = end + 1;
  }
  return lists;
}

void write_label_lists(const std::string& path, const std::vector<std::vector<int>>& lists) {
  std::string out;
  for (const auto& row : lists) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(row[k]);
    }
    out += '\n';
  }
  write_text(path, out);
}

std::string read_text(const std::string& path) {
  auto in = open_input(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path, 0, "cannot open file for writing");
  out << text;
  if (!out) throw FormatError(path, 0, "write failed");
}

bool files_identical(const std::string& a, const std::string& b) {
  std::error_code ec;
  if (std::filesystem::equivalent(a, b, ec)) return true;
  return read_text(a) == read_text(b);
}

}  // namespace dsch::io
