#pragma once

// Shared reader/writer for the labeled float32 block files (EMBT1 tables,
// FEAT1 feature sets). Layout:
//
//   <MAGIC> <rows> <cols>\n
//   <label 0>\n ... <label rows-1>\n
//   \n
//   rows*cols little-endian float32, row-major
//
// The payload length must match the header exactly.

#include <Eigen/Core>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "promptinv/error.hpp"

namespace promptinv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LabeledBlock {
  std::vector<std::string> labels;
  RowMatrix values;
};

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

inline void append_le_float(std::string& out, float f) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
  char raw[4];
  std::memcpy(raw, &bits, 4);
  out.append(raw, 4);
}

inline float read_le_float(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

// Serializes a block. Values are narrowed to float32; callers that need a
// lossless round trip must hold float-representable values.
inline std::string encode_block(std::string_view magic, const std::vector<std::string>& labels,
                                const RowMatrix& values) {
  if (static_cast<Eigen::Index>(labels.size()) != values.rows()) {
    throw ValidationError("block: label count " + std::to_string(labels.size()) +
                          " does not match row count " + std::to_string(values.rows()));
  }
  std::string out;
  out.append(magic);
  out += ' ' + std::to_string(values.rows()) + ' ' + std::to_string(values.cols()) + '\n';
  for (const auto& label : labels) {
    if (label.find('\n') != std::string::npos) {
      throw ValidationError("block: label contains a newline");
    }
    out += label;
    out += '\n';
  }
  out += '\n';
  out.reserve(out.size() + static_cast<std::size_t>(values.size()) * 4);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      detail::append_le_float(out, static_cast<float>(values(r, c)));
    }
  }
  return out;
}

inline LabeledBlock decode_block(std::string_view bytes, std::string_view magic) {
  auto next_line = [&bytes](std::size_t& pos, std::string& line) {
    const auto end = bytes.find('\n', pos);
    if (end == std::string_view::npos) return false;
    line.assign(bytes.substr(pos, end - pos));
    pos = end + 1;
    return true;
  };

  std::size_t pos = 0;
  std::string line;
  if (!next_line(pos, line)) throw FormatError("block: missing header line");

  std::istringstream header(line);
  std::string found_magic;
  long long rows = -1;
  long long cols = -1;
  std::string extra;
  if (!(header >> found_magic >> rows >> cols) || (header >> extra)) {
    throw FormatError("block: malformed header '" + line + "'");
  }
  if (found_magic != magic) {
    throw FormatError("block: expected magic " + std::string(magic) + ", found " + found_magic);
  }
  if (rows < 0 || cols < 1) {
    throw FormatError("block: invalid shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }

  LabeledBlock block;
  block.labels.reserve(static_cast<std::size_t>(rows));
  for (long long i = 0; i < rows; ++i) {
    if (!next_line(pos, line)) {
      throw FormatError("block: header declares " + std::to_string(rows) + " labels, file has " +
                        std::to_string(i));
    }
    block.labels.push_back(line);
  }
  if (!next_line(pos, line) || !line.empty()) {
    throw FormatError("block: missing blank separator line after labels");
  }

  const std::size_t expected = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4;
  const std::size_t actual = bytes.size() - pos;
  if (actual != expected) {
    throw FormatError("block: dimension mismatch, header implies " + std::to_string(expected) +
                      " payload bytes but file has " + std::to_string(actual));
  }

  block.values.resize(rows, cols);
  const char* p = bytes.data() + pos;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, p += 4) {
      block.values(r, c) = static_cast<double>(detail::read_le_float(p));
    }
  }
  return block;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("short write to " + path);
}

}  // namespace promptinv
