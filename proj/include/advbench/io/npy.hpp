#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "advbench/core/tensor.hpp"

// Minimal NumPy .npy (format 1.0) reader and writer for little-endian float32/float64
// C-order arrays of rank 1 to 4. Lower ranks are padded to NCHW on read.

namespace advbench::io {

namespace detail {

template <class T>
constexpr const char* npy_descr() {
  if constexpr (std::is_same_v<T, float>) return "<f4";
  else return "<f8";
}

inline std::string shape_tuple(const Shape& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) + ", " +
         std::to_string(s.w) + ")";
}

}  // namespace detail

template <class T>
void write_npy(const std::filesystem::path& path, const Tensor<T>& t) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  std::string header = "{'descr': '" + std::string(detail::npy_descr<T>()) +
                       "', 'fortran_order': False, 'shape': " + detail::shape_tuple(t.shape()) + ", }";
  const std::size_t preamble = 10;
  const std::size_t total = (preamble + header.size() + 1 + 63) / 64 * 64;
  header.append(total - preamble - header.size() - 1, ' ');
  header.push_back('\n');
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const unsigned char magic[8] = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  out.write(reinterpret_cast<const char*>(magic), 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  const unsigned char len_bytes[2] = {static_cast<unsigned char>(len & 0xff), static_cast<unsigned char>(len >> 8)};
  out.write(reinterpret_cast<const char*>(len_bytes), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Reads float32 or float64 data and converts to T.
template <class T>
Tensor<T> read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) throw ValidationError("'" + path.string() + "' is not a .npy file");
  std::size_t header_len = 0;
  if (magic[6] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (static_cast<std::size_t>(b[1]) << 8);
  } else {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (static_cast<std::size_t>(b[1]) << 8) | (static_cast<std::size_t>(b[2]) << 16) |
                 (static_cast<std::size_t>(b[3]) << 24);
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ValidationError("truncated .npy header in '" + path.string() + "'");

  std::smatch m;
  if (!std::regex_search(header, m, std::regex("'descr':\\s*'([<|=]f[48])'")))
    throw ValidationError("'" + path.string() + "': only little-endian float32/float64 arrays are supported");
  const bool is_f4 = m[1].str().back() == '4';
  if (std::regex_search(header, std::regex("'fortran_order':\\s*True")))
    throw ValidationError("'" + path.string() + "': Fortran-order arrays are not supported");
  if (!std::regex_search(header, m, std::regex("'shape':\\s*\\(([^)]*)\\)")))
    throw ValidationError("'" + path.string() + "': missing shape");
  std::vector<std::size_t> dims;
  const std::string dims_text = m[1].str();
  const std::regex digits("\\d+");
  for (std::sregex_iterator it(dims_text.begin(), dims_text.end(), digits), end; it != end; ++it)
    dims.push_back(std::stoull(it->str()));
  if (dims.empty() || dims.size() > 4) throw ValidationError("'" + path.string() + "': rank must be 1..4");
  while (dims.size() < 4) dims.insert(dims.begin(), 1);
  const Shape shape{dims[0], dims[1], dims[2], dims[3]};

  Tensor<T> t(shape);
  if (is_f4) {
    std::vector<float> buf(shape.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw ValidationError("truncated .npy data in '" + path.string() + "'");
    for (std::size_t i = 0; i < buf.size(); ++i) t[i] = static_cast<T>(buf[i]);
  } else {
    std::vector<double> buf(shape.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!in) throw ValidationError("truncated .npy data in '" + path.string() + "'");
    for (std::size_t i = 0; i < buf.size(); ++i) t[i] = static_cast<T>(buf[i]);
  }
  return t;
}

}  // namespace advbench::io
