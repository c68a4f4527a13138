#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "bfp/error.hpp"
#include "bfp/matrix.hpp"
#include "bfp/network.hpp"

namespace bfp {

// Binary layouts are little-endian: shape header (64-bit counts) followed by
// row-major 64-bit floating point values. Round trips are bit-exact.

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw FormatError(path + ": truncated header");
  return v;
}

inline void write_doubles(std::ostream& out, const std::vector<double>& xs) {
  out.write(reinterpret_cast<const char*>(xs.data()),
            static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

inline void read_doubles(std::istream& in, std::vector<double>& xs,
                         const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(xs.data()),
               static_cast<std::streamsize>(xs.size() * sizeof(double))))
    throw FormatError(path + ": truncated payload");
}

}  // namespace detail

/// Matrix dump: uint64 rows, uint64 cols, then rows*cols doubles row-major.
inline void write_matrix_file(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  detail::write_u64(out, m.rows);
  detail::write_u64(out, m.cols);
  detail::write_doubles(out, m.data);
}

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  const std::uint64_t rows = detail::read_u64(in, path);
  const std::uint64_t cols = detail::read_u64(in, path);
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  detail::read_doubles(in, m.data, path);
  return m;
}

/// Parameter checkpoint: layer count, then per affine layer the weight
/// matrix (rows, cols, values) and bias vector (length, values); feature
/// layers first, head last.
inline void save_checkpoint(const std::string& path, const NetworkParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  auto put_layer = [&](const AffineLayer& l) {
    detail::write_u64(out, l.weight.rows);
    detail::write_u64(out, l.weight.cols);
    detail::write_doubles(out, l.weight.data);
    detail::write_u64(out, l.bias.size());
    detail::write_doubles(out, l.bias);
  };
  detail::write_u64(out, p.features.size());
  for (const auto& l : p.features) put_layer(l);
  put_layer(p.head);
}

inline NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  auto get_layer = [&] {
    AffineLayer l;
    const std::uint64_t rows = detail::read_u64(in, path);
    const std::uint64_t cols = detail::read_u64(in, path);
    l.weight = Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    detail::read_doubles(in, l.weight.data, path);
    const std::uint64_t blen = detail::read_u64(in, path);
    l.bias.assign(static_cast<std::size_t>(blen), 0.0);
    detail::read_doubles(in, l.bias, path);
    return l;
  };
  NetworkParams p;
  const std::uint64_t layers = detail::read_u64(in, path);
  for (std::uint64_t i = 0; i < layers; ++i) p.features.push_back(get_layer());
  p.head = get_layer();
  return p;
}

}  // namespace bfp
