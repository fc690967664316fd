#pragma once

// Binary model format, little-endian:
//
//   "APGD"            4 bytes magic
//   version           u16 (currently 1)
//   input dim D       u32
//   classes C         u32
//   layer count       u32
//   per layer:
//     rows, cols      u32, u32
//     activation      u8 (0 identity, 1 relu)
//     weights         rows*cols f64, row-major
//     biases          rows f64

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "altpgd/errors.hpp"
#include "altpgd/models.hpp"

namespace altpgd {

inline constexpr std::array<char, 4> kModelMagic{'A', 'P', 'G', 'D'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

namespace detail {

template <typename U>
void put_le(std::ostream& os, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }

template <typename U>
U get_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U)))
    throw FormatError(std::string("model file truncated while reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(get_le<std::uint64_t>(is, what));
}

}  // namespace detail

inline void write_model(std::ostream& os, const Classifier& model) {
  os.write(kModelMagic.data(), kModelMagic.size());
  detail::put_le<std::uint16_t>(os, kModelFormatVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.input_dim()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.num_classes()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.layers().size()));
  for (const Layer& l : model.layers()) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.weights.rows));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.weights.cols));
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(l.activation));
    for (double w : l.weights.data) detail::put_f64(os, w);
    for (double b : l.bias) detail::put_f64(os, b);
  }
}

inline Classifier read_model(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size())) throw FormatError("model file truncated in magic");
  if (magic != kModelMagic) throw FormatError("bad magic, not a model file");
  const auto version = detail::get_le<std::uint16_t>(is, "version");
  if (version != kModelFormatVersion)
    throw FormatError("unsupported model format version " + std::to_string(version));
  const auto d = detail::get_le<std::uint32_t>(is, "input dim");
  const auto c = detail::get_le<std::uint32_t>(is, "class count");
  const auto count = detail::get_le<std::uint32_t>(is, "layer count");
  if (count == 0) throw FormatError("model file declares zero layers");
  if (count > 1024) throw FormatError("implausible layer count");

  std::vector<Layer> layers;
  std::uint32_t expected_in = d;
  for (std::uint32_t li = 0; li < count; ++li) {
    const auto rows = detail::get_le<std::uint32_t>(is, "layer rows");
    const auto cols = detail::get_le<std::uint32_t>(is, "layer cols");
    const auto act = detail::get_le<std::uint8_t>(is, "activation tag");
    if (act > 1) throw FormatError("unknown activation tag " + std::to_string(act));
    if (cols != expected_in)
      throw ShapeError("dimension inconsistency: layer " + std::to_string(li) + " has " +
                       std::to_string(cols) + " inputs, expected " + std::to_string(expected_in));
    if (rows == 0 || static_cast<std::uint64_t>(rows) * cols > (1ULL << 26))
      throw FormatError("implausible layer shape");
    Layer l;
    l.weights = Matrix(rows, cols);
    l.activation = static_cast<Activation>(act);
    for (double& w : l.weights.data) w = detail::get_f64(is, "weights");
    l.bias.resize(rows);
    for (double& b : l.bias) b = detail::get_f64(is, "biases");
    layers.push_back(std::move(l));
    expected_in = rows;
  }
  if (expected_in != c)
    throw ShapeError("dimension inconsistency: last layer emits " + std::to_string(expected_in) +
                     " logits, header declares " + std::to_string(c));
  return Classifier(std::move(layers));
}

inline void save_model(const Classifier& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_model(os, model);
  os.flush();
  if (!os) throw Error("failed writing " + path.string());
}

inline Classifier load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_model(is);
}

}  // namespace altpgd
