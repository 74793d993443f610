#include "cmim/idx.hpp"

#include <fstream>
#include <functional>
#include <numeric>
#include <string>

namespace cmim {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

bool known_idx_dtype(std::uint8_t t) {
  switch (t) {
    case 0x08: case 0x09: case 0x0B: case 0x0C: case 0x0D: case 0x0E:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::size_t IdxTensor::element_count() const noexcept {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t d) { return a * d; });
}

Eigen::MatrixXd IdxTensor::to_unit_rows() const {
  if (dims.empty()) return {};
  const auto rows = static_cast<Eigen::Index>(dims.front());
  const Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(element_count()) / rows;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = static_cast<double>(data[static_cast<std::size_t>(r * cols + c)]) / 255.0;
    }
  }
  return m;
}

std::vector<int> IdxTensor::to_labels() const {
  return {data.begin(), data.end()};
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw IdxError(IdxErrorKind::truncated, "IDX: missing magic number");
  IdxTensor t;
  t.magic = read_be32(bytes, 0);
  if (bytes[0] != 0 || bytes[1] != 0 || !known_idx_dtype(bytes[2])) {
    throw IdxError(IdxErrorKind::bad_magic, "IDX: bad magic number");
  }
  if (bytes[2] != kIdxUnsignedByte) {
    throw IdxError(IdxErrorKind::unsupported_dtype,
                   "IDX: unsupported element type code " + std::to_string(bytes[2]));
  }
  const std::size_t rank = bytes[3];
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) throw IdxError(IdxErrorKind::truncated, "IDX: truncated header");
  for (std::size_t i = 0; i < rank; ++i) t.dims.push_back(read_be32(bytes, 4 + 4 * i));

  const std::size_t n = t.element_count();
  if (bytes.size() - header < n) {
    throw IdxError(IdxErrorKind::truncated, "IDX: payload has " +
                                                std::to_string(bytes.size() - header) +
                                                " bytes, header promises " + std::to_string(n));
  }
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                bytes.begin() + static_cast<std::ptrdiff_t>(header + n));
  return t;
}

IdxTensor read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxErrorKind::io, "IDX: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

void write_idx(const std::filesystem::path& path, const IdxTensor& tensor) {
  if (tensor.dtype() != kIdxUnsignedByte || tensor.rank() != tensor.dims.size()) {
    throw IdxError(IdxErrorKind::unsupported_dtype, "IDX: only unsigned-byte tensors are written");
  }
  if (tensor.data.size() != tensor.element_count()) {
    throw IdxError(IdxErrorKind::truncated, "IDX: data size does not match dims");
  }
  std::vector<std::uint8_t> out;
  write_be32(out, tensor.magic);
  for (auto d : tensor.dims) write_be32(out, d);
  out.insert(out.end(), tensor.data.begin(), tensor.data.end());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IdxError(IdxErrorKind::io, "IDX: cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

IdxTensor make_idx_u8(std::vector<std::uint32_t> dims, std::vector<std::uint8_t> data) {
  IdxTensor t;
  t.magic = (static_cast<std::uint32_t>(kIdxUnsignedByte) << 8) | static_cast<std::uint32_t>(dims.size());
  t.dims = std::move(dims);
  t.data = std::move(data);
  return t;
}

}  // namespace cmim
