#pragma once

// IDX container (the MNIST distribution format): a big-endian 32-bit magic
// number 0x0000TTRR (TT = element type, RR = rank), RR big-endian 32-bit
// dimensions, then the row-major payload. Only unsigned-byte payloads (0x08)
// are supported.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace cmim {

enum class IdxErrorKind { io, bad_magic, truncated, unsupported_dtype };

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  IdxErrorKind kind() const noexcept { return kind_; }

 private:
  IdxErrorKind kind_;
};

inline constexpr std::uint8_t kIdxUnsignedByte = 0x08;

struct IdxTensor {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::uint8_t dtype() const noexcept { return static_cast<std::uint8_t>((magic >> 8) & 0xFF); }
  std::size_t rank() const noexcept { return dims.size(); }
  std::size_t element_count() const noexcept;

  /// Rows = first dimension, columns = product of the rest, values / 255.
  Eigen::MatrixXd to_unit_rows() const;
  /// Raw byte values as integer labels (rank-1 tensors).
  std::vector<int> to_labels() const;
};

IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
IdxTensor read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxTensor& tensor);

/// Builds an unsigned-byte tensor with the given dims.
IdxTensor make_idx_u8(std::vector<std::uint32_t> dims, std::vector<std::uint8_t> data);

}  // namespace cmim
