#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace eitnet {

inline constexpr std::array<std::uint8_t, 4> kPacketMagic{'E', 'I', 'T', 'P'};
inline constexpr std::uint8_t kPacketVersion = 1;
/// magic 4 + version 1 + camera 2 + sequence 4 + timestamp 8 + height 2 + width 2.
inline constexpr std::size_t kPacketHeaderSize = 23;
inline constexpr std::size_t kPacketTrailerSize = 4;

/// Base of every decode failure.
class PacketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad magic, unsupported version or trailing bytes.
class ProtocolError : public PacketError {
 public:
  using PacketError::PacketError;
};

/// CRC mismatch.
class IntegrityError : public PacketError {
 public:
  using PacketError::PacketError;
};

/// Buffer ends before the declared packet does.
class TruncationError : public PacketError {
 public:
  using PacketError::PacketError;
};

struct StreamPacket {
  std::uint16_t camera_id = 0;
  std::uint32_t sequence_no = 0;
  std::uint64_t timestamp = 0;  // microseconds, sender clock
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::vector<std::uint8_t> payload;  // grayscale, row-major

  std::size_t encoded_size() const {
    return kPacketHeaderSize + payload.size() + kPacketTrailerSize;
  }
  bool operator==(const StreamPacket&) const = default;
};

/// IEEE 802.3 CRC-32.
std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes);

/// Little-endian header, payload, then the CRC of everything before it.
/// Throws std::invalid_argument when payload length != height * width.
std::vector<std::uint8_t> encode_packet(const StreamPacket& packet);

/// Exact inverse of encode_packet. Never reads past `bytes`.
StreamPacket decode_packet(std::span<const std::uint8_t> bytes);

}  // namespace eitnet
