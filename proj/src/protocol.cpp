#include "eitnet/protocol.hpp"

#include <zlib.h>

#include <algorithm>
#include <string>

namespace eitnet {

namespace {

template <typename T>
std::size_t put_le(std::vector<std::uint8_t>& out, std::size_t at, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[at + i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i));
  }
  return at + sizeof(T);
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths.
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_packet(const StreamPacket& packet) {
  const std::size_t expected = std::size_t{packet.height} * packet.width;
  if (packet.payload.size() != expected) {
    throw std::invalid_argument("encode_packet: payload has " +
                                std::to_string(packet.payload.size()) + " bytes, " +
                                std::to_string(packet.height) + "x" +
                                std::to_string(packet.width) + " frame needs " +
                                std::to_string(expected));
  }
  std::vector<std::uint8_t> out(packet.encoded_size());
  std::copy(kPacketMagic.begin(), kPacketMagic.end(), out.begin());
  std::size_t at = kPacketMagic.size();
  out[at++] = kPacketVersion;
  at = put_le(out, at, packet.camera_id);
  at = put_le(out, at, packet.sequence_no);
  at = put_le(out, at, packet.timestamp);
  at = put_le(out, at, packet.height);
  at = put_le(out, at, packet.width);
  std::copy(packet.payload.begin(), packet.payload.end(),
            out.begin() + static_cast<std::ptrdiff_t>(at));
  at += packet.payload.size();
  put_le(out, at, crc32_ieee(std::span(out).first(at)));
  return out;
}

StreamPacket decode_packet(std::span<const std::uint8_t> bytes) {
  const std::size_t magic_bytes = std::min(bytes.size(), kPacketMagic.size());
  if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(magic_bytes),
                  kPacketMagic.begin())) {
    throw ProtocolError("decode_packet: bad magic");
  }
  if (bytes.size() > 4 && bytes[4] != kPacketVersion) {
    throw ProtocolError("decode_packet: unsupported version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < kPacketHeaderSize) {
    throw TruncationError("decode_packet: " + std::to_string(bytes.size()) +
                          " bytes is shorter than the header");
  }
  StreamPacket p;
  p.camera_id = get_le<std::uint16_t>(bytes, 5);
  p.sequence_no = get_le<std::uint32_t>(bytes, 7);
  p.timestamp = get_le<std::uint64_t>(bytes, 11);
  p.height = get_le<std::uint16_t>(bytes, 19);
  p.width = get_le<std::uint16_t>(bytes, 21);
  const std::size_t payload = std::size_t{p.height} * p.width;
  const std::size_t total = kPacketHeaderSize + payload + kPacketTrailerSize;
  if (bytes.size() < total) {
    throw TruncationError("decode_packet: packet declares " + std::to_string(total) +
                          " bytes, buffer has " + std::to_string(bytes.size()));
  }
  if (bytes.size() > total) {
    throw ProtocolError("decode_packet: " + std::to_string(bytes.size() - total) +
                        " trailing bytes");
  }
  const std::size_t crc_at = kPacketHeaderSize + payload;
  const std::uint32_t stored = get_le<std::uint32_t>(bytes, crc_at);
  if (stored != crc32_ieee(bytes.first(crc_at))) {
    throw IntegrityError("decode_packet: CRC mismatch");
  }
  const auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(kPacketHeaderSize);
  p.payload.assign(begin, begin + static_cast<std::ptrdiff_t>(payload));
  return p;
}

}  // namespace eitnet
