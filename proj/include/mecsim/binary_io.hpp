#ifndef MECSIM_BINARY_IO_HPP_
#define MECSIM_BINARY_IO_HPP_

// Little-endian primitive encoding shared by checkpoints and replay shards.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "mecsim/error.hpp"

namespace mecsim::io {

template <typename T>
void put_le(std::vector<std::uint8_t>& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(raw[sizeof(T) - 1 - i]);
  } else {
    buf.insert(buf.end(), raw, raw + sizeof(T));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint8_t raw[sizeof(T)];
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T); ++i) raw[i] = p[sizeof(T) - 1 - i];
  } else {
    std::memcpy(raw, p, sizeof(T));
  }
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

// Cursor over a byte buffer that throws on overrun.
class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > size_) {
      throw Error(ErrorCode::kCheckpoint, "truncated binary record");
    }
    T v = get_le<T>(data_ + pos_);
    pos_ += sizeof(T);
    return v;
  }

  void bytes(void* out, std::size_t n) {
    if (pos_ + n > size_) throw Error(ErrorCode::kCheckpoint, "truncated binary record");
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }

  bool at_end() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_all(std::istream& in) {
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_all(std::ostream& out, const std::vector<std::uint8_t>& buf) {
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed");
}

}  // namespace mecsim::io

#endif  // MECSIM_BINARY_IO_HPP_
