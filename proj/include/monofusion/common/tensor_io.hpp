#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "monofusion/common/binary_io.hpp"
#include "monofusion/common/tensor.hpp"

namespace mf {

/// Tensor container layout (little-endian):
///   magic "MFTC" | version u32 | n_stages u32
///   per stage: channels u32 | height u32 | width u32 | channels*height*width f32 (row-major)
inline constexpr std::array<char, 4> kTensorMagic{'M', 'F', 'T', 'C'};
inline constexpr std::uint32_t kTensorVersion = 1;

using FloatTensor3 = Tensor<float, 3>;

inline std::vector<char> encode_tensor_container(const std::vector<FloatTensor3>& stages) {
  binary::Writer w;
  w.put_raw(kTensorMagic.data(), kTensorMagic.size());
  w.put(kTensorVersion);
  w.put(static_cast<std::uint32_t>(stages.size()));
  for (const auto& t : stages) {
    w.put(static_cast<std::uint32_t>(t.dim(0)));
    w.put(static_cast<std::uint32_t>(t.dim(1)));
    w.put(static_cast<std::uint32_t>(t.dim(2)));
    w.put_array(t.data(), t.size());
  }
  return w.bytes();
}

inline std::vector<FloatTensor3> decode_tensor_container(binary::Reader& r) {
  std::array<char, 4> magic{};
  r.get_raw(magic.data(), magic.size());
  require(magic == kTensorMagic, ErrorCode::FormatError, "bad tensor magic in " + r.origin());
  const auto version = r.get<std::uint32_t>();
  require(version == kTensorVersion, ErrorCode::FormatError,
          "unsupported tensor container version " + std::to_string(version));
  const auto n = r.get<std::uint32_t>();
  require(n <= 64, ErrorCode::FormatError, "implausible stage count");
  std::vector<FloatTensor3> stages;
  stages.reserve(n);
  for (std::uint32_t s = 0; s < n; ++s) {
    const auto c = r.get<std::uint32_t>();
    const auto h = r.get<std::uint32_t>();
    const auto w = r.get<std::uint32_t>();
    const std::uint64_t count = std::uint64_t{c} * h * w;
    require(count * sizeof(float) <= r.remaining(), ErrorCode::FormatError,
            "truncated tensor payload in " + r.origin());
    FloatTensor3 t({static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)});
    r.get_array(t.data(), t.size());
    stages.push_back(std::move(t));
  }
  require(r.remaining() == 0, ErrorCode::FormatError, "trailing bytes in " + r.origin());
  return stages;
}

inline void write_tensor_container(const std::string& path, const std::vector<FloatTensor3>& stages) {
  binary::Writer w;
  const auto bytes = encode_tensor_container(stages);
  w.put_raw(bytes.data(), bytes.size());
  w.save(path);
}

inline std::vector<FloatTensor3> read_tensor_container(const std::string& path) {
  auto r = binary::Reader::from_file(path);
  return decode_tensor_container(r);
}

}  // namespace mf
