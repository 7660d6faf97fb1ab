#pragma once

// Character vocabulary and fixed-length encoding.
//
//   id 0        padding
//   ids 1..66   abcdefghijklmnopqrstuvwxyz0123456789-,;.!?:'"/|_#$%^&*~`+=<>()[]{}
//   id 67       space
//   id 68       unknown (anything else, including control bytes and non-ASCII)

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vdcnn/nn_ops.hpp"

namespace vdcnn {

class Vocabulary {
 public:
  static constexpr std::size_t kSize = 69;
  static constexpr TokenId pad_id = 0;
  static constexpr TokenId space_id = 67;
  static constexpr TokenId unk_id = 68;
  static constexpr std::string_view kAlphabet =
      "abcdefghijklmnopqrstuvwxyz0123456789-,;.!?:'\"/|_#$%^&*~`+=<>()[]{}";
  /// Printed in place of unknown tokens by decode().
  static constexpr std::string_view kUnknownGlyph = "\xEF\xBF\xBD";  // U+FFFD

  Vocabulary();

  std::size_t size() const { return kSize; }

  /// Id of a single ASCII byte after lower-casing. Bytes >= 0x80 map to unk_id.
  TokenId id_of(char c) const { return byte_to_id_[static_cast<unsigned char>(c)]; }

  /// Printable form of one token: the character itself, " ", "<pad>" or "<unk>".
  std::string token(TokenId id) const;

  /// Lower-cases, maps, truncates to s and right-pads with pad_id. A well-formed
  /// multi-byte UTF-8 character becomes one unk_id; each invalid byte becomes one unk_id.
  std::vector<TokenId> encode(std::string_view text, std::size_t s) const;
  void encode_into(std::string_view text, std::span<TokenId> out) const;

  /// Inverse of encode on in-vocabulary text: pads are dropped, unknowns become U+FFFD.
  std::string decode(std::span<const TokenId> ids) const;

 private:
  std::array<TokenId, 256> byte_to_id_{};
};

/// Shared immutable instance.
const Vocabulary& default_vocabulary();

}  // namespace vdcnn
