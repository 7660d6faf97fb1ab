#include "vdcnn/text.hpp"

#include <algorithm>

#include "vdcnn/errors.hpp"

namespace vdcnn {

namespace {

// Length of the well-formed UTF-8 sequence starting at text[i], or 0 if the byte
// at i does not start one.
std::size_t utf8_sequence_length(std::string_view text, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t len = 0;
  char32_t min = 0;
  char32_t cp = 0;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    len = 2, min = 0x80, cp = b0 & 0x1F;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    len = 3, min = 0x800, cp = b0 & 0x0F;
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    len = 4, min = 0x10000, cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > text.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

}  // namespace

Vocabulary::Vocabulary() {
  byte_to_id_.fill(unk_id);
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) {
    const auto c = static_cast<unsigned char>(kAlphabet[i]);
    byte_to_id_[c] = static_cast<TokenId>(i + 1);
    if (c >= 'a' && c <= 'z') byte_to_id_[c - 'a' + 'A'] = static_cast<TokenId>(i + 1);
  }
  byte_to_id_[' '] = space_id;
}

std::string Vocabulary::token(TokenId id) const {
  if (id == pad_id) return "<pad>";
  if (id == space_id) return " ";
  if (id == unk_id) return "<unk>";
  if (id < 0 || static_cast<std::size_t>(id) >= kSize) {
    throw RangeError("token id " + std::to_string(id) + " outside [0, 69)");
  }
  return std::string(1, kAlphabet[static_cast<std::size_t>(id) - 1]);
}

void Vocabulary::encode_into(std::string_view text, std::span<TokenId> out) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size() && n < out.size(); ++n) {
    const auto b = static_cast<unsigned char>(text[i]);
    if (b < 0x80) {
      out[n] = byte_to_id_[b];
      ++i;
    } else {
      out[n] = unk_id;
      i += std::max<std::size_t>(utf8_sequence_length(text, i), 1);
    }
  }
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(n), out.end(), pad_id);
}

std::vector<TokenId> Vocabulary::encode(std::string_view text, std::size_t s) const {
  if (s == 0) throw RangeError("encode: target length must be at least 1");
  std::vector<TokenId> ids(s);
  encode_into(text, ids);
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id == pad_id) continue;
    if (id == unk_id) {
      out += kUnknownGlyph;
    } else if (id == space_id) {
      out += ' ';
    } else {
      out += token(id);
    }
  }
  return out;
}

const Vocabulary& default_vocabulary() {
  static const Vocabulary vocab;
  return vocab;
}

}  // namespace vdcnn
