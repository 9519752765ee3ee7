#pragma once

#include <cstdint>

namespace cmbert::special {

// Reserved low ids; stable across vocabulary augmentation.
inline constexpr std::int32_t kPad = 0;
inline constexpr std::int32_t kUnk = 1;
inline constexpr std::int32_t kCls = 2;
inline constexpr std::int32_t kSep = 3;
inline constexpr std::int32_t kMask = 4;
inline constexpr std::int32_t kCount = 5;

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kMaskToken = "[MASK]";

// Inter-word separator emitted between whitespace pretokens; a regular
// (non-special) vocabulary token that decodes to a single space.
inline constexpr const char* kWordSep = "\xe2\x96\x81";  // U+2581

inline constexpr bool is_special(std::int32_t id) { return id >= 0 && id < kCount; }

}  // namespace cmbert::special
