// Copyright 2026 The spanlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPANLAB_INTERNAL_UTF8_H_
#define SPANLAB_INTERNAL_UTF8_H_

#include <cstddef>
#include <string>
#include <string_view>

namespace spanlab::internal {

struct CodePoint {
  char32_t value = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool valid = false;
};

// Forward decoder over UTF-8. Malformed sequences yield one invalid code
// point per offending byte.
class Utf8Reader {
 public:
  explicit Utf8Reader(std::string_view s) : s_(s) {}

  bool done() const { return pos_ >= s_.size(); }

  CodePoint Next() {
    CodePoint cp;
    cp.offset = pos_;
    const auto b0 = static_cast<unsigned char>(s_[pos_]);
    std::size_t len = 0;
    char32_t value = 0;
    if (b0 < 0x80) {
      len = 1;
      value = b0;
    } else if ((b0 & 0xe0) == 0xc0) {
      len = 2;
      value = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
      len = 3;
      value = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
      len = 4;
      value = b0 & 0x07;
    }
    bool ok = len > 0 && pos_ + len <= s_.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s_[pos_ + k]);
      ok = (b & 0xc0) == 0x80;
      value = (value << 6) | (b & 0x3f);
    }
    if (ok) {
      // Reject overlong forms and surrogates.
      static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
      ok = value >= kMin[len] && value <= 0x10ffff &&
           !(value >= 0xd800 && value <= 0xdfff);
    }
    if (!ok) {
      cp.value = b0;
      cp.length = 1;
      cp.valid = false;
    } else {
      cp.value = value;
      cp.length = len;
      cp.valid = true;
    }
    pos_ += cp.length;
    return cp;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

inline void AppendUtf8(char32_t c, std::string& out) {
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3f)));
  }
}

}  // namespace spanlab::internal

#endif  // SPANLAB_INTERNAL_UTF8_H_
