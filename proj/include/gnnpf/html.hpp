#pragma once

// Forgiving HTML tokenizer: enough structure to pull anchors, images and
// visible text out of arbitrary (possibly malformed) markup. It never fails;
// anything it cannot make sense of is treated as text.

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gnnpf::html {

struct Attribute {
  std::string name;  // lower-case
  std::string value;
};

struct Tag {
  std::string name;  // lower-case, no leading '/'
  bool closing = false;
  std::vector<Attribute> attrs;

  const std::string* attr(std::string_view key) const {
    for (const auto& a : attrs)
      if (a.name == key) return &a.value;
    return nullptr;
  }
};

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

inline bool iequals_at(std::string_view s, std::size_t pos, std::string_view word) {
  if (pos + word.size() > s.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i)
    if (lower(s[pos + i]) != word[i]) return false;
  return true;
}

inline std::size_t ifind(std::string_view s, std::string_view word, std::size_t from) {
  for (std::size_t i = from; i + word.size() <= s.size(); ++i)
    if (iequals_at(s, i, word)) return i;
  return std::string_view::npos;
}

// Parses the tag starting at s[pos] == '<'. On success returns the position
// one past '>' (or end of input for an unterminated tag).
inline std::size_t parse_tag(std::string_view s, std::size_t pos, Tag& tag) {
  std::size_t i = pos + 1;
  tag = Tag{};
  if (i < s.size() && s[i] == '/') {
    tag.closing = true;
    ++i;
  }
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '-' ||
                          s[i] == ':'))
    tag.name += lower(s[i++]);

  while (i < s.size() && s[i] != '>') {
    if (is_space(s[i]) || s[i] == '/') {
      ++i;
      continue;
    }
    Attribute attr;
    while (i < s.size() && !is_space(s[i]) && s[i] != '=' && s[i] != '>' && s[i] != '/')
      attr.name += lower(s[i++]);
    while (i < s.size() && is_space(s[i])) ++i;
    if (i < s.size() && s[i] == '=') {
      ++i;
      while (i < s.size() && is_space(s[i])) ++i;
      if (i < s.size() && (s[i] == '"' || s[i] == '\'')) {
        const char quote = s[i++];
        const auto end = s.find(quote, i);
        const auto stop = end == std::string_view::npos ? s.size() : end;
        attr.value = std::string(s.substr(i, stop - i));
        i = end == std::string_view::npos ? s.size() : end + 1;
      } else {
        while (i < s.size() && !is_space(s[i]) && s[i] != '>') attr.value += s[i++];
      }
    }
    if (!attr.name.empty()) tag.attrs.push_back(std::move(attr));
  }
  return i < s.size() ? i + 1 : s.size();
}

}  // namespace detail

// Decodes the handful of character references that show up in href values.
inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += s[i];
      continue;
    }
    const auto name = s.substr(i + 1, semi - i - 1);
    if (name == "amp") out += '&';
    else if (name == "lt") out += '<';
    else if (name == "gt") out += '>';
    else if (name == "quot") out += '"';
    else if (name == "apos") out += '\'';
    else if (name.size() > 1 && name[0] == '#') {
      unsigned long code = 0;
      bool ok = true;
      const bool hex = name[1] == 'x' || name[1] == 'X';
      for (std::size_t k = hex ? 2 : 1; k < name.size() && ok; ++k) {
        const char c = name[k];
        if (std::isdigit(static_cast<unsigned char>(c))) code = code * (hex ? 16 : 10) + (c - '0');
        else if (hex && std::isxdigit(static_cast<unsigned char>(c)))
          code = code * 16 + (detail::lower(c) - 'a' + 10);
        else ok = false;
      }
      if (!ok || code == 0 || code > 0x7f) {
        out += s.substr(i, semi - i + 1);
      } else {
        out += static_cast<char>(code);
      }
    } else {
      out += s.substr(i, semi - i + 1);
    }
    i = semi;
  }
  return out;
}

// Walks the document, calling on_tag(const Tag&) for each tag and
// on_text(std::string_view) for each run of text outside tags. Comments are
// dropped; the bodies of <script> and <style> are neither tags nor text.
template <typename OnTag, typename OnText>
void scan(std::string_view s, OnTag&& on_tag, OnText&& on_text) {
  std::size_t i = 0;
  std::size_t text_start = 0;
  auto flush = [&](std::size_t end) {
    if (end > text_start) on_text(s.substr(text_start, end - text_start));
  };
  while (i < s.size()) {
    if (s[i] != '<') {
      ++i;
      continue;
    }
    if (s.substr(i).starts_with("<!--")) {
      flush(i);
      const auto end = s.find("-->", i + 4);
      i = end == std::string_view::npos ? s.size() : end + 3;
      text_start = i;
      continue;
    }
    const char next = i + 1 < s.size() ? s[i + 1] : '\0';
    const bool opens = std::isalpha(static_cast<unsigned char>(next)) != 0;
    const bool closes = next == '/' && i + 2 < s.size() &&
                        std::isalpha(static_cast<unsigned char>(s[i + 2])) != 0;
    if (next == '!' || next == '?') {
      flush(i);
      const auto end = s.find('>', i);
      i = end == std::string_view::npos ? s.size() : end + 1;
      text_start = i;
      continue;
    }
    if (!opens && !closes) {
      ++i;
      continue;
    }
    flush(i);
    Tag tag;
    i = detail::parse_tag(s, i, tag);
    text_start = i;
    on_tag(tag);
    if (!tag.closing && (tag.name == "script" || tag.name == "style")) {
      const std::string terminator = "</" + tag.name;
      const auto end = detail::ifind(s, terminator, i);
      i = end == std::string_view::npos ? s.size() : end;
      text_start = i;
    }
  }
  flush(s.size());
}

// href values of <a> tags in document order, entity-decoded and trimmed.
// Anchors without an href attribute are skipped.
inline std::vector<std::string> anchor_hrefs(std::string_view doc) {
  std::vector<std::string> out;
  scan(
      doc,
      [&](const Tag& tag) {
        if (tag.closing || tag.name != "a") return;
        if (const auto* href = tag.attr("href")) {
          std::string v = decode_entities(*href);
          const auto b = v.find_first_not_of(" \t\r\n");
          const auto e = v.find_last_not_of(" \t\r\n");
          out.push_back(b == std::string::npos ? std::string{} : v.substr(b, e - b + 1));
        }
      },
      [](std::string_view) {});
  return out;
}

struct ContentCounts {
  std::size_t words = 0;
  std::size_t images = 0;
  friend bool operator==(const ContentCounts&, const ContentCounts&) = default;
};

// Whitespace-separated tokens of the tag-stripped text, and <img> count.
inline ContentCounts count_content(std::string_view doc) {
  ContentCounts counts;
  bool in_word = false;
  scan(
      doc,
      [&](const Tag& tag) {
        in_word = false;
        if (!tag.closing && tag.name == "img") ++counts.images;
      },
      [&](std::string_view text) {
        for (char c : text) {
          if (detail::is_space(c)) {
            in_word = false;
          } else if (!in_word) {
            in_word = true;
            ++counts.words;
          }
        }
      });
  return counts;
}

}  // namespace gnnpf::html
