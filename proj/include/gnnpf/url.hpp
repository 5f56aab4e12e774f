#pragma once

// Minimal absolute-URL model with RFC 3986 reference resolution.
// Fragments are always discarded: they never name a distinct page.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gnnpf {

struct Url {
  std::string scheme;  // lower-case
  std::string host;    // lower-case
  int port = 0;        // 0 = scheme default
  std::string path = "/";
  std::optional<std::string> query;

  std::string authority() const {
    return port == 0 ? host : host + ":" + std::to_string(port);
  }

  std::string origin() const { return scheme + "://" + authority(); }

  std::string path_and_query() const {
    return query ? path + "?" + *query : path;
  }

  std::string str() const { return origin() + path_and_query(); }

  friend bool operator==(const Url&, const Url&) = default;
};

namespace detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct UrlRef {
  std::optional<std::string> scheme;
  std::optional<std::string> authority;
  std::string path;
  std::optional<std::string> query;
};

inline UrlRef split_reference(std::string_view s) {
  UrlRef ref;
  if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);

  // scheme = ALPHA *( ALPHA / DIGIT / "+" / "-" / "." ) ":"
  if (!s.empty() && std::isalpha(static_cast<unsigned char>(s[0]))) {
    std::size_t i = 1;
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '+' ||
                            s[i] == '-' || s[i] == '.'))
      ++i;
    if (i < s.size() && s[i] == ':') {
      ref.scheme = to_lower(s.substr(0, i));
      s = s.substr(i + 1);
    }
  }
  if (s.starts_with("//")) {
    s = s.substr(2);
    const auto end = s.find_first_of("/?");
    ref.authority = std::string(s.substr(0, end));
    s = end == std::string_view::npos ? std::string_view{} : s.substr(end);
  }
  if (auto q = s.find('?'); q != std::string_view::npos) {
    ref.query = std::string(s.substr(q + 1));
    s = s.substr(0, q);
  }
  ref.path = std::string(s);
  return ref;
}

inline std::string remove_dot_segments(std::string_view in) {
  std::vector<std::string> out;
  const bool absolute = in.starts_with('/');
  std::size_t pos = absolute ? 1 : 0;
  bool trailing = false;
  while (pos <= in.size()) {
    const auto next = in.find('/', pos);
    const auto seg = in.substr(pos, next == std::string_view::npos ? std::string_view::npos
                                                                   : next - pos);
    const bool last = next == std::string_view::npos;
    if (seg == ".") {
      trailing = last;
    } else if (seg == "..") {
      if (!out.empty()) out.pop_back();
      trailing = last;
    } else {
      out.emplace_back(seg);
      trailing = false;
    }
    if (last) break;
    pos = next + 1;
  }
  std::string result = absolute ? "/" : "";
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) result += '/';
    result += out[i];
  }
  if (trailing && !result.ends_with('/')) result += '/';
  return result;
}

inline int default_port(std::string_view scheme) {
  if (scheme == "http") return 80;
  if (scheme == "https") return 443;
  return 0;
}

inline bool apply_authority(Url& url, std::string_view auth) {
  if (auto at = auth.rfind('@'); at != std::string_view::npos) auth = auth.substr(at + 1);
  std::string_view host = auth;
  std::string_view port;
  if (auth.starts_with('[')) {
    const auto close = auth.find(']');
    if (close == std::string_view::npos) return false;
    host = auth.substr(0, close + 1);
    if (close + 1 < auth.size() && auth[close + 1] == ':') port = auth.substr(close + 2);
  } else if (auto colon = auth.rfind(':'); colon != std::string_view::npos) {
    host = auth.substr(0, colon);
    port = auth.substr(colon + 1);
  }
  if (host.empty()) return false;
  url.host = to_lower(host);
  url.port = 0;
  if (!port.empty()) {
    int p = 0;
    for (char c : port) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
      p = p * 10 + (c - '0');
      if (p > 65535) return false;
    }
    if (p != default_port(url.scheme)) url.port = p;
  }
  return true;
}

}  // namespace detail

// Parses an absolute http(s) URL. Returns nullopt for relative references,
// other schemes and malformed authorities.
inline std::optional<Url> parse_url(std::string_view text) {
  auto ref = detail::split_reference(text);
  if (!ref.scheme || !ref.authority) return std::nullopt;
  if (*ref.scheme != "http" && *ref.scheme != "https") return std::nullopt;
  Url url;
  url.scheme = *ref.scheme;
  if (!detail::apply_authority(url, *ref.authority)) return std::nullopt;
  url.path = ref.path.empty() ? "/" : detail::remove_dot_segments(ref.path);
  url.query = ref.query;
  return url;
}

// Resolves `reference` against `base`. Returns nullopt when the target is
// not an http(s) URL (mailto:, javascript:, ...).
inline std::optional<Url> resolve_url(const Url& base, std::string_view reference) {
  auto ref = detail::split_reference(reference);
  if (ref.scheme) {
    if (*ref.scheme != "http" && *ref.scheme != "https") return std::nullopt;
    if (!ref.authority) return std::nullopt;
    return parse_url(reference);
  }
  Url out;
  out.scheme = base.scheme;
  if (ref.authority) {
    if (!detail::apply_authority(out, *ref.authority)) return std::nullopt;
    out.path = ref.path.empty() ? "/" : detail::remove_dot_segments(ref.path);
    out.query = ref.query;
    return out;
  }
  out.host = base.host;
  out.port = base.port;
  if (ref.path.empty()) {
    out.path = base.path;
    out.query = ref.query ? ref.query : base.query;
    return out;
  }
  if (ref.path.starts_with('/')) {
    out.path = detail::remove_dot_segments(ref.path);
  } else {
    const auto slash = base.path.rfind('/');
    const std::string merged =
        (slash == std::string::npos ? std::string("/") : base.path.substr(0, slash + 1)) + ref.path;
    out.path = detail::remove_dot_segments(merged);
  }
  if (out.path.empty()) out.path = "/";
  out.query = ref.query;
  return out;
}

}  // namespace gnnpf
