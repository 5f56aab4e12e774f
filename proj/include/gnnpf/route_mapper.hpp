#pragma once

// Route mapper: turns a web site or a directory tree into a MirrorSnapshot,
// a flat list of pages with their internal outlinks, mirrored on disk next
// to a JSON manifest so later stages never touch the network.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "gnnpf/errors.hpp"
#include "gnnpf/html.hpp"
#include "gnnpf/url.hpp"

namespace gnnpf {

namespace fs = std::filesystem;

enum class PageKind { page, directory, file };
enum class SnapshotKind { web, filesystem };

inline std::string_view to_string(PageKind k) {
  switch (k) {
    case PageKind::page: return "page";
    case PageKind::directory: return "directory";
    case PageKind::file: return "file";
  }
  return "page";
}

inline std::optional<PageKind> page_kind_from_string(std::string_view s) {
  if (s == "page") return PageKind::page;
  if (s == "directory") return PageKind::directory;
  if (s == "file") return PageKind::file;
  return std::nullopt;
}

inline std::string_view to_string(SnapshotKind k) {
  return k == SnapshotKind::web ? "web" : "filesystem";
}

struct PageRecord {
  std::string path;  // relative to the snapshot root, '/'-separated
  PageKind kind = PageKind::page;
  std::vector<std::string> outlinks;
  std::uint64_t raw_size = 0;

  friend bool operator==(const PageRecord&, const PageRecord&) = default;
};

struct MirrorSnapshot {
  fs::path root;
  std::vector<PageRecord> pages;  // pages[0] is the entry point
  SnapshotKind kind = SnapshotKind::web;
  std::size_t skipped = 0;        // fetch failures or unreadable entries
};

struct CrawlConfig {
  std::string base_url;
  std::size_t max_pages = 1000;
  std::size_t max_depth = 10;
  std::chrono::milliseconds request_delay{200};
  fs::path output_root = "output";

  void validate() const {
    if (!parse_url(base_url)) throw UsageError("base_url is not an absolute http(s) URL: " + base_url);
    if (max_pages < 1) throw UsageError("max_pages must be at least 1");
    if (request_delay.count() < 0) throw UsageError("request_delay must be non-negative");
  }
};

// ---------------------------------------------------------------------------
// Link extraction

// Internal navigational links of a page: relative links and absolute links
// on `main_domain`, resolved against page_url, fragment stripped,
// deduplicated in order of first appearance.
inline std::vector<std::string> extract_links(std::string_view doc, std::string_view page_url,
                                              std::string_view main_domain) {
  std::vector<std::string> out;
  const auto base = parse_url(page_url);
  if (!base) return out;
  const std::string domain = detail::to_lower(main_domain);
  std::unordered_set<std::string> seen;
  for (const auto& href : html::anchor_hrefs(doc)) {
    if (href.empty() || href.starts_with('#')) continue;
    const auto target = resolve_url(*base, href);
    if (!target || target->host != domain) continue;
    auto s = target->str();
    if (seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// URL -> mirror path

namespace detail {

inline bool keep_path_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '~' ||
         c == '=' || c == ',' || c == '+' || c == '@';
}

inline std::string percent_encode(std::string_view s) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (keep_path_char(ch)) {
      out += ch;
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    }
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    parts.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos
                                                                    : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

}  // namespace detail

// Mirror directory for a host: the registrable name without its last label
// ("domain.com" -> "domain"); IP literals are kept whole. A non-default
// port is appended after '_'.
inline std::string host_directory(const Url& url) {
  const std::string& host = url.host;
  const bool ip = host.starts_with('[') ||
                  std::all_of(host.begin(), host.end(), [](char c) {
                    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
                  });
  std::string name = host;
  if (!ip) {
    const auto dot = host.rfind('.');
    if (dot != std::string::npos && dot > 0) name = host.substr(0, dot);
  }
  name = detail::percent_encode(name);
  if (url.port != 0) name += "_" + std::to_string(url.port);
  return name;
}

// Injective map from an internal URL to its snapshot-relative file path.
//   /products/item1  -> <host>/products/item1.html
//   / or /dir/       -> <host>/index.html, <host>/dir/index.html
//   /a?x=1           -> <host>/a_x=1.html
// '_' only ever appears as the query separator (a literal '_' is encoded),
// a literal final segment "index" is written "%69ndex", and directory
// components ending in ".html" get their dot encoded, so distinct URLs never
// collide as strings or on disk.
inline std::string url_to_path(const Url& url) {
  auto segments = detail::split(url.path.starts_with('/') ? std::string_view(url.path).substr(1)
                                                          : std::string_view(url.path),
                                '/');
  std::string out = host_directory(url);
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    std::string seg = segments[i].empty() ? "_" : detail::percent_encode(segments[i]);
    if (seg.ends_with(".html")) seg.replace(seg.size() - 5, 1, "%2E");
    out += '/';
    out += seg;
  }
  const std::string& last = segments.back();
  std::string leaf;
  if (last.empty()) leaf = "index";
  else if (last == "index") leaf = "%69ndex";
  else leaf = detail::percent_encode(last);
  if (url.query) leaf += "_" + detail::percent_encode(*url.query);
  out += '/';
  out += leaf;
  out += ".html";
  return out;
}

inline std::string url_to_path(std::string_view url) {
  const auto parsed = parse_url(url);
  if (!parsed) throw std::invalid_argument("not an absolute URL: " + std::string(url));
  return url_to_path(*parsed);
}

// ---------------------------------------------------------------------------
// Fetching

struct FetchResult {
  bool ok = false;
  int status = 0;
  std::string body;
  std::string error;
};

inline constexpr const char* kUserAgent = "gnnpf-route-mapper/1.0";
inline constexpr int kMaxRedirects = 3;

// Sequential HTTP GET with a politeness delay between request starts and
// same-domain redirect following.
class PageFetcher {
 public:
  explicit PageFetcher(std::chrono::milliseconds delay) : delay_(delay) {}

  FetchResult fetch(std::string_view url_text) {
    auto url = parse_url(url_text);
    if (!url) return {false, 0, {}, "invalid URL"};
    const std::string domain = url->host;
    for (int hop = 0; hop <= kMaxRedirects; ++hop) {
      throttle();
      ++requests_;
      auto res = get(*url);
      if (!res.ok && res.status == 0) return res;
      if (res.status >= 300 && res.status < 400) {
        const auto next = resolve_url(*url, res.body);
        if (!next || next->host != domain)
          return {false, res.status, {}, "redirect leaves the main domain"};
        url = *next;
        continue;
      }
      if (res.status < 200 || res.status >= 300)
        return {false, res.status, {}, "HTTP status " + std::to_string(res.status)};
      res.ok = true;
      return res;
    }
    return {false, 0, {}, "too many redirects"};
  }

  std::size_t requests() const { return requests_; }

 private:
  void throttle() {
    if (last_start_) {
      const auto ready = *last_start_ + delay_;
      const auto now = std::chrono::steady_clock::now();
      if (now < ready) std::this_thread::sleep_for(ready - now);
    }
    last_start_ = std::chrono::steady_clock::now();
  }

  // Returns status and body; for a 3xx the body holds the Location header.
  static FetchResult get(const Url& url) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.scheme == "https") return {false, 0, {}, "https support not compiled in"};
#endif
    httplib::Client client(url.origin());
    client.set_follow_location(false);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Headers headers{{"User-Agent", kUserAgent}};
    auto res = client.Get(url.path_and_query(), headers);
    if (!res) return {false, 0, {}, httplib::to_string(res.error())};
    FetchResult out;
    out.status = res->status;
    if (res->status >= 300 && res->status < 400) {
      out.body = res->get_header_value("Location");
    } else {
      out.body = std::move(res->body);
    }
    return out;
  }

  std::chrono::milliseconds delay_;
  std::optional<std::chrono::steady_clock::time_point> last_start_;
  std::size_t requests_ = 0;
};

// ---------------------------------------------------------------------------
// Manifest

inline constexpr int kManifestVersion = 1;

inline nlohmann::json manifest_to_json(const MirrorSnapshot& snap, std::string_view root_ref) {
  nlohmann::json pages = nlohmann::json::array();
  for (const auto& p : snap.pages) {
    pages.push_back({{"path", p.path},
                     {"kind", to_string(p.kind)},
                     {"outlinks", p.outlinks},
                     {"raw_size", p.raw_size}});
  }
  return {{"schema_version", kManifestVersion},
          {"kind", to_string(snap.kind)},
          {"root", root_ref},
          {"pages", std::move(pages)}};
}

// Writes the manifest. `root_ref` is stored verbatim; a relative value is
// interpreted relative to the manifest's own directory when read back.
inline void write_manifest(const MirrorSnapshot& snap, const fs::path& manifest_path,
                           std::string_view root_ref) {
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  write_text_file(manifest_path, manifest_to_json(snap, root_ref).dump(2) + "\n");
}

inline MirrorSnapshot read_manifest(const fs::path& manifest_path) {
  const auto doc = parse_json_file(manifest_path);
  const auto where = manifest_path.string();
  try {
    expect_schema(doc, kManifestVersion, where);
    MirrorSnapshot snap;
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "web") snap.kind = SnapshotKind::web;
    else if (kind == "filesystem") snap.kind = SnapshotKind::filesystem;
    else throw FormatError(where + ": unknown snapshot kind '" + kind + "'");
    const fs::path root = doc.at("root").get<std::string>();
    snap.root = root.is_absolute() ? root : manifest_path.parent_path() / root;
    std::unordered_set<std::string> paths;
    const auto& pages = doc.at("pages");
    for (std::size_t i = 0; i < pages.size(); ++i) {
      const auto& p = pages.at(i);
      PageRecord rec;
      rec.path = p.at("path").get<std::string>();
      const auto pk = page_kind_from_string(p.at("kind").get<std::string>());
      if (!pk) throw FormatError(where + ": pages[" + std::to_string(i) + "].kind is invalid");
      rec.kind = *pk;
      rec.outlinks = p.at("outlinks").get<std::vector<std::string>>();
      rec.raw_size = p.at("raw_size").get<std::uint64_t>();
      if (!paths.insert(rec.path).second)
        throw FormatError(where + ": duplicate page path '" + rec.path + "'");
      snap.pages.push_back(std::move(rec));
    }
    if (snap.pages.empty()) throw FormatError(where + ": snapshot has no pages");
    return snap;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Crawling

// Depth-first crawl from cfg.base_url, outlinks followed in document order.
// `fetch` is any callable (std::string_view url) -> FetchResult. Each unique
// URL is fetched at most once. A page first reached by a long path and later
// by a shorter one has its links re-expanded from the shorter depth, so every
// page within max_depth hops of the base is reached. Pages are mirrored under
// cfg.output_root and the manifest is written to <output_root>/<host>/manifest.json.
template <typename Fetch>
MirrorSnapshot crawl(const CrawlConfig& cfg, Fetch&& fetch) {
  cfg.validate();
  const Url base = *parse_url(cfg.base_url);
  const std::string domain = base.host;

  struct Pending {
    std::string url;
    std::size_t depth;
  };
  std::vector<Pending> stack{{base.str(), 0}};
  std::unordered_map<std::string, std::size_t> best_depth;  // every URL taken off the stack
  std::vector<std::pair<PageRecord, std::vector<std::string>>> fetched;  // record, outlink URLs
  std::unordered_map<std::string, std::size_t> fetched_index;
  const auto expand = [&](const std::vector<std::string>& links, std::size_t depth) {
    if (depth >= cfg.max_depth) return;
    for (auto it = links.rbegin(); it != links.rend(); ++it) {
      const auto seen = best_depth.find(*it);
      if (seen == best_depth.end() || seen->second > depth + 1) stack.push_back({*it, depth + 1});
    }
  };

  MirrorSnapshot snap;
  snap.kind = SnapshotKind::web;
  snap.root = cfg.output_root;

  while (!stack.empty() && fetched.size() < cfg.max_pages) {
    auto [url, depth] = std::move(stack.back());
    stack.pop_back();
    if (depth > cfg.max_depth) continue;
    if (const auto seen = best_depth.find(url); seen != best_depth.end()) {
      if (seen->second <= depth) continue;
      seen->second = depth;
      if (const auto f = fetched_index.find(url); f != fetched_index.end()) expand(fetched[f->second].second, depth);
      continue;
    }
    best_depth.emplace(url, depth);

    FetchResult res = fetch(std::string_view(url));
    if (!res.ok) {
      if (url == base.str())
        throw FetchError("base URL unreachable: " + url + " (" + res.error + ")");
      ++snap.skipped;
      continue;
    }
    auto links = extract_links(res.body, url, domain);
    PageRecord rec;
    rec.path = url_to_path(url);
    rec.kind = PageKind::page;
    rec.raw_size = res.body.size();
    write_text_file(cfg.output_root / rec.path, res.body);
    expand(links, depth);
    fetched_index.emplace(url, fetched.size());
    fetched.emplace_back(std::move(rec), std::move(links));
  }

  std::unordered_map<std::string, std::string> path_of;
  for (const auto& [rec, links] : fetched) path_of.emplace(rec.path, rec.path);
  for (auto& [rec, links] : fetched) {
    std::unordered_set<std::string> seen;
    for (const auto& link : links) {
      const auto target = url_to_path(link);
      if (target == rec.path || !path_of.contains(target)) continue;
      if (seen.insert(target).second) rec.outlinks.push_back(target);
    }
    snap.pages.push_back(std::move(rec));
  }

  write_manifest(snap, cfg.output_root / host_directory(base) / "manifest.json", "..");
  return snap;
}

inline MirrorSnapshot crawl(const CrawlConfig& cfg) {
  PageFetcher fetcher(cfg.request_delay);
  return crawl(cfg, [&](std::string_view url) { return fetcher.fetch(url); });
}

// ---------------------------------------------------------------------------
// File-system scan

// One record per directory and regular file under `root`, depth-first with
// children in byte order of their names. A directory's outlinks are its
// immediate children. Paths start with root's own name. Symlinked
// directories are not followed; unreadable entries are counted in `skipped`.
inline MirrorSnapshot scan_filesystem(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw UsageError("not a directory: " + root.string());
  const fs::path canon = fs::canonical(root);
  std::string top = canon.filename().string();
  if (top.empty()) top = "root";

  MirrorSnapshot snap;
  snap.kind = SnapshotKind::filesystem;
  snap.root = canon.parent_path();

  std::function<void(const fs::path&, const std::string&)> visit = [&](const fs::path& dir,
                                                                       const std::string& rel) {
    const std::size_t index = snap.pages.size();
    snap.pages.push_back({rel, PageKind::directory, {}, 0});

    std::vector<fs::directory_entry> entries;
    std::error_code it_ec;
    fs::directory_iterator it(dir, it_ec);
    if (it_ec) {
      ++snap.skipped;
      return;
    }
    for (; it != fs::directory_iterator(); it.increment(it_ec)) {
      if (it_ec) {
        ++snap.skipped;
        break;
      }
      entries.push_back(*it);
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.path().filename().string() < b.path().filename().string();
    });
    for (const auto& entry : entries) {
      const std::string child = rel + "/" + entry.path().filename().string();
      std::error_code st_ec;
      const bool symlink = entry.is_symlink(st_ec);
      if (entry.is_directory(st_ec) && !symlink) {
        snap.pages[index].outlinks.push_back(child);
        visit(entry.path(), child);
      } else if (entry.is_regular_file(st_ec)) {
        const auto size = entry.file_size(st_ec);
        if (st_ec) {
          ++snap.skipped;
          continue;
        }
        snap.pages[index].outlinks.push_back(child);
        snap.pages.push_back({child, PageKind::file, {}, size});
      } else {
        ++snap.skipped;
      }
    }
  };
  visit(canon, top);
  return snap;
}

}  // namespace gnnpf
