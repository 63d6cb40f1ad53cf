#include "retina/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "retina/error.hpp"

namespace retina {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void parse_error(int line, const std::string& msg) {
  throw Error(ErrorKind::format,
              "manifest line " + std::to_string(line) + ": " + msg);
}

// Splits on whitespace; double quotes group, backslash escapes " and \.
std::vector<std::string> tokenize(const std::string& line, int lineno) {
  std::vector<std::string> tokens;
  std::string cur;
  bool in_token = false;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '\\' && i + 1 < line.size()) {
        cur += line[++i];
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
      continue;
    }
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r') {
      if (in_token) tokens.push_back(std::move(cur));
      cur.clear();
      in_token = false;
      continue;
    }
    in_token = true;
    if (c == '"') {
      quoted = true;
    } else {
      cur += c;
    }
  }
  if (quoted) parse_error(lineno, "unterminated quote");
  if (in_token) tokens.push_back(std::move(cur));
  return tokens;
}

std::string quote_if_needed(const std::string& v) {
  const bool plain =
      !v.empty() && v.find_first_of(" \t\"#\\") == std::string::npos;
  if (plain) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_tags(const std::string& v) {
  std::vector<std::string> tags;
  std::stringstream ss(v);
  std::string t;
  while (std::getline(ss, t, ',')) {
    if (!t.empty()) tags.push_back(t);
  }
  return tags;
}

}  // namespace

bool DatasetEntry::has_tag(const std::string& tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

fs::path DatasetManifest::base_dir() const {
  const fs::path dir = source.has_parent_path() ? source.parent_path() : ".";
  if (root.empty()) return dir;
  const fs::path r(root);
  return r.is_absolute() ? r : dir / r;
}

fs::path DatasetManifest::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p : base_dir() / p;
}

const DatasetEntry& DatasetManifest::entry(const std::string& id) const {
  for (const DatasetEntry& e : entries) {
    if (e.id == id) return e;
  }
  throw Error(ErrorKind::contract, "manifest: unknown id '" + id + "'");
}

DatasetManifest parse_manifest(const std::string& text, const fs::path& source) {
  DatasetManifest m;
  m.source = source;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::vector<std::string> tokens = tokenize(line, lineno);
    if (tokens.empty()) continue;
    auto split_kv = [&](const std::string& tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) {
        parse_error(lineno, "expected key=value, got '" + tok + "'");
      }
      return std::pair{tok.substr(0, eq), tok.substr(eq + 1)};
    };
    if (tokens[0] != "entry") {
      const auto [key, value] = split_kv(tokens[0]);
      if (key != "root" || tokens.size() != 1) {
        parse_error(lineno, "expected 'root=<dir>' or an 'entry' record");
      }
      m.root = value;
      continue;
    }
    DatasetEntry e;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      const auto [key, value] = split_kv(tokens[i]);
      if (key == "id") {
        e.id = value;
      } else if (key == "image") {
        e.image = value;
      } else if (key == "mask") {
        e.mask = value;
      } else if (key.rfind("gt.", 0) == 0 && key.size() > 3) {
        e.gt[key.substr(3)] = value;
      } else if (key == "tags") {
        e.tags = split_tags(value);
      } else {
        parse_error(lineno, "unknown key '" + key + "'");
      }
    }
    if (e.id.empty()) parse_error(lineno, "entry without id");
    if (e.image.empty()) parse_error(lineno, "entry '" + e.id + "' without image");
    if (!ids.insert(e.id).second) {
      parse_error(lineno, "duplicate id '" + e.id + "'");
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) {
    throw Error(ErrorKind::degenerate, "manifest has no entries");
  }
  return m;
}

void validate_files(const DatasetManifest& m) {
  std::string missing;
  for (const DatasetEntry& e : m.entries) {
    std::vector<std::string> paths{e.image};
    if (e.mask) paths.push_back(*e.mask);
    for (const auto& [key, p] : e.gt) paths.push_back(p);
    for (const std::string& p : paths) {
      std::error_code ec;
      if (!fs::is_regular_file(m.resolve(p), ec)) {
        missing += "\n  " + e.id + ": " + m.resolve(p).string();
      }
    }
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::io, "manifest references missing files:" + missing);
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  DatasetManifest m = parse_manifest(ss.str(), path);
  validate_files(m);
  return m;
}

std::string serialize_manifest(const DatasetManifest& m) {
  std::string out;
  if (!m.root.empty()) out += "root=" + quote_if_needed(m.root) + "\n";
  for (const DatasetEntry& e : m.entries) {
    out += "entry id=" + quote_if_needed(e.id) +
           " image=" + quote_if_needed(e.image);
    if (e.mask) out += " mask=" + quote_if_needed(*e.mask);
    for (const auto& [key, p] : e.gt) {
      out += " gt." + key + "=" + quote_if_needed(p);
    }
    if (!e.tags.empty()) {
      std::string joined;
      for (const std::string& t : e.tags) {
        if (!joined.empty()) joined += ',';
        joined += t;
      }
      out += " tags=" + quote_if_needed(joined);
    }
    out += '\n';
  }
  return out;
}

DatasetManifest subset(const DatasetManifest& m, const std::string& tag) {
  DatasetManifest out;
  out.source = m.source;
  out.root = m.root;
  for (const DatasetEntry& e : m.entries) {
    if (e.has_tag(tag)) out.entries.push_back(e);
  }
  return out;
}

BinaryMask resolve_gt(const DatasetManifest& m, const std::string& id,
                      const std::string& labeler) {
  const DatasetEntry& e = m.entry(id);
  const auto it = e.gt.find(labeler);
  if (it == e.gt.end()) {
    throw Error(ErrorKind::contract, "manifest: entry '" + id +
                                         "' has no ground truth '" + labeler +
                                         "'");
  }
  BinaryMask gt = load_mask(m.resolve(it->second));
  const RgbImage img = load_rgb(m.resolve(e.image));
  if (gt.width() != img.width || gt.height() != img.height) {
    throw Error(ErrorKind::contract,
                "ground truth '" + labeler + "' for '" + id + "' is " +
                    shape_string(gt.width(), gt.height()) + ", image is " +
                    shape_string(img.width, img.height));
  }
  return gt;
}

std::optional<BinaryMask> resolve_mask(const DatasetManifest& m,
                                       const std::string& id) {
  const DatasetEntry& e = m.entry(id);
  if (!e.mask) return std::nullopt;
  return load_mask(m.resolve(*e.mask));
}

}  // namespace retina
