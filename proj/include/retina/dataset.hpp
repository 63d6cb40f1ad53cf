#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "retina/raster.hpp"

namespace retina {

// Paths are kept as written; relative ones resolve against the manifest root.
struct DatasetEntry {
  std::string id;
  std::string image;
  std::optional<std::string> mask;
  std::map<std::string, std::string> gt;  // labeler key -> path
  std::vector<std::string> tags;

  bool has_tag(const std::string& tag) const;
  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

struct DatasetManifest {
  std::filesystem::path source;  // file the manifest was read from
  std::string root;              // as written; empty means the manifest dir
  std::vector<DatasetEntry> entries;

  std::filesystem::path base_dir() const;
  std::filesystem::path resolve(const std::string& path) const;
  const DatasetEntry& entry(const std::string& id) const;
};

// Parses manifest text. `source` anchors relative paths.
DatasetManifest parse_manifest(const std::string& text,
                               const std::filesystem::path& source = {});
// Parses and validates: unique ids, at least one entry, every referenced file
// present (the error lists every offending id).
DatasetManifest load_manifest(const std::filesystem::path& path);
void validate_files(const DatasetManifest& manifest);

std::string serialize_manifest(const DatasetManifest& manifest);

// Entries carrying `tag`, in manifest order.
DatasetManifest subset(const DatasetManifest& manifest, const std::string& tag);

// Ground truth for `id` under `labeler`, binarized (nonzero -> 1) and checked
// against the image dimensions.
BinaryMask resolve_gt(const DatasetManifest& manifest, const std::string& id,
                      const std::string& labeler);
// Dataset-supplied FOV mask, if the entry has one.
std::optional<BinaryMask> resolve_mask(const DatasetManifest& manifest,
                                       const std::string& id);

}  // namespace retina
