#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmcl/aggregation.hpp"
#include "dmcl/dataset.hpp"
#include "dmcl/trainer.hpp"

namespace dmcl {

using Bytes = std::vector<std::uint8_t>;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Feature file: "FMV1", u32 LE H, W, C, then H*W*C f32 LE in (h, w, c) order.
Bytes encode_feature_map(const FeatureMap& fm);
FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes);
void save_feature_map(const std::filesystem::path& path, const FeatureMap& fm);
FeatureMap load_feature_map(const std::filesystem::path& path);

// Manifest: UTF-8 TSV with header item_id, class_id, split, is_query, feature_path.
std::string encode_manifest(const DatasetManifest& m);
DatasetManifest decode_manifest(const std::string& text);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Loads the manifest and every feature file (paths relative to the manifest).
Dataset load_dataset(const std::filesystem::path& manifest_path);
/// Writes manifest.tsv and all feature files under `dir`.
void save_dataset(const std::filesystem::path& dir, const Dataset& d);

// Checkpoint: magic "DMCLCKPT", u32 version, header fields, f64 LE payload of
// parameters then optimizer velocity, trailing u64 FNV-1a of the payload bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;
Bytes encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dmcl
