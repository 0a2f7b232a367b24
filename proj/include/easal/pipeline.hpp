#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "easal/net.hpp"
#include "easal/rbd.hpp"

namespace easal {

inline constexpr const char* kToolVersion = "easal 1.0";

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

struct SynthConfig {
  int count = 200;
  int size = 64;
};

struct RunConfig {
  std::filesystem::path dataset_root = "data";
  std::string images_subdir = "images";
  std::string masks_subdir = "masks";
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  RbdParams rbd;
  WidthPlan plan;
  TrainConfig train;
  SynthConfig synth;
};

RunConfig load_config(const std::filesystem::path& path);
// Canonical serialization (documented keys); also what gets hashed.
std::string config_to_json(const RunConfig& cfg);
// FNV-1a hash of the canonical serialization, as hex.
std::string config_hash(const RunConfig& cfg);

struct DatasetIndex {
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs;  // (image, mask)
  std::vector<std::filesystem::path> unmatched;
};

// Pairs files by identical stem across the two directories. Unmatched
// files are reported, never silently dropped.
DatasetIndex index_dataset(const std::filesystem::path& images_dir, const std::filesystem::path& masks_dir);

int cmd_synth(const RunConfig& cfg, std::ostream& log);
int cmd_relabel(const RunConfig& cfg, std::ostream& log);
int cmd_rbd(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_infer(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
             std::ostream& log);
int cmd_export_pr(const RunConfig& cfg, const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                  std::ostream& log);

}  // namespace easal
