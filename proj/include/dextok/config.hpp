#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dextok/codebook.hpp"
#include "dextok/refiner.hpp"

namespace dextok::cfg {

/// Flat key/value tree with dotted keys, '#' comments, and `include <path>`
/// lines (relative to the including file). Later assignments win; CLI
/// overrides are applied after the file and therefore take precedence.
class ConfigTree {
 public:
  static ConfigTree load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> raw(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::int64_t get_i64(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  /// Rejects keys outside the schema with a field-level ConfigError.
  void ensure_known(const std::vector<std::string>& schema) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static void load_into(const std::string& path, ConfigTree& tree, int depth);
  std::map<std::string, std::string> values_;
};

/// Everything a command run needs: module parameters, paths, and the seed.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string simd = "auto";  // auto | scalar | avx2
  std::string out_dir = "out";

  // io paths (empty = not provided)
  std::string hand, cloud, gen, target, extrinsics;
  std::string keypoints, retarget_spec, init;
  std::string dataset, dataset_ref, dataset_new, archive;
  std::string pred, gt, pred_pose, gt_pose, real_set, gen_set;

  refine::RefinementConfig refine;

  // vq
  int vq_codes = 256;
  int vq_latent = 32;
  vq::PoseChunkSpec chunk;  // dof filled from data
  std::vector<int> vq_hidden = {128, 128};
  std::string vq_activation = "tanh";
  vq::TrainConfig train;
  std::string vq_net_name = "new";

  // noise study
  std::vector<double> noise_sigmas = {0.0, 0.001, 0.002};
  int noise_seeds = 20;

  // normals utility
  int normals_k = 16;
  std::string normals_ref = "centroid";  // or "x,y,z"

  std::optional<double> diversity_ref;

  static const std::vector<std::string>& schema();
  static RunConfig from_tree(const ConfigTree& tree);
};

}  // namespace dextok::cfg
