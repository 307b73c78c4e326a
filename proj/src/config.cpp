#include "dextok/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dextok/common.hpp"

namespace dextok::cfg {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError("config: key '" + key + "': cannot parse '" + value + "' as " + expected);
}

}  // namespace

ConfigTree ConfigTree::load(const std::string& path) {
  ConfigTree tree;
  load_into(path, tree, 0);
  return tree;
}

void ConfigTree::load_into(const std::string& path, ConfigTree& tree, int depth) {
  if (depth > 16) throw ConfigError("config: include depth exceeds 16 ('" + path + "')");
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;

    if (text.rfind("include", 0) == 0 &&
        (text.size() == 7 || text[7] == ' ' || text[7] == '\t')) {
      const std::string inc = trim(text.substr(7));
      if (inc.empty())
        throw ConfigError("config: " + path + ":" + std::to_string(line_no) +
                          ": include needs a path");
      const std::filesystem::path resolved =
          std::filesystem::path(path).parent_path() / inc;
      load_into(resolved.string(), tree, depth + 1);
      continue;
    }

    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: " + path + ":" + std::to_string(line_no) + ": empty key");
    tree.values_[key] = value;
  }
}

void ConfigTree::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::optional<std::string> ConfigTree::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigTree::get_string(const std::string& key, const std::string& fallback) const {
  auto v = raw(key);
  return v ? *v : fallback;
}

double ConfigTree::get_double(const std::string& key, double fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(*v, &used);
  } catch (...) {
    bad_value(key, *v, "a number");
  }
  if (used != v->size()) bad_value(key, *v, "a number");
  return out;
}

int ConfigTree::get_int(const std::string& key, int fallback) const {
  const std::int64_t v = get_i64(key, fallback);
  if (v < INT32_MIN || v > INT32_MAX) bad_value(key, *raw(key), "a 32-bit integer");
  return static_cast<int>(v);
}

std::int64_t ConfigTree::get_i64(const std::string& key, std::int64_t fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::size_t used = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(*v, &used);
  } catch (...) {
    bad_value(key, *v, "an integer");
  }
  if (used != v->size()) bad_value(key, *v, "an integer");
  return out;
}

std::uint64_t ConfigTree::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(*v, &used);
  } catch (...) {
    bad_value(key, *v, "an unsigned integer");
  }
  if (used != v->size()) bad_value(key, *v, "an unsigned integer");
  return out;
}

bool ConfigTree::get_bool(const std::string& key, bool fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "off") return false;
  bad_value(key, *v, "a boolean (true/false)");
}

std::vector<double> ConfigTree::get_double_list(const std::string& key,
                                                const std::vector<double>& fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::vector<double> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) bad_value(key, *v, "a comma-separated number list");
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      bad_value(key, *v, "a comma-separated number list");
    }
  }
  if (out.empty()) bad_value(key, *v, "a comma-separated number list");
  return out;
}

std::vector<int> ConfigTree::get_int_list(const std::string& key,
                                          const std::vector<int>& fallback) const {
  const std::vector<double> d =
      get_double_list(key, std::vector<double>(fallback.begin(), fallback.end()));
  std::vector<int> out;
  for (double v : d) {
    if (v != static_cast<int>(v)) bad_value(key, *raw(key), "a comma-separated integer list");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void ConfigTree::ensure_known(const std::vector<std::string>& schema) const {
  for (const auto& [key, value] : values_) {
    if (std::find(schema.begin(), schema.end(), key) == schema.end())
      throw ConfigError("config: unknown key '" + key + "'");
  }
}

const std::vector<std::string>& RunConfig::schema() {
  static const std::vector<std::string> keys = {
      "seed", "threads", "simd", "out.dir",
      "io.hand", "io.cloud", "io.gen", "io.target", "io.extrinsics",
      "io.keypoints", "io.retarget_spec", "io.init",
      "io.dataset", "io.dataset_ref", "io.dataset_new", "io.archive",
      "io.pred", "io.gt", "io.pred_pose", "io.gt_pose", "io.real", "io.gen_set",
      "refine.alpha", "refine.k", "refine.lambda_c", "refine.epsilon",
      "refine.kernel", "refine.delta",
      "refine.w_gen", "refine.w_vel", "refine.w_acc", "refine.clamp",
      "solver.lambda_init", "solver.lambda_up", "solver.lambda_down",
      "solver.max_inner_iters", "solver.step_tol", "solver.energy_tol",
      "vq.codes", "vq.latent", "vq.window", "vq.stride", "vq.hidden",
      "vq.activation", "vq.beta", "vq.lr", "vq.epochs", "vq.refresh_every",
      "vq.tau_c", "vq.lambda_distill", "vq.buffer_cap", "vq.init_scale",
      "vq.codebook_init_scale", "vq.shuffle", "vq.stage1_epochs",
      "vq.stage2_epochs", "vq.update_codebook_stage2", "vq.net_name",
      "noise.sigmas", "noise.seeds",
      "normals.k", "normals.ref",
      "metrics.diversity_ref",
  };
  return keys;
}

RunConfig RunConfig::from_tree(const ConfigTree& tree) {
  tree.ensure_known(schema());

  RunConfig rc;
  rc.seed = tree.get_u64("seed", 0);
  rc.threads = tree.get_int("threads", 1);
  rc.simd = tree.get_string("simd", "auto");
  rc.out_dir = tree.get_string("out.dir", "out");

  rc.hand = tree.get_string("io.hand", "");
  rc.cloud = tree.get_string("io.cloud", "");
  rc.gen = tree.get_string("io.gen", "");
  rc.target = tree.get_string("io.target", "");
  rc.extrinsics = tree.get_string("io.extrinsics", "");
  rc.keypoints = tree.get_string("io.keypoints", "");
  rc.retarget_spec = tree.get_string("io.retarget_spec", "");
  rc.init = tree.get_string("io.init", "");
  rc.dataset = tree.get_string("io.dataset", "");
  rc.dataset_ref = tree.get_string("io.dataset_ref", "");
  rc.dataset_new = tree.get_string("io.dataset_new", "");
  rc.archive = tree.get_string("io.archive", "");
  rc.pred = tree.get_string("io.pred", "");
  rc.gt = tree.get_string("io.gt", "");
  rc.pred_pose = tree.get_string("io.pred_pose", "");
  rc.gt_pose = tree.get_string("io.gt_pose", "");
  rc.real_set = tree.get_string("io.real", "");
  rc.gen_set = tree.get_string("io.gen_set", "");

  rc.refine.kernel.alpha = tree.get_double("refine.alpha", 1.0);
  rc.refine.kernel.k = tree.get_double("refine.k", 1.0);
  rc.refine.kernel.lambda_c = tree.get_double("refine.lambda_c", 100.0);
  rc.refine.kernel.epsilon = tree.get_double("refine.epsilon", 1e-8);
  rc.refine.kernel.delta = tree.get_double("refine.delta", 1e-6);
  const std::string kernel = tree.get_string("refine.kernel", "quad_exp");
  if (kernel == "quad_exp")
    rc.refine.kernel.kind = energy::KernelKind::quad_exp;
  else if (kernel == "smoothed_abs")
    rc.refine.kernel.kind = energy::KernelKind::smoothed_abs;
  else
    throw ConfigError("config: key 'refine.kernel': expected quad_exp or smoothed_abs");
  rc.refine.w_gen = tree.get_double("refine.w_gen", 1.0);
  rc.refine.w_vel = tree.get_double("refine.w_vel", 0.5);
  rc.refine.w_acc = tree.get_double("refine.w_acc", 0.25);
  rc.refine.clamp_to_limits = tree.get_bool("refine.clamp", true);
  rc.refine.lambda_init = tree.get_double("solver.lambda_init", 1e-3);
  rc.refine.lambda_up = tree.get_double("solver.lambda_up", 10.0);
  rc.refine.lambda_down = tree.get_double("solver.lambda_down", 0.5);
  rc.refine.max_inner_iters = tree.get_int("solver.max_inner_iters", 50);
  rc.refine.step_tol = tree.get_double("solver.step_tol", 1e-6);
  rc.refine.energy_tol = tree.get_double("solver.energy_tol", 1e-9);

  rc.vq_codes = tree.get_int("vq.codes", 256);
  rc.vq_latent = tree.get_int("vq.latent", 32);
  rc.chunk.window = tree.get_int("vq.window", 8);
  rc.chunk.stride = tree.get_int("vq.stride", 4);
  rc.vq_hidden = tree.get_int_list("vq.hidden", {128, 128});
  rc.vq_activation = tree.get_string("vq.activation", "tanh");
  rc.train.beta = tree.get_double("vq.beta", 0.25);
  rc.train.learning_rate = tree.get_double("vq.lr", 1e-4);
  rc.train.epochs = tree.get_int("vq.epochs", 200);
  rc.train.refresh_every = tree.get_int("vq.refresh_every", 50);
  rc.train.tau_c = tree.get_i64("vq.tau_c", 1);
  rc.train.lambda_distill = tree.get_double("vq.lambda_distill", 0.1);
  rc.train.buffer_cap = tree.get_int("vq.buffer_cap", 65536);
  rc.train.init_scale = tree.get_double("vq.init_scale", 1.0);
  rc.train.codebook_init_scale = tree.get_double("vq.codebook_init_scale", 0.05);
  rc.train.shuffle = tree.get_bool("vq.shuffle", true);
  rc.train.stage1_epochs = tree.get_int("vq.stage1_epochs", 150);
  rc.train.stage2_epochs = tree.get_int("vq.stage2_epochs", 150);
  rc.train.update_codebook_stage2 = tree.get_bool("vq.update_codebook_stage2", true);
  rc.train.seed = rc.seed;
  rc.vq_net_name = tree.get_string("vq.net_name", "new");

  rc.noise_sigmas = tree.get_double_list("noise.sigmas", {0.0, 0.001, 0.002});
  rc.noise_seeds = tree.get_int("noise.seeds", 20);

  rc.normals_k = tree.get_int("normals.k", 16);
  rc.normals_ref = tree.get_string("normals.ref", "centroid");

  if (tree.has("metrics.diversity_ref"))
    rc.diversity_ref = tree.get_double("metrics.diversity_ref", 0.0);

  return rc;
}

}  // namespace dextok::cfg
