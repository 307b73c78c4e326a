#include "dextok/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dextok/common.hpp"
#include "dextok/config.hpp"
#include "dextok/fixtures.hpp"
#include "dextok/io.hpp"
#include "dextok/metrics.hpp"
#include "dextok/refiner.hpp"
#include "dextok/retarget.hpp"
#include "dextok/simd.hpp"

namespace dextok::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::string out_dir;
  std::string seed;
  std::string threads;
  std::string simd;
  bool dry_run = false;
};

void add_global_flags(CLI::App* cmd, GlobalArgs& g) {
  cmd->add_option("--config", g.config_path, "configuration file (key = value tree)");
  cmd->add_option("--set", g.overrides, "override a config key, e.g. --set refine.lambda_c=50");
  cmd->add_option("--out-dir", g.out_dir, "output directory");
  cmd->add_option("--seed", g.seed, "global random seed");
  cmd->add_option("--threads", g.threads, "worker threads (outputs are identical regardless)");
  cmd->add_option("--simd", g.simd, "kernel variant: auto, scalar, or avx2");
  cmd->add_flag("--dry-run", g.dry_run, "validate inputs and exit without running");
}

cfg::RunConfig build_config(const GlobalArgs& g,
                            const std::vector<std::pair<std::string, std::string>>& extra) {
  cfg::ConfigTree tree;
  if (!g.config_path.empty()) tree = cfg::ConfigTree::load(g.config_path);
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    tree.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : extra)
    if (!v.empty()) tree.set(k, v);
  if (!g.out_dir.empty()) tree.set("out.dir", g.out_dir);
  if (!g.seed.empty()) tree.set("seed", g.seed);
  if (!g.threads.empty()) tree.set("threads", g.threads);
  if (!g.simd.empty()) tree.set("simd", g.simd);

  cfg::RunConfig rc = cfg::RunConfig::from_tree(tree);
  if (rc.threads < 1) throw ConfigError("config: threads must be >= 1");
  if (rc.simd == "scalar")
    simd::force_level(simd::Level::scalar);
  else if (rc.simd == "avx2")
    simd::force_level(simd::Level::avx2);
  else if (rc.simd == "auto")
    simd::force_level(simd::detected_level());
  else
    throw ConfigError("config: simd must be auto, scalar, or avx2");
  return rc;
}

std::uint64_t fnv_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("metrics: cannot read archive '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return fixtures::fnv1a64(ss.str());
}

void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("config: missing required path '") + key + "'");
  if (!fs::exists(value))
    throw DataError(std::string(key) + ": file '" + value + "' does not exist");
}

std::ofstream open_report(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

json step_to_json(const refine::StepRecord& s) {
  return json{{"it", s.iteration},          {"e0", s.energy_before}, {"e1", s.energy_after},
              {"lambda", s.lambda},         {"step", s.step_norm},   {"accepted", s.accepted}};
}

void write_trace(const fs::path& path, const refine::RefinementTrace& trace) {
  std::ofstream out = open_report(path);
  for (std::size_t t = 0; t < trace.size(); ++t) {
    json line;
    line["frame"] = t;
    json steps = json::array();
    for (const auto& s : trace[t].steps) steps.push_back(step_to_json(s));
    line["steps"] = steps;
    json dists = json::array();
    for (Eigen::Index i = 0; i < trace[t].final_distances.size(); ++i)
      dists.push_back(trace[t].final_distances[i]);
    line["final_distances"] = dists;
    out << line.dump() << "\n";
  }
}

void write_history(const fs::path& path, const std::vector<vq::EpochRecord>& history) {
  std::ofstream out = open_report(path);
  for (const auto& row : history) {
    json line{{"epoch", row.epoch}, {"rec", row.rec},         {"vq", row.vq},
              {"commit", row.commit}, {"distill", row.distill}, {"total", row.total}};
    if (row.refreshed_cold >= 0) line["refreshed_cold"] = row.refreshed_cold;
    out << line.dump() << "\n";
  }
}

geom::TargetPoseTrajectory load_target(const cfg::RunConfig& rc) {
  geom::TargetPoseTrajectory traj = io::load_pose_trajectory(rc.target);
  if (!rc.extrinsics.empty()) {
    const geom::TargetPoseTrajectory ext = io::load_pose_trajectory(rc.extrinsics);
    if (ext.frames.size() != 1)
      throw DataError("extrinsics: expected a single-frame pose file");
    traj = geom::to_world_trajectory(ext.frames.front(), traj);
  }
  return traj;
}

int cmd_refine(const GlobalArgs& g,
               const std::vector<std::pair<std::string, std::string>>& extra) {
  const cfg::RunConfig rc = build_config(g, extra);
  require_path(rc.hand, "io.hand");
  require_path(rc.cloud, "io.cloud");
  require_path(rc.gen, "io.gen");
  require_path(rc.target, "io.target");

  const hand::KinematicChain chain = hand::load_chain(rc.hand);
  cloud::OrientedPointCloud object_cloud = io::load_cloud(rc.cloud);
  if (object_cloud.normals.empty())
    throw DataError("io.cloud: '" + rc.cloud +
                    "' carries no normals; run the normals subcommand first");
  object_cloud.validate();
  double rate = 0.0;
  const hand::HandTrajectory gen = io::load_hand_trajectory(rc.gen, &rate);
  const geom::TargetPoseTrajectory target = load_target(rc);
  rc.refine.validate();

  if (g.dry_run) {
    if (gen.frames.size() != target.frames.size())
      throw DataError("io.gen and io.target frame counts differ");
    if (gen.frames.front().size() != chain.dof())
      throw DataError("io.gen dof does not match io.hand");
    std::cout << "refine: inputs ok (" << gen.frames.size() << " frames, dof " << chain.dof()
              << ", " << object_cloud.size() << " points)\n";
    return 0;
  }

  fs::create_directories(rc.out_dir);
  refine::SequenceResult result;
  try {
    result = refine::refine_sequence(gen, object_cloud, target, chain, rc.refine);
  } catch (const refine::RefineAbort& e) {
    write_trace(fs::path(rc.out_dir) / "trace.jsonl", e.trace);
    if (!e.partial.frames.empty())
      io::save_hand_trajectory((fs::path(rc.out_dir) / "refined_partial.qtraj").string(),
                               e.partial, 0.0);
    throw;  // rethrown as NumericalError for the exit code
  }

  io::save_hand_trajectory((fs::path(rc.out_dir) / "refined.qtraj").string(), result.refined,
                           rate);
  write_trace(fs::path(rc.out_dir) / "trace.jsonl", result.trace);

  double max_abs_d = 0.0;
  for (const auto& frame : result.trace)
    for (Eigen::Index i = 0; i < frame.final_distances.size(); ++i)
      max_abs_d = std::max(max_abs_d, std::abs(frame.final_distances[i]));
  std::cout << "refine: " << result.refined.frames.size() << " frames, max |distance| "
            << io::fmt_double(max_abs_d) << " m\n";
  return 0;
}

int cmd_retarget(const GlobalArgs& g,
                 const std::vector<std::pair<std::string, std::string>>& extra) {
  const cfg::RunConfig rc = build_config(g, extra);
  require_path(rc.hand, "io.hand");
  require_path(rc.keypoints, "io.keypoints");
  require_path(rc.retarget_spec, "io.retarget_spec");

  const hand::KinematicChain chain = hand::load_chain(rc.hand);
  const io::KeypointFile kf = io::load_keypoints(rc.keypoints);
  const retarget::RetargetSpec spec = io::load_retarget_spec(rc.retarget_spec, &chain);
  spec.validate(chain);

  if (g.dry_run) {
    std::cout << "retarget: inputs ok (" << kf.frames.size() << " frames, "
              << spec.correspondences.size() << " correspondences)\n";
    return 0;
  }

  hand::HandConfiguration q_init = Eigen::VectorXd::Zero(chain.dof());
  if (!rc.init.empty()) {
    require_path(rc.init, "io.init");
    const hand::HandTrajectory rest = io::load_hand_trajectory(rc.init);
    if (rest.frames.front().size() != chain.dof())
      throw DataError("io.init: dof does not match io.hand");
    q_init = rest.frames.front();
  }
  q_init = hand::clamp_to_limits(chain, q_init);
  const hand::HandTrajectory out =
      retarget::retarget_sequence(kf.frames, chain, spec, rc.refine, q_init);

  fs::create_directories(rc.out_dir);
  io::save_hand_trajectory((fs::path(rc.out_dir) / "retargeted.qtraj").string(), out, 0.0);
  std::cout << "retarget: " << out.frames.size() << " frames, dof " << chain.dof() << "\n";
  return 0;
}

std::vector<std::vector<double>> dataset_chunks(const std::string& path,
                                                vq::PoseChunkSpec& chunk) {
  int dof = 0;
  const auto sequences = io::load_pose_dataset(path, &dof);
  chunk.dof = dof;
  chunk.validate();
  std::vector<std::vector<double>> chunks;
  for (const auto& seq : sequences) {
    auto c = vq::chunk_trajectory(seq, chunk);
    chunks.insert(chunks.end(), c.begin(), c.end());
  }
  if (chunks.empty())
    throw DataError(path + ": no chunks (sequences shorter than the window?)");
  return chunks;
}

int cmd_vq_train_ref(const GlobalArgs& g,
                     const std::vector<std::pair<std::string, std::string>>& extra) {
  const cfg::RunConfig rc = build_config(g, extra);
  require_path(rc.dataset, "io.dataset");
  if (rc.archive.empty()) throw ConfigError("config: missing required path 'io.archive'");

  vq::PoseChunkSpec chunk = rc.chunk;
  const auto chunks = dataset_chunks(rc.dataset, chunk);

  if (g.dry_run) {
    std::cout << "vq train-ref: " << chunks.size() << " chunks of width " << chunk.chunk_dim()
              << "\n";
    return 0;
  }

  vq::NetArch arch;
  arch.hidden = rc.vq_hidden;
  arch.activation = vq::activation_from_name(rc.vq_activation);
  const vq::ReferenceModel model =
      vq::train_reference(chunks, chunk, rc.vq_codes, rc.vq_latent, arch, rc.train);

  io::Archive archive;
  archive.chunk = chunk;
  archive.codebook = model.codebook;
  archive.nets.emplace_back("enc:ref", model.encoder);
  archive.nets.emplace_back("dec:ref", model.decoder);
  fs::create_directories(fs::path(rc.archive).parent_path().empty()
                             ? "."
                             : fs::path(rc.archive).parent_path().string());
  io::save_archive(rc.archive, archive);

  fs::create_directories(rc.out_dir);
  write_history(fs::path(rc.out_dir) / "loss_history.jsonl", model.history);
  std::cout << "vq train-ref: final rec " << io::fmt_double(model.history.back().rec)
            << " (initial " << io::fmt_double(model.history.front().rec) << ")\n";
  return 0;
}

int cmd_vq_train_new(const GlobalArgs& g,
                     const std::vector<std::pair<std::string, std::string>>& extra) {
  const cfg::RunConfig rc = build_config(g, extra);
  require_path(rc.archive, "io.archive");
  require_path(rc.dataset_ref, "io.dataset_ref");
  require_path(rc.dataset_new, "io.dataset_new");

  io::Archive archive = io::load_archive(rc.archive);
  vq::PoseChunkSpec chunk_ref = archive.chunk;
  const auto chunks_ref = dataset_chunks(rc.dataset_ref, chunk_ref);
  vq::PoseChunkSpec chunk_new = archive.chunk;
  const auto chunks_new = dataset_chunks(rc.dataset_new, chunk_new);

  if (g.dry_run) {
    std::cout << "vq train-new: " << chunks_new.size() << " paired chunks\n";
    return 0;
  }

  const vq::CoderNet& ref_enc = archive.net("enc:ref");
  vq::NetArch arch;
  arch.hidden = rc.vq_hidden;
  arch.activation = vq::activation_from_name(rc.vq_activation);
  const vq::MorphologyModel model = vq::train_new_morphology(
      chunks_new, chunks_ref, ref_enc, archive.codebook, arch, rc.train);

  archive.nets.emplace_back("enc:" + rc.vq_net_name, model.encoder);
  archive.nets.emplace_back("dec:" + rc.vq_net_name, model.decoder);
  io::save_archive(rc.archive, archive);

  fs::create_directories(rc.out_dir);
  write_history(fs::path(rc.out_dir) / "loss_history_new.jsonl", model.history);
  std::cout << "vq train-new: net '" << rc.vq_net_name << "' added to " << rc.archive << "\n";
  return 0;
}

int cmd_vq_translate(const GlobalArgs& g,
                     const std::vector<std::pair<std::string, std::string>>& extra,
                     const std::string& from, const std::string& to) {
  const cfg::RunConfig rc = build_config(g, extra);
  require_path(rc.archive, "io.archive");
  require_path(rc.gen, "io.gen");

  const io::Archive archive = io::load_archive(rc.archive);
  const vq::CoderNet& enc = archive.net("enc:" + from);
  const vq::CoderNet& dec = archive.net("dec:" + to);

  const hand::HandTrajectory traj = io::load_hand_trajectory(rc.gen);
  vq::PoseChunkSpec chunk = archive.chunk;
  if (!traj.frames.empty() && traj.frames.front().size() != chunk.dof)
    throw DataError("io.gen: dof " + std::to_string(traj.frames.front().size()) +
                    " does not match archive chunk dof " + std::to_string(chunk.dof));
  const auto chunks = vq::chunk_trajectory(traj.frames, chunk);
  if (chunks.empty()) throw DataError("io.gen: shorter than one chunk window");

  if (g.dry_run) {
    std::cout << "vq translate: " << chunks.size() << " chunks " << from << " -> " << to << "\n";
    return 0;
  }

  const int dof_out = dec.output_dim() / chunk.window;
  std::vector<std::vector<Eigen::VectorXd>> out_sequences;
  for (const auto& c : chunks) {
    const std::vector<double> y = vq::translate(enc, dec, archive.codebook, c);
    std::vector<Eigen::VectorXd> seq;
    for (int t = 0; t < chunk.window; ++t) {
      Eigen::VectorXd q(dof_out);
      for (int d = 0; d < dof_out; ++d) q[d] = y[static_cast<std::size_t>(t) * dof_out + d];
      seq.push_back(std::move(q));
    }
    out_sequences.push_back(std::move(seq));
  }
  fs::create_directories(rc.out_dir);
  io::save_pose_dataset((fs::path(rc.out_dir) / "translated.pset").string(), out_sequences,
                        dof_out);
  std::cout << "vq translate: wrote " << out_sequences.size() << " chunks\n";
  return 0;
}

int cmd_vq_refresh_stats(const GlobalArgs& g, const std::string& history_path) {
  if (history_path.empty()) throw ConfigError("refresh-stats: --history is required");
  require_path(history_path, "--history");
  std::ifstream in(history_path);
  std::string line;
  std::vector<std::pair<int, int>> refreshes;  // (epoch, cold size)
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(history_path + ": bad history line: " + e.what());
    }
    if (row.contains("refreshed_cold"))
      refreshes.emplace_back(row["epoch"].get<int>(), row["refreshed_cold"].get<int>());
  }
  for (const auto& [epoch, cold] : refreshes)
    std::cout << "epoch " << epoch << ": cold set size " << cold << "\n";
  std::cout << "refreshes: " << refreshes.size() << "\n";

  if (!g.dry_run) {
    const std::string dir = g.out_dir.empty() ? "out" : g.out_dir;
    fs::create_directories(dir);
    std::ofstream out = open_report(fs::path(dir) / "refresh_stats.jsonl");
    for (const auto& [epoch, cold] : refreshes)
      out << json{{"epoch", epoch}, {"cold", cold}}.dump() << "\n";
  }
  return 0;
}

metrics::JointTrajectory joint_trajectory_from_qtraj(const hand::KinematicChain& chain,
                                                     const hand::HandTrajectory& traj) {
  metrics::JointTrajectory out;
  for (const auto& q : traj.frames) {
    const auto world = hand::forward_kinematics(chain, q);
    std::vector<Eigen::Vector3d> joints;
    joints.reserve(world.size());
    for (const auto& t : world) joints.push_back(t.translation());
    out.frames.push_back(std::move(joints));
  }
  return out;
}

int cmd_metrics(const GlobalArgs& g,
                const std::vector<std::pair<std::string, std::string>>& extra) {
  const cfg::RunConfig rc = build_config(g, extra);
  std::ofstream report;
  if (!g.dry_run) {
    fs::create_directories(rc.out_dir);
    report = open_report(fs::path(rc.out_dir) / "metrics.jsonl");
  }
  bool any = false;

  if (!rc.pred.empty() || !rc.gt.empty()) {
    require_path(rc.pred, "io.pred");
    require_path(rc.gt, "io.gt");
    require_path(rc.hand, "io.hand");
    const hand::KinematicChain chain = hand::load_chain(rc.hand);
    const auto pred = joint_trajectory_from_qtraj(chain, io::load_hand_trajectory(rc.pred));
    const auto gt = joint_trajectory_from_qtraj(chain, io::load_hand_trajectory(rc.gt));
    if (!g.dry_run) {
      const double value = metrics::mpjpe(pred, gt);
      report << json{{"metric", "mpjpe_mm"}, {"value", value}}.dump() << "\n";
    }
    any = true;
  }

  if (!rc.pred_pose.empty() || !rc.gt_pose.empty()) {
    require_path(rc.pred_pose, "io.pred_pose");
    require_path(rc.gt_pose, "io.gt_pose");
    const auto pred = io::load_pose_trajectory(rc.pred_pose);
    const auto gt = io::load_pose_trajectory(rc.gt_pose);
    if (!g.dry_run) {
      const double fpl_mm =
          metrics::fpl(pred.frames.back().translation(), gt.frames.back().translation());
      const double fol_deg =
          metrics::fol(pred.frames.back().rotation(), gt.frames.back().rotation());
      report << json{{"metric", "fpl_mm"}, {"value", fpl_mm}}.dump() << "\n";
      report << json{{"metric", "fol_deg"}, {"value", fol_deg}}.dump() << "\n";
    }
    any = true;
  }

  if (!rc.real_set.empty() || !rc.gen_set.empty()) {
    require_path(rc.real_set, "io.real");
    require_path(rc.gen_set, "io.gen_set");
    require_path(rc.archive, "io.archive");
    const io::Archive archive = io::load_archive(rc.archive);
    const vq::CoderNet& enc = archive.net("enc:ref");

    auto featurize = [&](const std::string& path) {
      int dof = 0;
      const auto sequences = io::load_pose_dataset(path, &dof);
      if (dof != archive.chunk.dof)
        throw DataError(path + ": dof does not match the archive chunk spec");
      metrics::FeatureSet set;
      set.features.resize(static_cast<Eigen::Index>(sequences.size()), archive.codebook.latent_dim);
      for (std::size_t i = 0; i < sequences.size(); ++i) {
        hand::HandTrajectory traj;
        traj.frames = sequences[i];
        set.features.row(static_cast<Eigen::Index>(i)) =
            metrics::extract_features(traj, enc, archive.codebook, archive.chunk).transpose();
      }
      return set;
    };
    const metrics::FeatureSet real = featurize(rc.real_set);
    const metrics::FeatureSet gen = featurize(rc.gen_set);
    if (!g.dry_run) {
      report << json{{"metric", "fid"}, {"value", metrics::fid(real, gen)}}.dump() << "\n";
      const double div = metrics::diversity(gen);
      json line{{"metric", "diversity"}, {"value", div}};
      if (rc.diversity_ref) {
        line["reference"] = *rc.diversity_ref;
        line["abs_gap"] = std::abs(div - *rc.diversity_ref);
      }
      report << line.dump() << "\n";
      char hex[32];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(fnv_archive(rc.archive)));
      report << json{{"extractor", {{"archive", rc.archive}, {"net", "enc:ref"},
                                    {"fingerprint", hex}}}}.dump()
             << "\n";
    }
    any = true;
  }

  if (!any) throw ConfigError("metrics: no inputs given (io.pred/io.gt, io.*_pose, io.real/...)");
  if (g.dry_run) std::cout << "metrics: inputs ok\n";
  return 0;
}

int cmd_noise_study(const GlobalArgs& g,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
  const cfg::RunConfig rc = build_config(g, extra);
  require_path(rc.hand, "io.hand");
  require_path(rc.cloud, "io.cloud");
  require_path(rc.gen, "io.gen");
  require_path(rc.target, "io.target");

  const hand::KinematicChain chain = hand::load_chain(rc.hand);
  cloud::OrientedPointCloud clean = io::load_cloud(rc.cloud);
  if (clean.normals.empty()) throw DataError("io.cloud: cloud has no normals");
  clean.validate();
  const hand::HandTrajectory gen = io::load_hand_trajectory(rc.gen);
  const geom::TargetPoseTrajectory target = load_target(rc);

  if (g.dry_run) {
    std::cout << "noise-study: inputs ok (" << rc.noise_sigmas.size() << " sigma levels, "
              << rc.noise_seeds << " seeds)\n";
    return 0;
  }

  const refine::NoiseStudyReport report =
      refine::noise_study(clean, rc.noise_sigmas, rc.noise_seeds, chain, gen.frames.front(),
                          target.frames.front(), rc.refine, rc.seed);

  fs::create_directories(rc.out_dir);
  std::ofstream out = open_report(fs::path(rc.out_dir) / "noise_study.jsonl");
  for (const auto& row : report.rows)
    out << json{{"kernel", row.kernel},
                {"sigma", row.sigma},
                {"seed", row.seed},
                {"deviation", row.deviation}}.dump()
        << "\n";

  // Per-sigma medians and the kernel comparison.
  for (double sigma : rc.noise_sigmas) {
    auto median_of = [&](const std::string& kernel) {
      std::vector<double> v;
      for (const auto& row : report.rows)
        if (row.sigma == sigma && row.kernel == kernel) v.push_back(row.deviation);
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const double med_f = median_of("quad_exp");
    const double med_abs = median_of("smoothed_abs");
    out << json{{"summary_sigma", sigma},
                {"median_quad_exp", med_f},
                {"median_smoothed_abs", med_abs},
                {"quad_exp_leq_baseline", med_f <= med_abs}}.dump()
        << "\n";
  }
  std::cout << "noise-study: " << report.rows.size() << " rows\n";
  return 0;
}

int cmd_normals(const GlobalArgs& g,
                const std::vector<std::pair<std::string, std::string>>& extra) {
  const cfg::RunConfig rc = build_config(g, extra);
  require_path(rc.cloud, "io.cloud");
  cloud::OrientedPointCloud c = io::load_cloud(rc.cloud);

  if (g.dry_run) {
    std::cout << "normals: " << c.size() << " points\n";
    return 0;
  }

  Eigen::Vector3d ref = Eigen::Vector3d::Zero();
  if (rc.normals_ref == "centroid") {
    for (const auto& p : c.points) ref += p;
    ref /= static_cast<double>(c.points.size());
  } else {
    std::stringstream ss(rc.normals_ref);
    std::string item;
    std::vector<double> vals;
    while (std::getline(ss, item, ',')) {
      try {
        vals.push_back(std::stod(item));
      } catch (...) {
        throw ConfigError("config: normals.ref must be 'centroid' or 'x,y,z'");
      }
    }
    if (vals.size() != 3)
      throw ConfigError("config: normals.ref must be 'centroid' or 'x,y,z'");
    ref = {vals[0], vals[1], vals[2]};
  }

  const cloud::NormalEstimate est =
      cloud::estimate_normals(c.points, static_cast<std::size_t>(rc.normals_k), ref);
  c.normals = est.normals;
  int degenerate = 0;
  for (bool d : est.degenerate)
    if (d) ++degenerate;

  fs::create_directories(rc.out_dir);
  io::save_cloud_ply((fs::path(rc.out_dir) / "with_normals.ply").string(), c);
  std::cout << "normals: " << c.size() << " points, " << degenerate << " degenerate\n";
  return 0;
}

int cmd_fixtures(const GlobalArgs& g, const std::string& out) {
  const std::string dir = !out.empty() ? out : (!g.out_dir.empty() ? g.out_dir : "fixtures");
  std::uint64_t seed = 0;
  if (!g.seed.empty()) {
    try {
      seed = std::stoull(g.seed);
    } catch (...) {
      throw ConfigError("config: key 'seed': cannot parse '" + g.seed + "' as an integer");
    }
  }
  if (g.dry_run) {
    std::cout << "fixtures: would write to " << dir << "\n";
    return 0;
  }
  fixtures::generate_all(dir, seed);
  std::cout << "fixtures: wrote " << dir << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"trajectory refinement and tokenization toolkit for dexterous hands"};
  app.require_subcommand(1);

  GlobalArgs g;
  std::vector<std::pair<std::string, std::string>> extra;
  std::string hand_path, cloud_path, gen_path, target_path, keypoints_path, spec_path;
  std::string dataset_path, dataset_ref_path, dataset_new_path, archive_path;
  std::string pred_path, gt_path, pred_pose_path, gt_pose_path, real_path, gen_set_path;
  std::string from_net = "ref", to_net = "ref", history_path, fixtures_out, init_path;

  auto add_io = [&](CLI::App* cmd) {
    cmd->add_option("--hand", hand_path, "hand model file");
    cmd->add_option("--cloud", cloud_path, "object point cloud");
    cmd->add_option("--gen", gen_path, "joint trajectory (qtraj)");
    cmd->add_option("--target", target_path, "target pose trajectory (postraj)");
  };

  CLI::App* refine_cmd = app.add_subcommand("refine", "contact-aware trajectory refinement");
  add_global_flags(refine_cmd, g);
  add_io(refine_cmd);

  CLI::App* retarget_cmd = app.add_subcommand("retarget", "keypoint IK onto a device chain");
  add_global_flags(retarget_cmd, g);
  retarget_cmd->add_option("--hand", hand_path, "hand model file");
  retarget_cmd->add_option("--keypoints", keypoints_path, "keypoint trajectory");
  retarget_cmd->add_option("--spec", spec_path, "correspondence spec");
  retarget_cmd->add_option("--init", init_path, "rest-pose qtraj seeding frame 0");

  CLI::App* vq_cmd = app.add_subcommand("vq", "codebook training and translation");
  vq_cmd->require_subcommand(1);
  CLI::App* train_ref = vq_cmd->add_subcommand("train-ref", "train the reference model");
  add_global_flags(train_ref, g);
  train_ref->add_option("--dataset", dataset_path, "pose dataset");
  train_ref->add_option("--archive", archive_path, "output codebook archive");
  CLI::App* train_new = vq_cmd->add_subcommand("train-new", "onboard a new morphology");
  add_global_flags(train_new, g);
  train_new->add_option("--archive", archive_path, "codebook archive (updated in place)");
  train_new->add_option("--dataset-ref", dataset_ref_path, "reference-hand chunks");
  train_new->add_option("--dataset-new", dataset_new_path, "new-hand chunks");
  CLI::App* translate = vq_cmd->add_subcommand("translate", "cross-hand pose translation");
  add_global_flags(translate, g);
  translate->add_option("--archive", archive_path, "codebook archive");
  translate->add_option("--gen", gen_path, "source joint trajectory");
  translate->add_option("--from", from_net, "source net tag (default ref)");
  translate->add_option("--to", to_net, "target net tag (default ref)");
  CLI::App* refresh_stats = vq_cmd->add_subcommand("refresh-stats", "cold-code refresh summary");
  add_global_flags(refresh_stats, g);
  refresh_stats->add_option("--history", history_path, "loss history jsonl");

  CLI::App* metrics_cmd = app.add_subcommand("metrics", "evaluation metric suite");
  add_global_flags(metrics_cmd, g);
  metrics_cmd->add_option("--hand", hand_path, "hand model file");
  metrics_cmd->add_option("--pred", pred_path, "predicted qtraj");
  metrics_cmd->add_option("--gt", gt_path, "ground-truth qtraj");
  metrics_cmd->add_option("--pred-pose", pred_pose_path, "predicted pose trajectory");
  metrics_cmd->add_option("--gt-pose", gt_pose_path, "ground-truth pose trajectory");
  metrics_cmd->add_option("--real", real_path, "real pose dataset (features)");
  metrics_cmd->add_option("--gen-set", gen_set_path, "generated pose dataset (features)");
  metrics_cmd->add_option("--archive", archive_path, "codebook archive (feature extractor)");

  CLI::App* noise_cmd = app.add_subcommand("noise-study", "kernel robustness to cloud noise");
  add_global_flags(noise_cmd, g);
  add_io(noise_cmd);

  CLI::App* normals_cmd = app.add_subcommand("normals", "estimate cloud normals");
  add_global_flags(normals_cmd, g);
  normals_cmd->add_option("--cloud", cloud_path, "input cloud (xyz or ply)");

  CLI::App* fixtures_cmd = app.add_subcommand("fixtures", "fixture generation");
  CLI::App* fixtures_gen = fixtures_cmd->add_subcommand("generate", "write the fixture tree");
  add_global_flags(fixtures_gen, g);
  fixtures_gen->add_option("--out", fixtures_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  auto fill_extra = [&] {
    extra = {{"io.hand", hand_path},         {"io.cloud", cloud_path},
             {"io.gen", gen_path},           {"io.target", target_path},
             {"io.keypoints", keypoints_path}, {"io.retarget_spec", spec_path},
             {"io.init", init_path},
             {"io.dataset", dataset_path},   {"io.dataset_ref", dataset_ref_path},
             {"io.dataset_new", dataset_new_path}, {"io.archive", archive_path},
             {"io.pred", pred_path},         {"io.gt", gt_path},
             {"io.pred_pose", pred_pose_path}, {"io.gt_pose", gt_pose_path},
             {"io.real", real_path},         {"io.gen_set", gen_set_path}};
  };

  try {
    fill_extra();
    if (refine_cmd->parsed()) return cmd_refine(g, extra);
    if (retarget_cmd->parsed()) return cmd_retarget(g, extra);
    if (vq_cmd->parsed()) {
      if (train_ref->parsed()) return cmd_vq_train_ref(g, extra);
      if (train_new->parsed()) return cmd_vq_train_new(g, extra);
      if (translate->parsed()) return cmd_vq_translate(g, extra, from_net, to_net);
      if (refresh_stats->parsed()) return cmd_vq_refresh_stats(g, history_path);
    }
    if (metrics_cmd->parsed()) return cmd_metrics(g, extra);
    if (noise_cmd->parsed()) return cmd_noise_study(g, extra);
    if (normals_cmd->parsed()) return cmd_normals(g, extra);
    if (fixtures_cmd->parsed() && fixtures_gen->parsed()) return cmd_fixtures(g, fixtures_out);
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace dextok::cli
