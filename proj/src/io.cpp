#include "dextok/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dextok/common.hpp"

namespace dextok::io {

namespace {

std::ifstream open_in(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string(what) + ": cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path, const char* what) {
  std::ofstream out(path);
  if (!out) throw DataError(std::string(what) + ": cannot write '" + path + "'");
  return out;
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw DataError(path + ": " + msg);
}

}  // namespace

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

geom::TargetPoseTrajectory load_pose_trajectory(const std::string& path) {
  std::ifstream in = open_in(path, "posetraj");
  std::string magic, kw_frames, kw_rate;
  std::size_t n = 0;
  double rate = 0.0;
  if (!(in >> magic >> kw_frames >> n >> kw_rate >> rate) || magic != "posetraj" ||
      kw_frames != "frames" || kw_rate != "rate")
    fail(path, "expected header 'posetraj frames <N> rate <hz>'");
  if (n == 0) fail(path, "trajectory must have at least one frame");

  geom::TargetPoseTrajectory traj;
  traj.frame_rate = rate;
  traj.frames.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        if (!(in >> m(r, c))) fail(path, "frame " + std::to_string(f) + ": expected 16 numbers");
    try {
      traj.frames.push_back(geom::RigidTransform::from_matrix(m));
    } catch (const DataError& e) {
      fail(path, "frame " + std::to_string(f) + ": " + e.what());
    }
  }
  return traj;
}

void save_pose_trajectory(const std::string& path, const geom::TargetPoseTrajectory& traj) {
  std::ofstream out = open_out(path, "posetraj");
  out << "posetraj frames " << traj.frames.size() << " rate " << fmt_double(traj.frame_rate)
      << "\n";
  for (const geom::RigidTransform& t : traj.frames) {
    const Eigen::Matrix4d m = t.matrix();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) out << fmt_double(m(r, c)) << (r == 3 && c == 3 ? "\n" : " ");
  }
}

hand::HandTrajectory load_hand_trajectory(const std::string& path, double* rate) {
  std::ifstream in = open_in(path, "qtraj");
  std::string magic, kw_frames, kw_dof, kw_rate;
  std::size_t n = 0;
  int dof = 0;
  double hz = 0.0;
  if (!(in >> magic >> kw_frames >> n >> kw_dof >> dof >> kw_rate >> hz) || magic != "qtraj" ||
      kw_frames != "frames" || kw_dof != "dof" || kw_rate != "rate")
    fail(path, "expected header 'qtraj frames <N> dof <D> rate <hz>'");
  if (n == 0 || dof < 1) fail(path, "need at least one frame and dof >= 1");

  hand::HandTrajectory traj;
  traj.frames.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    Eigen::VectorXd q(dof);
    for (int d = 0; d < dof; ++d)
      if (!(in >> q[d]))
        fail(path, "frame " + std::to_string(f) + ": expected " + std::to_string(dof) + " values");
    traj.frames.push_back(std::move(q));
  }
  if (rate) *rate = hz;
  return traj;
}

void save_hand_trajectory(const std::string& path, const hand::HandTrajectory& traj, double rate) {
  if (traj.frames.empty()) throw DataError("qtraj: refusing to write an empty trajectory");
  std::ofstream out = open_out(path, "qtraj");
  const Eigen::Index dof = traj.frames.front().size();
  out << "qtraj frames " << traj.frames.size() << " dof " << dof << " rate " << fmt_double(rate)
      << "\n";
  for (const Eigen::VectorXd& q : traj.frames) {
    if (q.size() != dof) throw DataError("qtraj: inconsistent dof across frames");
    for (Eigen::Index d = 0; d < dof; ++d) out << fmt_double(q[d]) << (d + 1 == dof ? "\n" : " ");
  }
}

namespace {

cloud::OrientedPointCloud load_ply(std::istream& in, const std::string& path) {
  std::string line;
  std::getline(in, line);  // "ply" already peeked by caller
  bool ascii = false;
  std::size_t vertex_count = 0;
  std::vector<std::string> props;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string f;
      ls >> f;
      ascii = (f == "ascii");
    } else if (kw == "comment" || kw.empty()) {
      continue;
    } else if (kw == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        vertex_count = count;
        in_vertex = true;
      } else {
        if (count != 0) fail(path, "only the vertex element is supported");
        in_vertex = false;
      }
    } else if (kw == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      ls >> type >> name;
      if (type == "list") fail(path, "list properties are not supported");
      props.push_back(name);
    } else if (kw == "end_header") {
      break;
    } else {
      fail(path, "unsupported header line '" + line + "'");
    }
  }
  if (!ascii) fail(path, "only ascii PLY is supported");
  if (vertex_count == 0) fail(path, "no vertices");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i] == "x") ix = static_cast<int>(i);
    else if (props[i] == "y") iy = static_cast<int>(i);
    else if (props[i] == "z") iz = static_cast<int>(i);
    else if (props[i] == "nx") inx = static_cast<int>(i);
    else if (props[i] == "ny") iny = static_cast<int>(i);
    else if (props[i] == "nz") inz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) fail(path, "vertex element must carry x y z");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

  cloud::OrientedPointCloud out;
  out.points.reserve(vertex_count);
  std::vector<double> row(props.size());
  for (std::size_t v = 0; v < vertex_count; ++v) {
    for (std::size_t p = 0; p < props.size(); ++p)
      if (!(in >> row[p])) fail(path, "vertex " + std::to_string(v) + ": truncated row");
    out.points.emplace_back(row[ix], row[iy], row[iz]);
    if (with_normals) out.normals.emplace_back(row[inx], row[iny], row[inz]);
  }
  return out;
}

cloud::OrientedPointCloud load_xyz(std::istream& in, const std::string& path) {
  cloud::OrientedPointCloud out;
  std::string line;
  int columns = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.empty()) continue;
    if (columns == 0) {
      if (vals.size() != 3 && vals.size() != 6)
        fail(path, "line " + std::to_string(line_no) + ": expected 3 or 6 columns");
      columns = static_cast<int>(vals.size());
    }
    if (static_cast<int>(vals.size()) != columns)
      fail(path, "line " + std::to_string(line_no) + ": inconsistent column count");
    out.points.emplace_back(vals[0], vals[1], vals[2]);
    if (columns == 6) out.normals.emplace_back(vals[3], vals[4], vals[5]);
  }
  if (out.points.empty()) fail(path, "no points");
  return out;
}

}  // namespace

cloud::OrientedPointCloud load_cloud(const std::string& path) {
  std::ifstream in = open_in(path, "cloud");
  // sniff the first token
  std::string first;
  in >> first;
  in.clear();
  in.seekg(0);
  if (first == "ply") return load_ply(in, path);
  return load_xyz(in, path);
}

void save_cloud_ply(const std::string& path, const cloud::OrientedPointCloud& c) {
  const bool with_normals = !c.normals.empty();
  if (with_normals && c.normals.size() != c.points.size())
    throw DataError("cloud: normal count mismatch on save");
  std::ofstream out = open_out(path, "cloud");
  out << "ply\nformat ascii 1.0\nelement vertex " << c.points.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (with_normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    out << fmt_double(c.points[i].x()) << " " << fmt_double(c.points[i].y()) << " "
        << fmt_double(c.points[i].z());
    if (with_normals)
      out << " " << fmt_double(c.normals[i].x()) << " " << fmt_double(c.normals[i].y()) << " "
          << fmt_double(c.normals[i].z());
    out << "\n";
  }
}

KeypointFile load_keypoints(const std::string& path) {
  std::ifstream in = open_in(path, "keypoints");
  std::string magic, kw_frames;
  std::size_t k = 0, t = 0;
  if (!(in >> magic >> k >> kw_frames >> t) || magic != "keypoints" || kw_frames != "frames")
    fail(path, "expected header 'keypoints <K> frames <T>'");
  if (k == 0 || t == 0) fail(path, "need at least one keypoint and one frame");

  KeypointFile file;
  std::string token;
  bool pending_token = false;
  if (in >> token) {
    if (token == "names") {
      file.names.resize(k);
      for (std::size_t i = 0; i < k; ++i)
        if (!(in >> file.names[i]))
          fail(path, "names line needs " + std::to_string(k) + " entries");
    } else {
      pending_token = true;  // token is the first coordinate
    }
  }

  auto next_value = [&](double& v) -> bool {
    if (pending_token) {
      pending_token = false;
      std::size_t used = 0;
      try {
        v = std::stod(token, &used);
      } catch (...) {
        return false;
      }
      return used == token.size();
    }
    return static_cast<bool>(in >> v);
  };

  file.frames.resize(t);
  for (std::size_t f = 0; f < t; ++f) {
    file.frames[f].positions.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      Eigen::Vector3d& p = file.frames[f].positions[i];
      if (!next_value(p.x()) || !next_value(p.y()) || !next_value(p.z()))
        fail(path, "frame " + std::to_string(f) + ": truncated keypoint row");
    }
  }
  return file;
}

void save_keypoints(const std::string& path, const KeypointFile& file) {
  if (file.frames.empty()) throw DataError("keypoints: nothing to write");
  const std::size_t k = file.frames.front().positions.size();
  std::ofstream out = open_out(path, "keypoints");
  out << "keypoints " << k << " frames " << file.frames.size() << "\n";
  if (!file.names.empty()) {
    if (file.names.size() != k) throw DataError("keypoints: name count mismatch");
    out << "names";
    for (const std::string& n : file.names) out << " " << n;
    out << "\n";
  }
  for (const auto& frame : file.frames) {
    if (frame.positions.size() != k) throw DataError("keypoints: inconsistent keypoint count");
    for (const Eigen::Vector3d& p : frame.positions)
      out << fmt_double(p.x()) << " " << fmt_double(p.y()) << " " << fmt_double(p.z()) << "\n";
  }
}

retarget::RetargetSpec load_retarget_spec(const std::string& path,
                                          const hand::KinematicChain* chain) {
  std::ifstream in = open_in(path, "retarget-spec");
  retarget::RetargetSpec spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    if (kw == "retarget") continue;
    if (kw == "alignment") {
      Eigen::Matrix4d m;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          if (!(ls >> m(r, c)))
            fail(path, "line " + std::to_string(line_no) + ": alignment needs 16 numbers");
      spec.device_alignment = geom::RigidTransform::from_matrix(m);
    } else if (kw == "lambda_smooth") {
      if (!(ls >> spec.lambda_smooth))
        fail(path, "line " + std::to_string(line_no) + ": lambda_smooth needs a number");
    } else if (kw == "map") {
      retarget::Correspondence c;
      if (!(ls >> c.link >> c.keypoint))
        fail(path, "line " + std::to_string(line_no) + ": expected 'map <link> <kp_index> ...'");
      bool weight_given = false;
      std::string opt;
      while (ls >> opt) {
        if (opt == "weight") {
          if (!(ls >> c.weight))
            fail(path, "line " + std::to_string(line_no) + ": weight needs a number");
          weight_given = true;
        } else if (opt == "scale") {
          if (!(ls >> c.scale))
            fail(path, "line " + std::to_string(line_no) + ": scale needs a number");
        } else {
          fail(path, "line " + std::to_string(line_no) + ": unknown option '" + opt + "'");
        }
      }
      if (!weight_given && chain) {
        bool fingertip = false;
        for (int link : chain->fingertip_links())
          if (chain->links()[link] == c.link) fingertip = true;
        c.weight = fingertip ? 1.0 : 0.5;
      }
      spec.correspondences.push_back(std::move(c));
    } else {
      fail(path, "line " + std::to_string(line_no) + ": unknown keyword '" + kw + "'");
    }
  }
  if (spec.correspondences.empty()) fail(path, "no 'map' lines");
  return spec;
}

std::vector<std::vector<Eigen::VectorXd>> load_pose_dataset(const std::string& path, int* dof) {
  std::ifstream in = open_in(path, "poseset");
  std::string magic, kw_seq, kw_dof;
  std::size_t seq_count = 0;
  int d = 0;
  if (!(in >> magic >> kw_seq >> seq_count >> kw_dof >> d) || magic != "poseset" ||
      kw_seq != "sequences" || kw_dof != "dof")
    fail(path, "expected header 'poseset sequences <S> dof <D>'");
  if (seq_count == 0 || d < 1) fail(path, "need at least one sequence and dof >= 1");

  std::vector<std::vector<Eigen::VectorXd>> sequences;
  sequences.reserve(seq_count);
  for (std::size_t s = 0; s < seq_count; ++s) {
    std::string kw1, kw2;
    std::size_t frames = 0;
    if (!(in >> kw1 >> kw2 >> frames) || kw1 != "seq" || kw2 != "frames")
      fail(path, "sequence " + std::to_string(s) + ": expected 'seq frames <T>'");
    std::vector<Eigen::VectorXd> seq;
    seq.reserve(frames);
    for (std::size_t f = 0; f < frames; ++f) {
      Eigen::VectorXd q(d);
      for (int i = 0; i < d; ++i)
        if (!(in >> q[i])) fail(path, "sequence " + std::to_string(s) + ": truncated frame");
      seq.push_back(std::move(q));
    }
    sequences.push_back(std::move(seq));
  }
  if (dof) *dof = d;
  return sequences;
}

void save_pose_dataset(const std::string& path,
                       const std::vector<std::vector<Eigen::VectorXd>>& sequences, int dof) {
  std::ofstream out = open_out(path, "poseset");
  out << "poseset sequences " << sequences.size() << " dof " << dof << "\n";
  for (const auto& seq : sequences) {
    out << "seq frames " << seq.size() << "\n";
    for (const Eigen::VectorXd& q : seq) {
      if (q.size() != dof) throw DataError("poseset: inconsistent dof");
      for (Eigen::Index i = 0; i < dof; ++i)
        out << fmt_double(q[i]) << (i + 1 == dof ? "\n" : " ");
    }
  }
}

const vq::CoderNet& Archive::net(const std::string& name) const {
  for (const auto& [n, net] : nets)
    if (n == name) return net;
  throw DataError("archive: missing net '" + name + "'");
}

bool Archive::has_net(const std::string& name) const {
  for (const auto& [n, net] : nets)
    if (n == name) return true;
  return false;
}

Archive load_archive(const std::string& path) {
  std::ifstream in = open_in(path, "archive");
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "vqarchive" || version != 1)
    fail(path, "expected header 'vqarchive 1'");

  Archive a;
  std::string kw;
  if (!(in >> kw) || kw != "chunk") fail(path, "expected 'chunk' section");
  std::string kw_window, kw_stride, kw_dof;
  if (!(in >> kw_window >> a.chunk.window >> kw_stride >> a.chunk.stride >> kw_dof >>
        a.chunk.dof) ||
      kw_window != "window" || kw_stride != "stride" || kw_dof != "dof")
    fail(path, "malformed chunk line");

  if (!(in >> kw) || kw != "codebook") fail(path, "expected 'codebook' section");
  if (!(in >> a.codebook.code_count >> a.codebook.latent_dim))
    fail(path, "codebook needs K and d_z");
  if (a.codebook.code_count < 1 || a.codebook.latent_dim < 1) fail(path, "bad codebook shape");
  a.codebook.codes.resize(static_cast<std::size_t>(a.codebook.code_count) *
                          a.codebook.latent_dim);
  for (double& v : a.codebook.codes)
    if (!(in >> v)) fail(path, "truncated codebook matrix");

  while (in >> kw) {
    if (kw == "end") return a;
    if (kw != "net") fail(path, "expected 'net' or 'end', got '" + kw + "'");
    std::string name, kw_act, act_name, kw_layers;
    int layer_count = 0;
    if (!(in >> name >> kw_act >> act_name >> kw_layers >> layer_count) || kw_act != "activation" ||
        kw_layers != "layers" || layer_count < 1)
      fail(path, "malformed net header");
    vq::CoderNet net;
    net.activation = vq::activation_from_name(act_name);
    for (int l = 0; l < layer_count; ++l) {
      std::string kw_layer;
      vq::Layer layer;
      if (!(in >> kw_layer >> layer.in >> layer.out) || kw_layer != "layer" || layer.in < 1 ||
          layer.out < 1)
        fail(path, "malformed layer header in net '" + name + "'");
      layer.weights.resize(static_cast<std::size_t>(layer.in) * layer.out);
      layer.bias.resize(layer.out);
      for (double& v : layer.weights)
        if (!(in >> v)) fail(path, "truncated weights in net '" + name + "'");
      for (double& v : layer.bias)
        if (!(in >> v)) fail(path, "truncated bias in net '" + name + "'");
      net.layers.push_back(std::move(layer));
    }
    a.nets.emplace_back(name, std::move(net));
  }
  fail(path, "missing 'end'");
}

void save_archive(const std::string& path, const Archive& archive) {
  std::ofstream out = open_out(path, "archive");
  out << "vqarchive 1\n";
  out << "chunk window " << archive.chunk.window << " stride " << archive.chunk.stride << " dof "
      << archive.chunk.dof << "\n";
  out << "codebook " << archive.codebook.code_count << " " << archive.codebook.latent_dim << "\n";
  for (int k = 0; k < archive.codebook.code_count; ++k) {
    const double* row = archive.codebook.code(k);
    for (int j = 0; j < archive.codebook.latent_dim; ++j)
      out << fmt_double(row[j]) << (j + 1 == archive.codebook.latent_dim ? "\n" : " ");
  }
  for (const auto& [name, net] : archive.nets) {
    out << "net " << name << " activation " << vq::activation_name(net.activation) << " layers "
        << net.layers.size() << "\n";
    for (const vq::Layer& layer : net.layers) {
      out << "layer " << layer.in << " " << layer.out << "\n";
      for (int r = 0; r < layer.out; ++r) {
        for (int c = 0; c < layer.in; ++c)
          out << fmt_double(layer.weights[static_cast<std::size_t>(r) * layer.in + c])
              << (c + 1 == layer.in ? "\n" : " ");
      }
      for (int r = 0; r < layer.out; ++r)
        out << fmt_double(layer.bias[r]) << (r + 1 == layer.out ? "\n" : " ");
    }
  }
  out << "end\n";
}

}  // namespace dextok::io
