#include "parity/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace parity {

namespace {

constexpr int kFormat = 1;

void put(std::ostream& os, const std::string& name, const Eigen::MatrixXd& M) {
  os << name << " = " << M.rows() << ' ' << M.cols() << " :";
  char buf[32];
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof buf, " %.17g", M(i, j));
      os << buf;
    }
  os << '\n';
}

struct Entries {
  std::map<std::string, std::string> scalars;
  std::map<std::string, Eigen::MatrixXd> arrays;

  const std::string& scalar(const std::string& key) const {
    auto it = scalars.find(key);
    if (it == scalars.end()) throw CheckpointError("checkpoint: missing key '" + key + "'");
    return it->second;
  }
  const Eigen::MatrixXd& array(const std::string& key) const {
    auto it = arrays.find(key);
    if (it == arrays.end()) throw CheckpointError("checkpoint: missing array '" + key + "'");
    return it->second;
  }
};

}  // namespace

void save_model(std::ostream& os, const Model& model) {
  os << "# parity-forge v" << PARITY_FORGE_VERSION << " checkpoint=" << kFormat << '\n';
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Mlp2<double>>) {
          os << "arch = mlp2\n";
          os << "act = " << m.act.name() << "\nact_k = " << m.act.k << '\n';
          char buf[96];
          std::snprintf(buf, sizeof buf, "act_scale = %.17g\nact_phase = %.17g\n", m.act.scale,
                        m.act.phase);
          os << buf;
          os << "train = " << m.train_W << ' ' << m.train_b << ' ' << m.train_u << '\n';
          put(os, "W", m.W);
          put(os, "b", m.b.transpose());
          put(os, "u", m.u.transpose());
        } else if constexpr (std::is_same_v<M, PolyNet<double>>) {
          os << "arch = polynet\ntrain = " << m.train_b << '\n';
          put(os, "W", m.W);
          put(os, "b", m.b.transpose());
        } else if constexpr (std::is_same_v<M, DisjointPolyNet<double>>) {
          os << "arch = disjoint_polynet\n";
          put(os, "W", m.W);
        } else {
          os << "arch = deep_poly\nlayers = " << m.W.size() << '\n';
          for (std::size_t l = 0; l < m.W.size(); ++l) {
            put(os, "W" + std::to_string(l + 1), m.W[l]);
            put(os, "b" + std::to_string(l + 1), m.b[l].transpose());
          }
          put(os, "u", m.u.transpose());
        }
      },
      model);
}

Model load_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# parity-forge v", 0) != 0)
    throw CheckpointError("checkpoint: missing header");
  if (line.find("checkpoint=" + std::to_string(kFormat)) == std::string::npos)
    throw CheckpointError("checkpoint: unsupported format: " + line);
  Entries e;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find(" = ");
    if (eq == std::string::npos) throw CheckpointError("checkpoint: bad line: " + line);
    std::string key = line.substr(0, eq), rest = line.substr(eq + 3);
    auto colon = rest.find(" :");
    if (colon == std::string::npos) {
      e.scalars[key] = rest;
      continue;
    }
    std::istringstream ss(rest);
    Eigen::Index r = 0, c = 0;
    char sep = 0;
    ss >> r >> c >> sep;
    if (!ss || sep != ':' || r < 0 || c < 0) throw CheckpointError("checkpoint: bad shape: " + key);
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j)
        if (!(ss >> M(i, j))) throw CheckpointError("checkpoint: short array: " + key);
    e.arrays[key] = std::move(M);
  }
  const std::string& arch = e.scalar("arch");
  if (arch == "mlp2") {
    Mlp2<double> m;
    const int k = std::stoi(e.scalar("act_k"));
    const std::string act = e.scalar("act");
    if (act == "sinusoid" || act == "sinusoid2")
      m.act = Activation::sinusoid_phase(std::stod(e.scalar("act_phase")),
                                         std::stod(e.scalar("act_scale")));
    else
      m.act = Activation::parse(act, k);
    m.act.k = k;
    std::istringstream tr(e.scalar("train"));
    tr >> m.train_W >> m.train_b >> m.train_u;
    m.W = e.array("W");
    m.b = e.array("b").transpose();
    m.u = e.array("u").transpose();
    if (m.b.size() != m.W.rows() || m.u.size() != m.W.rows())
      throw CheckpointError("checkpoint: inconsistent mlp2 shapes");
    return m;
  }
  if (arch == "polynet") {
    PolyNet<double> m;
    m.train_b = std::stoi(e.scalar("train")) != 0;
    m.W = e.array("W");
    m.b = e.array("b").transpose();
    if (m.b.size() != m.W.rows()) throw CheckpointError("checkpoint: inconsistent polynet shapes");
    return m;
  }
  if (arch == "disjoint_polynet") {
    DisjointPolyNet<double> m;
    m.W = e.array("W");
    return m;
  }
  if (arch == "deep_poly") {
    DeepPolyMlp<double> m;
    const int layers = std::stoi(e.scalar("layers"));
    for (int l = 1; l <= layers; ++l) {
      m.W.push_back(e.array("W" + std::to_string(l)));
      m.b.push_back(e.array("b" + std::to_string(l)).transpose());
    }
    m.u = e.array("u").transpose();
    return m;
  }
  throw CheckpointError("checkpoint: unknown arch '" + arch + "'");
}

void save_model(const std::string& path, const Model& model) {
  std::ofstream os(path);
  if (!os) throw CheckpointError("cannot write " + path);
  save_model(os, model);
}

Model load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CheckpointError("cannot read " + path);
  return load_model(is);
}

}  // namespace parity
