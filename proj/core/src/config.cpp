#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dkflab/experiment.hpp"
#include "dkflab/matrixtools.hpp"

namespace dkflab {
namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& what) { raise(Errc::ConfigError, what); }

const json& need(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) config_fail(std::string(where) + ": missing key '" + key + "'");
  return *it;
}

Eigen::MatrixXd parse_dense(const json& j, const char* where) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    config_fail(std::string(where) + ": expected an array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      config_fail(std::string(where) + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) config_fail(std::string(where) + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

/// Square matrix given either as rows or as {"identity_scale": s} with the
/// dimension supplied by context.
Eigen::MatrixXd parse_square(const json& j, Eigen::Index n, const char* where) {
  if (j.is_object()) {
    const double s = need(j, "identity_scale", where).get<double>();
    return s * Eigen::MatrixXd::Identity(n, n);
  }
  Eigen::MatrixXd m = parse_dense(j, where);
  if (m.rows() != n || m.cols() != n) {
    config_fail(std::string(where) + ": expected " + std::to_string(n) + "x" + std::to_string(n));
  }
  return m;
}

Eigen::VectorXd parse_vector(const json& j, Eigen::Index n, const char* where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    config_fail(std::string(where) + ": expected array of length " + std::to_string(n));
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

Eigen::VectorXd parse_per_node(const json& j, int node_count, const char* where) {
  if (j.is_number()) return Eigen::VectorXd::Constant(node_count, j.get<double>());
  return parse_vector(j, node_count, where);
}

std::vector<Sensor> parse_sensors(const json& j, const Eigen::MatrixXd& f) {
  std::vector<Sensor> sensors;
  if (j.is_array()) {
    for (const auto& item : j) {
      Sensor s;
      s.h = parse_dense(need(item, "H", "model.sensors[]"), "model.sensors[].H");
      if (s.h.cols() != f.rows()) config_fail("model.sensors[].H: column count != state dim");
      s.r = parse_square(need(item, "R", "model.sensors[]"), s.h.rows(), "model.sensors[].R");
      sensors.push_back(std::move(s));
    }
    return sensors;
  }
  const json& gen = need(j, "generator", "model.sensors");
  const std::string type = need(gen, "type", "model.sensors.generator").get<std::string>();
  if (type != "random_pm1") config_fail("model.sensors.generator.type: unknown '" + type + "'");
  const int count = need(gen, "count", "model.sensors.generator").get<int>();
  const int m_i = gen.value("m_i", 1);
  const auto seed = need(gen, "seed", "model.sensors.generator").get<std::uint64_t>();
  const double r_scale = gen.value("r_scale", 1.0);
  if (count < 1 || m_i < 1 || r_scale <= 0.0) config_fail("model.sensors.generator: bad values");
  for (auto& h : random_sensor_suite(f, count, m_i, seed)) {
    Sensor s;
    s.r = r_scale * Eigen::MatrixXd::Identity(h.rows(), h.rows());
    s.h = std::move(h);
    sensors.push_back(std::move(s));
  }
  return sensors;
}

SensorGraph parse_graph(const json& j) {
  if (j.contains("generator")) {
    const json& gen = j["generator"];
    const std::string type = need(gen, "type", "graph.generator").get<std::string>();
    if (type != "random_connected") config_fail("graph.generator.type: unknown '" + type + "'");
    return random_connected_graph(need(gen, "n", "graph.generator").get<int>(),
                                  gen.value("extra_edges", 0),
                                  need(gen, "seed", "graph.generator").get<std::uint64_t>());
  }
  const int n = need(j, "n", "graph").get<int>();
  std::vector<Edge> edges;
  for (const auto& e : need(j, "edges", "graph")) {
    if (!e.is_array() || (e.size() != 2 && e.size() != 3)) {
      config_fail("graph.edges: entries must be [i, j] or [i, j, weight]");
    }
    Edge edge;
    edge.i = e[0].get<int>();
    edge.j = e[1].get<int>();
    edge.weight = e.size() == 3 ? e[2].get<double>() : 1.0;
    edges.push_back(edge);
  }
  return build_graph(n, edges);
}

PsdGuard parse_guard(const std::string& s) {
  if (s == "none") return PsdGuard::none;
  if (s == "project") return PsdGuard::project;
  if (s == "require_large_lstar") return PsdGuard::require_large_lstar;
  config_fail("gains.psd_guard: unknown '" + s + "'");
}

std::uint64_t fnv1a_text(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ExperimentConfig load_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    config_fail(std::string("config: ") + e.what());
  }

  ExperimentConfig cfg;
  try {
    const json& model = need(j, "model", "config");
    cfg.f = parse_dense(need(model, "F", "model"), "model.F");
    if (cfg.f.rows() != cfg.f.cols()) config_fail("model.F: not square");
    const Eigen::Index n = cfg.f.rows();
    cfg.q = parse_square(need(model, "Q", "model"), n, "model.Q");
    cfg.sensors = parse_sensors(need(model, "sensors", "model"), cfg.f);

    cfg.graph = parse_graph(need(j, "graph", "config"));
    if (cfg.graph.node_count != static_cast<int>(cfg.sensors.size())) {
      config_fail("graph: node count " + std::to_string(cfg.graph.node_count) +
                  " != sensor count " + std::to_string(cfg.sensors.size()));
    }
    if (j.contains("sigma_bar")) cfg.sigma_bar = j["sigma_bar"].get<double>();

    const json& gains = need(j, "gains", "config");
    const int n_nodes = cfg.graph.node_count;
    cfg.alpha_lambda =
        parse_per_node(need(gains, "alpha_lambda", "gains"), n_nodes, "gains.alpha_lambda");
    cfg.alpha_upsilon =
        parse_per_node(need(gains, "alpha_upsilon", "gains"), n_nodes, "gains.alpha_upsilon");
    cfg.epsilon = gains.contains("epsilon")
                      ? parse_per_node(gains["epsilon"], n_nodes, "gains.epsilon")
                      : Eigen::VectorXd::Ones(n_nodes);
    const json& lstar = need(gains, "l_star", "gains");
    if (lstar.is_array()) {
      for (const auto& v : lstar) cfg.l_star_values.push_back(v.get<int>());
    } else {
      cfg.l_star_values.push_back(lstar.get<int>());
    }
    if (cfg.l_star_values.empty()) config_fail("gains.l_star: empty list");
    for (int v : cfg.l_star_values)
      if (v < 1) config_fail("gains.l_star: values must be >= 1");
    cfg.guard = parse_guard(gains.value("psd_guard", std::string("project")));

    cfg.horizon = j.value("horizon", 100);
    cfg.trials = j.value("trials", 1);
    cfg.master_seed = j.value("master_seed", std::uint64_t{1});
    cfg.strict_gains = j.value("strict_gains", true);
    cfg.with_ckf = j.value("with_ckf", false);
    cfg.out_dir = j.value("out", std::string("results"));
    if (cfg.horizon < 0 || cfg.trials < 1) config_fail("horizon/trials: out of range");

    cfg.x0_mean = Eigen::VectorXd::Zero(n);
    cfg.p0_truth = Eigen::MatrixXd::Identity(n, n);
    cfg.p_i0 = Eigen::MatrixXd::Identity(n, n);
    if (j.contains("init")) {
      const json& init = j["init"];
      if (init.contains("x0_mean")) cfg.x0_mean = parse_vector(init["x0_mean"], n, "init.x0_mean");
      if (init.contains("P0")) cfg.p0_truth = parse_square(init["P0"], n, "init.P0");
      if (init.contains("P_i0")) cfg.p_i0 = parse_square(init["P_i0"], n, "init.P_i0");
      if (init.contains("estimate_init")) {
        const json& est = init["estimate_init"];
        const std::string type = need(est, "type", "init.estimate_init").get<std::string>();
        if (type == "mean") {
          cfg.init_mode = DkfInit::Mode::mean;
        } else if (type == "uniform") {
          cfg.init_mode = DkfInit::Mode::uniform;
          cfg.init_range = est.value("range", 1.0);
        } else {
          config_fail("init.estimate_init.type: unknown '" + type + "'");
        }
      }
    }
  } catch (const json::exception& e) {
    config_fail(std::string("config: ") + e.what());
  }

  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a_text(j.dump())));
  cfg.config_hash = hex;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_fail("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_config_text(buf.str());
}

PlantModel ExperimentConfig::build_model() const { return PlantModel(f, q, sensors); }

DkfGains ExperimentConfig::build_gains(int l_star) const {
  DkfGains g;
  g.alpha_lambda = alpha_lambda;
  g.alpha_upsilon = alpha_upsilon;
  g.epsilon = epsilon;
  g.l_star = l_star;
  g.guard = guard;
  return g;
}

DkfInit ExperimentConfig::build_init(std::uint64_t trial) const {
  DkfInit init;
  init.x0_mean = x0_mean;
  init.p0 = p_i0;
  init.mode = init_mode;
  init.range = init_range;
  init.master_seed = master_seed;
  init.trial = trial;
  return init;
}

}  // namespace dkflab
