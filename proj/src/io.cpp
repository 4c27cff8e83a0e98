#include "gpssm/io.hpp"

#include "gpssm/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace gpssm {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InputError(fmt::format("{}: row {} has {} fields, expected {}", path.string(),
                                   table.rows.size() + 1, cells.size(), table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (first) throw InputError(fmt::format("{}: missing header", path.string()));
  return table;
}

double to_double(const std::string& s, const fs::path& path) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw InputError(fmt::format("{}: '{}' is not a number", path.string(), s));
  }
  return v;
}

std::size_t to_index(const std::string& s, const fs::path& path) {
  std::size_t v = 0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw InputError(fmt::format("{}: '{}' is not an index", path.string(), s));
  }
  return v;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) s += ',';
    s += cells[i];
  }
  return s;
}

const std::vector<std::string> kMstepHeader{
    "k",          "gamma",         "q_before",   "q_hat",          "set_size",
    "dropped_mass", "bfgs_iterations", "bfgs_evaluations", "converged", "no_progress",
    "armijo_violations", "sweep_seconds", "mstep_seconds"};

}  // namespace

void write_dataset_csv(const fs::path& path, const Dataset& data) {
  data.validate();
  if (data.input_dim() != 1) throw InputError("dataset CSV holds exactly one input column");
  if (data.x_true && data.x_true->cols() != 1) {
    throw InputError("dataset CSV holds a scalar state");
  }
  auto out = open_out(path);
  out << (data.x_true ? "t,u,y,x_true\n" : "t,u,y\n");
  for (Eigen::Index t = 0; t < data.y.size(); ++t) {
    out << t << ',' << num(data.u(t, 0)) << ',' << num(data.y[t]);
    if (data.x_true) out << ',' << num((*data.x_true)(t, 0));
    out << '\n';
  }
}

Dataset read_dataset_csv(const fs::path& path) {
  const CsvTable table = read_csv(path);
  const bool has_x = table.header == std::vector<std::string>{"t", "u", "y", "x_true"};
  if (!has_x && table.header != std::vector<std::string>{"t", "u", "y"}) {
    throw InputError(fmt::format("{}: header must be t,u,y[,x_true]", path.string()));
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Dataset data;
  data.u.resize(n, 1);
  data.y.resize(n);
  Trajectory x(n, 1);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& row = table.rows[static_cast<std::size_t>(t)];
    if (to_index(row[0], path) != static_cast<std::size_t>(t)) {
      throw InputError(fmt::format("{}: time indices must run 0, 1, 2, ...", path.string()));
    }
    data.u(t, 0) = to_double(row[1], path);
    data.y[t] = to_double(row[2], path);
    if (has_x) x(t, 0) = to_double(row[3], path);
  }
  if (has_x) data.x_true = std::move(x);
  data.validate();
  return data;
}

void write_trace_csv(const fs::path& path, const RunArtifacts& a) {
  auto out = open_out(path);
  std::vector<std::string> header{"k"};
  header.insert(header.end(), a.names.begin(), a.names.end());
  header.push_back("q_hat");
  out << join(header) << '\n';
  for (const auto& r : a.trace) {
    out << r.k;
    for (Eigen::Index i = 0; i < r.theta.size(); ++i) out << ',' << num(r.theta[i]);
    out << ',' << num(r.q_hat) << '\n';
  }
}

void write_predictions_csv(const fs::path& path, const std::vector<PredictionRecord>& records) {
  auto out = open_out(path);
  out << "x_star,u_star,mean,std,truth\n";
  for (const auto& r : records) {
    out << num(r.x_star) << ',' << num(r.u_star) << ',' << num(r.mean) << ',' << num(r.std)
        << ',' << (r.truth ? num(*r.truth) : std::string()) << '\n';
  }
}

void save_artifacts(const fs::path& dir, const RunArtifacts& a) {
  fs::create_directories(dir);
  open_out(dir / "config.ini") << to_ini(a.config);
  write_trace_csv(dir / "trace.csv", a);

  {
    auto out = open_out(dir / "mstep.csv");
    out << join(kMstepHeader) << '\n';
    for (const auto& r : a.trace) {
      out << r.k << ',' << num(r.gamma) << ',' << num(r.q_before) << ',' << num(r.q_hat) << ','
          << r.set_size << ',' << num(r.dropped_mass) << ',' << r.bfgs_iterations << ','
          << r.bfgs_evaluations << ',' << int(r.converged) << ',' << int(r.no_progress) << ','
          << r.armijo_violations << ',' << num(r.sweep_seconds) << ',' << num(r.mstep_seconds)
          << '\n';
    }
  }

  const bool has_u = a.inputs.cols() > 0;
  {
    auto out = open_out(dir / "trajectory.csv");
    out << (has_u ? "t,u,x\n" : "t,x\n");
    for (Eigen::Index t = 0; t < a.final_trajectory.rows(); ++t) {
      out << t;
      if (has_u) out << ',' << num(a.inputs(t, 0));
      out << ',' << num(a.final_trajectory(t, 0)) << '\n';
    }
  }
  {
    auto out = open_out(dir / "weighted_set.csv");
    out << "entry,iteration,weight,t,x\n";
    const auto& entries = a.final_set.entries();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      for (Eigen::Index t = 0; t < entries[e].trajectory.rows(); ++t) {
        out << e << ',' << entries[e].iteration << ',' << num(entries[e].weight) << ',' << t
            << ',' << num(entries[e].trajectory(t, 0)) << '\n';
      }
    }
  }

  const Eigen::VectorXd packed = pack(a.theta);
  const Eigen::VectorXd natural = natural_values(a.theta);
  json model{
      {"packed_names", packed_names(a.theta)},
      {"packed", std::vector<double>(packed.data(), packed.data() + packed.size())},
      {"natural_names", a.names},
      {"natural", std::vector<double>(natural.data(), natural.data() + natural.size())},
      {"q", a.theta.noise.variance(0)},
      {"r", a.theta.obs.noise_variance()},
      {"obs_coefficient", a.theta.obs.coefficients()[0]},
      {"input_dim", a.inputs.cols()},
      {"seed", a.seed},
      {"iterations", a.trace.size()},
      {"final_set_size", a.final_set.size()},
      {"prune_epsilon", a.final_set.prune_epsilon()},
      {"seconds", a.seconds}};
  open_out(dir / "model.json") << model.dump(2) << '\n';
}

RunArtifacts load_artifacts(const fs::path& dir) {
  const IdentifyConfig config = load_config(dir / "config.ini");

  json model;
  {
    std::ifstream in(dir / "model.json");
    if (!in) throw InputError(fmt::format("cannot open '{}'", (dir / "model.json").string()));
    try {
      in >> model;
    } catch (const json::exception& e) {
      throw InputError(fmt::format("model.json: {}", e.what()));
    }
  }
  RunArtifacts a = [&] {
    try {
      IdentifyConfig shape = config;
      shape.run.q = model.at("q").get<double>();
      shape.obs.r = model.at("r").get<double>();
      shape.obs.coefficient = model.at("obs_coefficient").get<double>();
      const auto input_dim = model.at("input_dim").get<std::size_t>();
      HyperParams theta =
          build_theta(shape, input_dim, std::vector<double>(1 + input_dim, 1.0), 1.0);
      const auto packed = model.at("packed").get<std::vector<double>>();
      if (packed.size() != param_layout(theta).size()) {
        throw InputError("model.json: parameter count does not match config.ini");
      }
      unpack(theta, Eigen::Map<const Eigen::VectorXd>(packed.data(),
                                                      static_cast<Eigen::Index>(packed.size())));
      return RunArtifacts{.config = config,
                          .theta = std::move(theta),
                          .names = model.at("natural_names").get<std::vector<std::string>>(),
                          .trace = {},
                          .final_set = WeightedTrajectorySet(model.at("prune_epsilon").get<double>()),
                          .final_trajectory = {},
                          .inputs = {},
                          .seed = model.at("seed").get<std::uint64_t>(),
                          .seconds = model.at("seconds").get<double>()};
    } catch (const json::exception& e) {
      throw InputError(fmt::format("model.json: {}", e.what()));
    }
  }();

  const fs::path traj_path = dir / "trajectory.csv";
  const CsvTable traj = read_csv(traj_path);
  const bool has_u = traj.header.size() == 3;
  const auto n = static_cast<Eigen::Index>(traj.rows.size());
  a.final_trajectory.resize(n, 1);
  a.inputs.resize(n, has_u ? 1 : 0);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& row = traj.rows[static_cast<std::size_t>(t)];
    if (has_u) a.inputs(t, 0) = to_double(row[1], traj_path);
    a.final_trajectory(t, 0) = to_double(row.back(), traj_path);
  }

  // Entries keep their stored weights; restore() validates without renormalizing.
  const fs::path set_path = dir / "weighted_set.csv";
  const CsvTable set = read_csv(set_path);
  std::vector<WeightedEntry> entries;
  for (const auto& row : set.rows) {
    const std::size_t e = to_index(row[0], set_path);
    if (e == entries.size()) {
      entries.push_back({Trajectory(n, 1), to_double(row[2], set_path), to_index(row[1], set_path)});
    } else if (e + 1 != entries.size()) {
      throw InputError(fmt::format("{}: entries out of order", set_path.string()));
    }
    const std::size_t t = to_index(row[3], set_path);
    if (t >= static_cast<std::size_t>(n)) {
      throw InputError(fmt::format("{}: time index out of range", set_path.string()));
    }
    entries.back().trajectory(static_cast<Eigen::Index>(t), 0) = to_double(row[4], set_path);
  }
  a.final_set = WeightedTrajectorySet::restore(a.final_set.prune_epsilon(), std::move(entries));

  const fs::path trace_path = dir / "trace.csv";
  const fs::path mstep_path = dir / "mstep.csv";
  const CsvTable trace = read_csv(trace_path);
  const CsvTable mstep = read_csv(mstep_path);
  if (trace.rows.size() != mstep.rows.size() || mstep.header != kMstepHeader) {
    throw InputError("trace.csv and mstep.csv disagree");
  }
  const std::size_t p = a.names.size();
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const auto& tr = trace.rows[i];
    const auto& mr = mstep.rows[i];
    if (tr.size() != p + 2) throw InputError("trace.csv: wrong column count");
    IterationRecord r;
    r.k = to_index(tr[0], trace_path);
    r.theta.resize(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) r.theta[static_cast<Eigen::Index>(j)] = to_double(tr[j + 1], trace_path);
    r.q_hat = to_double(tr[p + 1], trace_path);
    r.gamma = to_double(mr[1], mstep_path);
    r.q_before = to_double(mr[2], mstep_path);
    r.set_size = to_index(mr[4], mstep_path);
    r.dropped_mass = to_double(mr[5], mstep_path);
    r.bfgs_iterations = to_index(mr[6], mstep_path);
    r.bfgs_evaluations = to_index(mr[7], mstep_path);
    r.converged = mr[8] == "1";
    r.no_progress = mr[9] == "1";
    r.armijo_violations = to_index(mr[10], mstep_path);
    r.sweep_seconds = to_double(mr[11], mstep_path);
    r.mstep_seconds = to_double(mr[12], mstep_path);
    a.trace.push_back(std::move(r));
  }
  return a;
}

}  // namespace gpssm
