#include "gpssm/config.hpp"

#include "gpssm/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gpssm {

namespace {

using Setter = std::function<void(IdentifyConfig&, const std::string&)>;

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError(fmt::format("config: {} = '{}' is not {}", key, value, expected));
}

template <class T>
T parse_number(const std::string& key, const std::string& text, const char* expected) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) bad_value(key, text, expected);
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  const double v = parse_number<double>(key, text, "a number");
  if (!std::isfinite(v)) bad_value(key, text, "a finite number");
  return v;
}

std::optional<double> parse_auto(const std::string& key, const std::string& text) {
  if (text == "auto") return std::nullopt;
  return parse_double(key, text);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
  if (text == "false" || text == "no" || text == "off" || text == "0") return false;
  bad_value(key, text, "a boolean");
}

template <class E>
E parse_enum(const std::string& key, const std::string& text,
             const std::map<std::string, E>& names, const char* expected) {
  const auto it = names.find(text);
  if (it == names.end()) bad_value(key, text, expected);
  return it->second;
}

const std::map<std::string, KernelChoice> kKernelNames{
    {"linear", KernelChoice::linear},
    {"se", KernelChoice::se},
    {"matern", KernelChoice::matern},
    {"matern_se", KernelChoice::matern_se}};
const std::map<std::string, MaternOrder> kOrderNames{
    {"1/2", MaternOrder::one_half},
    {"3/2", MaternOrder::three_halves},
    {"5/2", MaternOrder::five_halves}};
const std::map<std::string, MeanFamily> kMeanNames{{"zero", MeanFamily::zero},
                                                   {"constant", MeanFamily::constant}};
const std::map<std::string, ObsFamily> kObsNames{
    {"linear", ObsFamily::linear_gaussian}, {"quadratic", ObsFamily::quadratic_gaussian}};
const std::map<std::string, Resampling> kResamplingNames{{"systematic", Resampling::systematic}};

template <class E>
std::string enum_name(const std::map<std::string, E>& names, E value) {
  for (const auto& [k, v] : names) {
    if (v == value) return k;
  }
  return "?";
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"kernel.family",
       [](IdentifyConfig& c, const std::string& v) {
         c.kernel.family = parse_enum("kernel.family", v, kKernelNames,
                                      "one of linear, se, matern, matern_se");
       }},
      {"kernel.matern_order",
       [](IdentifyConfig& c, const std::string& v) {
         c.kernel.matern_order =
             parse_enum("kernel.matern_order", v, kOrderNames, "one of 1/2, 3/2, 5/2");
       }},
      {"kernel.lengthscale",
       [](IdentifyConfig& c, const std::string& v) {
         c.kernel.lengthscale = parse_auto("kernel.lengthscale", v);
       }},
      {"kernel.signal_variance",
       [](IdentifyConfig& c, const std::string& v) {
         c.kernel.signal_variance = parse_double("kernel.signal_variance", v);
       }},
      {"kernel.linear_variance",
       [](IdentifyConfig& c, const std::string& v) {
         c.kernel.linear_variance = parse_double("kernel.linear_variance", v);
       }},
      {"mean.family",
       [](IdentifyConfig& c, const std::string& v) {
         c.mean.family = parse_enum("mean.family", v, kMeanNames, "one of zero, constant");
       }},
      {"mean.value",
       [](IdentifyConfig& c, const std::string& v) { c.mean.value = parse_double("mean.value", v); }},
      {"obs.family",
       [](IdentifyConfig& c, const std::string& v) {
         c.obs.family = parse_enum("obs.family", v, kObsNames, "one of linear, quadratic");
       }},
      {"obs.coefficient",
       [](IdentifyConfig& c, const std::string& v) {
         c.obs.coefficient = parse_double("obs.coefficient", v);
       }},
      {"obs.learn_coefficient",
       [](IdentifyConfig& c, const std::string& v) {
         c.obs.learn_coefficient = parse_bool("obs.learn_coefficient", v);
       }},
      {"obs.learn_r",
       [](IdentifyConfig& c, const std::string& v) { c.obs.learn_r = parse_bool("obs.learn_r", v); }},
      {"obs.r", [](IdentifyConfig& c, const std::string& v) { c.obs.r = parse_auto("obs.r", v); }},
      {"schedule.exponent",
       [](IdentifyConfig& c, const std::string& v) {
         c.schedule.exponent = parse_double("schedule.exponent", v);
       }},
      {"schedule.burn_in",
       [](IdentifyConfig& c, const std::string& v) {
         c.schedule.burn_in =
             parse_number<std::size_t>("schedule.burn_in", v, "a non-negative integer");
       }},
      {"schedule.prune_epsilon",
       [](IdentifyConfig& c, const std::string& v) {
         c.prune_epsilon = parse_double("schedule.prune_epsilon", v);
       }},
      {"pgas.particles",
       [](IdentifyConfig& c, const std::string& v) {
         c.pgas.particles = parse_number<std::size_t>("pgas.particles", v, "a positive integer");
       }},
      {"pgas.truncation",
       [](IdentifyConfig& c, const std::string& v) {
         c.pgas.truncation =
             parse_number<std::size_t>("pgas.truncation", v, "a non-negative integer");
       }},
      {"pgas.resampling",
       [](IdentifyConfig& c, const std::string& v) {
         c.pgas.resampling = parse_enum("pgas.resampling", v, kResamplingNames, "systematic");
       }},
      {"pgas.parallel",
       [](IdentifyConfig& c, const std::string& v) {
         c.pgas.execution =
             parse_bool("pgas.parallel", v) ? Execution::parallel : Execution::serial;
       }},
      {"optimizer.max_iterations",
       [](IdentifyConfig& c, const std::string& v) {
         c.optimizer.max_iterations =
             parse_number<std::size_t>("optimizer.max_iterations", v, "a positive integer");
       }},
      {"optimizer.gradient_tolerance",
       [](IdentifyConfig& c, const std::string& v) {
         c.optimizer.gradient_tolerance = parse_double("optimizer.gradient_tolerance", v);
       }},
      {"optimizer.sufficient_decrease",
       [](IdentifyConfig& c, const std::string& v) {
         c.optimizer.sufficient_decrease = parse_double("optimizer.sufficient_decrease", v);
       }},
      {"optimizer.curvature",
       [](IdentifyConfig& c, const std::string& v) {
         c.optimizer.curvature = parse_double("optimizer.curvature", v);
       }},
      {"optimizer.max_line_search",
       [](IdentifyConfig& c, const std::string& v) {
         c.optimizer.max_line_search =
             parse_number<std::size_t>("optimizer.max_line_search", v, "a positive integer");
       }},
      {"optimizer.warm_start",
       [](IdentifyConfig& c, const std::string& v) {
         c.optimizer.warm_start = parse_bool("optimizer.warm_start", v);
       }},
      {"run.iterations",
       [](IdentifyConfig& c, const std::string& v) {
         c.run.iterations = parse_number<std::size_t>("run.iterations", v, "a positive integer");
       }},
      {"run.seed",
       [](IdentifyConfig& c, const std::string& v) {
         c.run.seed = parse_number<std::uint64_t>("run.seed", v, "a non-negative integer");
       }},
      {"run.q", [](IdentifyConfig& c, const std::string& v) { c.run.q = parse_auto("run.q", v); }},
      {"run.initial_state_std",
       [](IdentifyConfig& c, const std::string& v) {
         c.run.initial_state_std = parse_double("run.initial_state_std", v);
       }},
      {"run.include_initial_state",
       [](IdentifyConfig& c, const std::string& v) {
         c.run.include_initial_state = parse_bool("run.include_initial_state", v);
       }},
      {"run.average_top",
       [](IdentifyConfig& c, const std::string& v) {
         c.run.average_top =
             parse_number<std::size_t>("run.average_top", v, "a non-negative integer");
       }},
      {"run.threads",
       [](IdentifyConfig& c, const std::string& v) {
         c.run.threads = parse_number<std::size_t>("run.threads", v, "a non-negative integer");
       }},
  };
  return table;
}

void require(bool ok, const char* key, const char* what) {
  if (!ok) throw ConfigError(fmt::format("config: {} {}", key, what));
}

template <class Fn>
void forward_input_error(const char* section, Fn&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    throw ConfigError(fmt::format("config [{}]: {}", section, e.what()));
  }
}

std::string format_auto(const std::optional<double>& v) {
  return v ? fmt::format("{:.17g}", *v) : std::string("auto");
}

}  // namespace

void IdentifyConfig::validate() const {
  require(kernel.signal_variance > 0.0, "kernel.signal_variance", "must be positive");
  require(kernel.linear_variance > 0.0, "kernel.linear_variance", "must be positive");
  require(!kernel.lengthscale || *kernel.lengthscale > 0.0, "kernel.lengthscale",
          "must be positive or auto");
  require(obs.coefficient != 0.0, "obs.coefficient", "must be nonzero");
  require(obs.family != ObsFamily::quadratic_gaussian || obs.coefficient > 0.0,
          "obs.coefficient", "must be positive for the quadratic model");
  require(!obs.r || *obs.r > 0.0, "obs.r", "must be positive or auto");
  require(prune_epsilon >= 0.0 && prune_epsilon < 1.0, "schedule.prune_epsilon",
          "must lie in [0, 1)");
  require(run.iterations >= 1, "run.iterations", "must be at least 1");
  require(!run.q || *run.q > 0.0, "run.q", "must be positive or auto");
  require(run.initial_state_std > 0.0, "run.initial_state_std", "must be positive");
  forward_input_error("schedule", [&] { schedule.validate(); });
  forward_input_error("pgas", [&] { pgas.validate(); });
  forward_input_error("optimizer", [&] { optimizer.validate(); });
}

IdentifyConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ptree_error& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  IdentifyConfig cfg;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw ConfigError(fmt::format("config: key '{}' outside any section", section));
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError(fmt::format("config: unknown key '{}'", full));
      it->second(cfg, node.data());
    }
  }
  cfg.validate();
  return cfg;
}

IdentifyConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config: cannot open '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string to_ini(const IdentifyConfig& c) {
  std::string s;
  s += fmt::format("[kernel]\nfamily = {}\nmatern_order = {}\nlengthscale = {}\n",
      enum_name(kKernelNames, c.kernel.family), enum_name(kOrderNames, c.kernel.matern_order),
      format_auto(c.kernel.lengthscale));
  s += fmt::format("signal_variance = {:.17g}\nlinear_variance = {:.17g}\n\n", c.kernel.signal_variance,
      c.kernel.linear_variance);
  s += fmt::format("[mean]\nfamily = {}\nvalue = {:.17g}\n\n", enum_name(kMeanNames, c.mean.family),
      c.mean.value);
  s += fmt::format("[obs]\nfamily = {}\ncoefficient = {:.17g}\nlearn_coefficient = {}\nlearn_r = {}\nr = {}\n\n",
      enum_name(kObsNames, c.obs.family), c.obs.coefficient, c.obs.learn_coefficient,
      c.obs.learn_r, format_auto(c.obs.r));
  s += fmt::format("[schedule]\nexponent = {:.17g}\nburn_in = {}\nprune_epsilon = {:.17g}\n\n",
      c.schedule.exponent, c.schedule.burn_in, c.prune_epsilon);
  s += fmt::format("[pgas]\nparticles = {}\ntruncation = {}\nresampling = {}\nparallel = {}\n\n",
      c.pgas.particles, c.pgas.truncation, enum_name(kResamplingNames, c.pgas.resampling),
      c.pgas.execution == Execution::parallel);
  s += fmt::format("[optimizer]\nmax_iterations = {}\ngradient_tolerance = {:.17g}\n"
      "sufficient_decrease = {:.17g}\ncurvature = {:.17g}\nmax_line_search = {}\n"
      "warm_start = {}\n\n",
      c.optimizer.max_iterations, c.optimizer.gradient_tolerance,
      c.optimizer.sufficient_decrease, c.optimizer.curvature, c.optimizer.max_line_search,
      c.optimizer.warm_start);
  s += fmt::format("[run]\niterations = {}\nseed = {}\nq = {}\ninitial_state_std = {:.17g}\n"
      "include_initial_state = {}\naverage_top = {}\nthreads = {}\n",
      c.run.iterations, c.run.seed, format_auto(c.run.q), c.run.initial_state_std,
      c.run.include_initial_state, c.run.average_top, c.run.threads);
  return s;
}

}  // namespace gpssm
