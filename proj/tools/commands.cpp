#include "commands.hpp"

#include "conalign/error.hpp"
#include "conalign/io.hpp"
#include "conalign/parallel.hpp"
#include "conalign/population.hpp"
#include "conalign/registration.hpp"
#include "conalign/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace conalign::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using population::AnyWarp;

namespace {

// Recovery thresholds for --assert.
constexpr double kMaxMeanA = 0.10;
constexpr double kMinMeanB = 0.18;
constexpr double kMaxMeanB = 0.30;

/// Reads a JSON object into CLI11 config items. Keys name long options of the
/// active subcommand (dashes or underscores); nested objects name subcommands.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App& root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const auto& res = opt->results();
      if (res.empty() && !default_also) continue;
      const std::string name = opt->get_lnames().front();
      if (res.size() == 1) {
        j[name] = res.front();
      } else if (!res.empty()) {
        j[name] = res;
      } else {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<std::string> active;
    for (const CLI::App* sub : root_.get_subcommands()) active.push_back(sub->get_name());
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object() && root_.get_subcommand_no_throw(key) != nullptr) {
        for (const auto& [k, v] : value.items()) items.push_back(item({key}, k, v));
        continue;
      }
      const std::string name = dashed(key);
      const bool global = root_.get_option_no_throw("--" + name) != nullptr;
      items.push_back(item(global ? std::vector<std::string>{} : active, key, value));
    }
    return items;
  }

 private:
  const CLI::App& root_;

  static std::string dashed(std::string s) {
    for (char& c : s) {
      if (c == '_') c = '-';
    }
    return s;
  }

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  CLI::ConfigItem item(std::vector<std::string> parents, const std::string& key, const json& v) const {
    const CLI::App* target = &root_;
    for (const auto& p : parents) target = target->get_subcommand_no_throw(p);
    const std::string name = dashed(key);
    if (target == nullptr || (target->get_option_no_throw("--" + name) == nullptr && name != "config")) {
      throw CLI::ConversionError("unknown config key '" + key + "'");
    }
    CLI::ConfigItem it;
    it.parents = std::move(parents);
    it.name = name;
    if (v.is_array()) {
      for (const auto& e : v) it.inputs.push_back(scalar(e));
    } else {
      it.inputs.push_back(scalar(v));
    }
    return it;
  }
};

registration::RegistrationConfig registration_config(const Options& o) {
  registration::RegistrationConfig c;
  c.step_size = o.step_size;
  c.tolerance = o.epsilon;
  c.basis_size = o.basis_size;
  c.max_iterations = o.max_iters;
  c.multires = o.multires;
  return c;
}

json trace_json(const registration::Trace& t) {
  return {{"cost_trace", t.cost},       {"gradient_norms", t.gradient_norm}, {"steps", t.step},
          {"iterations", t.iterations}, {"converged", t.converged},          {"stop_reason", t.stop_reason}};
}

void write_any_warp(const fs::path& path, const AnyWarp& w) {
  std::visit([&](const auto& x) { io::write_warp(path, x); }, w);
}

AnyWarp read_any_warp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string header;
  std::getline(in, header);
  if (header == "x,gamma") return io::read_warp1d(path);
  if (header != "index,x,y,z") throw IoError(path.string() + ": unrecognized warp header '" + header + "'");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ++rows;
  }
  if (io::level_for_vertices(rows) >= 0) return io::read_sphere_warp(path);
  return io::read_dual_warp(path);
}

void write_trace_plot(const fs::path& dir, const std::string& stem, const std::vector<double>& values,
                      const std::string& column, const std::string& title) {
  std::vector<double> index(values.size());
  for (std::size_t k = 0; k < index.size(); ++k) index[k] = static_cast<double>(k);
  io::write_csv(dir / (stem + ".csv"), {"iteration", column}, {index, values});
  std::ofstream svg(dir / (stem + ".svg"));
  if (!svg) throw IoError("cannot write " + (dir / (stem + ".svg")).string());
  svg << io::svg_line_plot(values, title, column);
}

std::string subject_id(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subject_%03zu", j);
  return buf;
}

void require_inputs(const Options& o, std::size_t min_count, std::size_t max_count, const char* what) {
  if (o.inputs.size() < min_count || o.inputs.size() > max_count) {
    std::ostringstream msg;
    msg << what << " needs ";
    if (min_count == max_count) {
      msg << min_count;
    } else {
      msg << "at least " << min_count;
    }
    msg << " --input files, got " << o.inputs.size();
    throw ValidationError(msg.str());
  }
  for (const auto& p : o.inputs) {
    if (!fs::is_regular_file(p)) throw IoError("input not found: " + p);
  }
}

void prepare_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::vector<density::DensityField> read_inputs(const Options& o) {
  std::vector<density::DensityField> fs_in;
  for (const auto& p : o.inputs) fs_in.push_back(io::read_density(p));
  for (std::size_t j = 1; j < fs_in.size(); ++j) {
    if (fs_in[j].domain != fs_in[0].domain) {
      throw ValidationError("domain mismatch: " + o.inputs[0] + " is " + fs_in[0].domain.describe() + ", " + o.inputs[j] +
                            " is " + fs_in[j].domain.describe());
    }
  }
  for (std::size_t j = 0; j < fs_in.size(); ++j) {
    try {
      fs_in[j].validate(1e-2);
    } catch (const ValidationError& e) {
      throw ValidationError(o.inputs[j] + ": " + e.what());
    }
  }
  return fs_in;
}

json summary_json(const std::vector<double>& a, const std::vector<double>& b) {
  const auto sa = simulate::mean_sd(a);
  const auto sb = simulate::mean_sd(b);
  const bool pass = sa[0] <= kMaxMeanA && sb[0] >= kMinMeanB && sb[0] <= kMaxMeanB && sa[0] <= 0.5 * sb[0];
  return {{"subjects", a.size()},
          {"mean_a", sa[0]},
          {"sd_a", sa[1]},
          {"mean_b", sb[0]},
          {"sd_b", sb[1]},
          {"thresholds", {{"max_mean_a", kMaxMeanA}, {"mean_b_range", {kMinMeanB, kMaxMeanB}}, {"max_a_over_b", 0.5}}},
          {"pass", pass}};
}

int finish_evaluation(const Options& o, const fs::path& out, const std::vector<double>& a, const std::vector<double>& b) {
  io::write_csv(out / "errors.csv", {"a", "b"}, {a, b});
  const json s = summary_json(a, b);
  io::write_json(out / "summary.json", s);
  std::printf("A = %.4f (%.4f)  B = %.4f (%.4f)\n", s["mean_a"].get<double>(), s["sd_a"].get<double>(),
              s["mean_b"].get<double>(), s["sd_b"].get<double>());
  if (o.assert_thresholds && !s["pass"].get<bool>()) {
    std::fprintf(stderr, "thresholds not met\n");
    return kConvergence;
  }
  return kOk;
}

}  // namespace

int cmd_simulate(const Options& o) {
  const auto domain = density::Domain::parse(o.domain);
  const fs::path out = o.output;
  prepare_output(out);
  simulate::PopulationConfig pc;
  pc.knots = o.knots;
  pc.bandwidth = o.bandwidth;
  pc.sphere_amplitude = o.amplitude;
  const auto pop = simulate::simulate_population(domain, o.subjects, pc, o.seed);
  json subjects = json::array();
  for (std::size_t j = 0; j < pop.observed.size(); ++j) {
    const std::string id = subject_id(j);
    const fs::path original = fs::path("originals") / (id + ".csv");
    const fs::path observed = fs::path("observed") / (id + ".csv");
    const fs::path truth = fs::path("truth") / (id + ".csv");
    io::write_density(out / original, pop.originals[j]);
    io::write_density(out / observed, pop.observed[j]);
    write_any_warp(out / truth, pop.true_warps[j]);
    subjects.push_back({{"id", id}, {"original", original}, {"observed", observed}, {"true_warp", truth}});
  }
  json params = json::array();
  for (const auto& c : pc.params.components) {
    params.push_back({{"count", c.count}, {"mu1", c.mu1}, {"mu2", c.mu2}, {"variance", c.variance}});
  }
  io::write_json(out / "manifest.json", {{"command", "simulate"},
                                         {"domain", domain.describe()},
                                         {"seed", o.seed},
                                         {"knots", o.knots},
                                         {"bandwidth", o.bandwidth},
                                         {"sphere_amplitude", o.amplitude},
                                         {"endpoint_components", params},
                                         {"subjects", subjects}});
  std::printf("wrote %zu subjects on %s to %s\n", pop.observed.size(), domain.describe().c_str(), out.string().c_str());
  return kOk;
}

int cmd_register(const Options& o) {
  require_inputs(o, 2, 2, "register");
  const fs::path out = o.output;
  prepare_output(out);
  const auto fs_in = read_inputs(o);
  const auto cfg = registration_config(o);
  const auto result = registration::register_pair(fs_in[0], fs_in[1], cfg);
  const registration::Trace& trace = std::visit([](const auto& r) -> const registration::Trace& { return r.trace; }, result);
  const AnyWarp w = std::visit([](const auto& r) -> AnyWarp { return r.warp; }, result);
  write_any_warp(out / "warp.csv", w);
  const auto aligned = density::q_unmap(population::act(density::q_map(fs_in[1]), w, cfg));
  io::write_density(out / "aligned.csv", aligned);
  write_trace_plot(out, "cost_trace", trace.cost, "cost", "alignment cost");
  json diag = trace_json(trace);
  diag["domain"] = fs_in[0].domain.describe();
  diag["target"] = o.inputs[0];
  diag["moving"] = o.inputs[1];
  diag["initial_cost"] = trace.cost.front();
  diag["final_cost"] = trace.cost.back();
  io::write_json(out / "diagnostics.json", diag);
  std::printf("cost %.6g -> %.6g in %d iterations (%s)\n", trace.cost.front(), trace.cost.back(), trace.iterations,
              trace.stop_reason.c_str());
  return trace.stop_reason == "max iterations" ? kConvergence : kOk;
}

int cmd_template(const Options& o) {
  require_inputs(o, 2, static_cast<std::size_t>(-1), "template");
  const fs::path out = o.output;
  prepare_output(out);
  const auto fs_in = read_inputs(o);
  population::TemplateConfig cfg;
  cfg.reg = registration_config(o);
  const auto res = population::full_pipeline(fs_in, cfg);
  io::write_density(out / "template.csv", density::q_unmap(res.template_q));
  json subjects = json::array();
  for (std::size_t j = 0; j < fs_in.size(); ++j) {
    const std::string id = fs::path(o.inputs[j]).stem().string();
    const fs::path warp_file = fs::path("warps") / (subject_id(j) + ".csv");
    const fs::path aligned_file = fs::path("aligned") / (subject_id(j) + ".csv");
    const auto& st = res.subjects[j];
    json entry = {{"id", id},
                  {"input", o.inputs[j]},
                  {"failed", st.failed},
                  {"converged", st.converged},
                  {"iterations", st.iterations},
                  {"final_cost", st.final_cost},
                  {"message", st.message}};
    if (!st.failed) {
      write_any_warp(out / warp_file, res.warps[j]);
      io::write_density(out / aligned_file, res.aligned[j]);
      entry["warp"] = warp_file;
      entry["aligned"] = aligned_file;
    }
    subjects.push_back(entry);
  }
  write_trace_plot(out, "karcher_trace", res.update_norms, "update_norm", "mean update norm");
  io::write_json(out / "manifest.json", {{"command", "template"},
                                         {"domain", fs_in[0].domain.describe()},
                                         {"template", "template.csv"},
                                         {"karcher_converged", res.karcher_converged},
                                         {"outer_iterations", res.update_norms.size()},
                                         {"centering_residual", res.centering_residual},
                                         {"subjects", subjects}});
  std::printf("template from %zu subjects, %zu outer iterations\n", fs_in.size(), res.update_norms.size());
  return res.karcher_converged ? kOk : kConvergence;
}

int cmd_evaluate(const Options& o) {
  if (o.inputs.empty()) throw ValidationError("evaluate needs --input warp files");
  if (o.truth.size() != o.inputs.size()) {
    throw ValidationError("evaluate needs one --truth file per --input file (" + std::to_string(o.inputs.size()) +
                          " inputs, " + std::to_string(o.truth.size()) + " truth files)");
  }
  for (const auto& p : o.truth) {
    if (!fs::is_regular_file(p)) throw IoError("truth file not found: " + p);
  }
  for (const auto& p : o.inputs) {
    if (!fs::is_regular_file(p)) throw IoError("input not found: " + p);
  }
  const fs::path out = o.output;
  prepare_output(out);
  std::vector<double> a, b;
  for (std::size_t j = 0; j < o.inputs.size(); ++j) {
    const AnyWarp truth = read_any_warp(o.truth[j]);
    AnyWarp est = read_any_warp(o.inputs[j]);
    if (truth.index() != est.index()) throw ValidationError("evaluate: " + o.inputs[j] + " and " + o.truth[j] + " live on different domains");
    if (o.invert) est = population::invert(est);
    const AnyWarp id = std::visit(
        [](const auto& w) -> AnyWarp {
          using W = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<W, warp::Warp1D>) {
            return warp::Warp1D::identity(w.size());
          } else if constexpr (std::is_same_v<W, warp::SphereWarp>) {
            return warp::SphereWarp::identity(w.ico_ptr());
          } else {
            return warp::DualWarp::identity(w.first.ico_ptr());
          }
        },
        truth);
    a.push_back(population::warp_distance(truth, est));
    b.push_back(population::warp_distance(truth, id));
  }
  return finish_evaluation(o, out, a, b);
}

int cmd_experiment(const Options& o) {
  const auto domain = density::Domain::parse(o.domain);
  if (domain.kind() != density::DomainKind::Interval) throw ValidationError("experiment runs on an interval domain");
  const fs::path out = o.output;
  prepare_output(out);
  simulate::Table1Config cfg;
  cfg.grid_size = domain.size();
  cfg.knots = o.knots;
  cfg.bandwidth = o.bandwidth;
  cfg.tmpl.reg = registration_config(o);
  const auto r = simulate::run_table1_experiment(o.subjects, cfg, o.seed);
  return finish_evaluation(o, out, r.a, r.b);
}

int run(int argc, char** argv) {
  CLI::App app{"Alignment of symmetric connectivity densities by diffeomorphic reparameterization", "conalign"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON file mirroring the flags; flags win");
  app.config_formatter(std::make_shared<JsonConfig>(app));
  Options o;
  app.add_option("--threads", o.threads, "Worker cap, 0 for all cores")->check(CLI::NonNegativeNumber);

  auto common = [&](CLI::App* sub, bool registers) {
    sub->allow_config_extras(CLI::config_extras_mode::error);
    sub->add_option("-o,--output", o.output, "Output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    if (registers) {
      sub->add_option("--step-size", o.step_size, "Gradient step sigma, 0 for the domain default")->check(CLI::NonNegativeNumber);
      sub->add_option("--epsilon", o.epsilon, "Gradient-norm tolerance, 0 for the domain default")->check(CLI::NonNegativeNumber);
      sub->add_option("--basis-size", o.basis_size, "Sine basis size or harmonic degree, 0 for the default")
          ->check(CLI::NonNegativeNumber);
      sub->add_option("--max-iters", o.max_iters, "Iteration cap")->check(CLI::NonNegativeNumber)->capture_default_str();
      sub->add_flag("--multires", o.multires, "Coarse-to-fine sphere registration");
    }
  };

  auto* sim = app.add_subcommand("simulate", "Simulate warped subjects with known warps");
  common(sim, false);
  sim->add_option("--domain", o.domain, "interval:n, sphere:G or dual:G")->capture_default_str();
  sim->add_option("-n,--subjects", o.subjects, "Number of subjects")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--knots", o.knots, "Slope draws per warp")->check(CLI::Range(3, 1000))->capture_default_str();
  sim->add_option("--bandwidth", o.bandwidth, "Kernel bandwidth, 0 for the default rule")->check(CLI::NonNegativeNumber);
  sim->add_option("--amplitude", o.amplitude, "RMS displacement of sphere warps")->check(CLI::NonNegativeNumber);

  auto* reg = app.add_subcommand("register", "Align the second input to the first");
  common(reg, true);
  reg->add_option("-i,--input", o.inputs, "Target then moving density")->required();

  auto* tpl = app.add_subcommand("template", "Population template and per-subject warps");
  common(tpl, true);
  tpl->add_option("-i,--input", o.inputs, "Subject densities")->required();

  auto* eva = app.add_subcommand("evaluate", "Warp recovery error against known warps");
  common(eva, false);
  eva->add_option("-i,--input", o.inputs, "Estimated warps, one per subject")->required();
  eva->add_option("--truth", o.truth, "True warps in the same order")->required();
  eva->add_flag("--invert,!--no-invert", o.invert, "Invert the estimates before comparing (template warps)");
  eva->add_flag("--assert", o.assert_thresholds, "Exit 3 unless the recovery thresholds hold");

  auto* exp = app.add_subcommand("experiment", "Simulation study: simulate, build the template, score recovery");
  common(exp, true);
  exp->add_option("--domain", o.domain, "interval:n")->capture_default_str();
  exp->add_option("-n,--subjects", o.subjects, "Number of subjects")->check(CLI::Range(2, 100000))->capture_default_str();
  exp->add_option("--knots", o.knots, "Slope draws per warp")->check(CLI::Range(3, 1000))->capture_default_str();
  exp->add_option("--bandwidth", o.bandwidth, "Kernel bandwidth, 0 for the default rule")->check(CLI::NonNegativeNumber);
  exp->add_flag("--assert", o.assert_thresholds, "Exit 3 unless the recovery thresholds hold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    set_max_threads(o.threads);
    if (sim->parsed()) return cmd_simulate(o);
    if (reg->parsed()) return cmd_register(o);
    if (tpl->parsed()) return cmd_template(o);
    if (eva->parsed()) return cmd_evaluate(o);
    return cmd_experiment(o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
}

}  // namespace conalign::cli
