#include "lgm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "lgm/diagnostics.hpp"
#include "lgm/errors.hpp"
#include "lgm/marginals.hpp"
#include "lgm/models.hpp"
#include "lgm/samplers.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace lgm {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

long to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(ln) +
                        ": expected key=value");
    auto trim = [](std::string s) {
      const auto x = s.find_first_not_of(" \t\r");
      const auto y = s.find_last_not_of(" \t\r");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

RunConfig parse_config(const std::map<std::string, std::string>& kv) {
  static const std::set<std::string> known = {
      "model",          "data",
      "method",         "seed",
      "workers",        "out",
      "sampler.N0",     "sampler.N",
      "sampler.schedule", "sampler.mh_step_sd",
      "fitter.theta_nodes", "model.lambda",
      "model.bins",     "proposal.family",
      "proposal.nu",    "proposal.mu0",
      "proposal.sigma0_diag", "proposal.sigma0_scale",
      "emit.joint_kde", "emit.pplot",
      "emit.running_ess", "emit.quantiles",
      "quantile.p_list"};
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");

  RunConfig cfg;
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  if (auto v = get("model")) cfg.model = *v;
  if (auto v = get("data")) cfg.data_path = *v;
  if (auto v = get("method")) cfg.method = *v;
  if (auto v = get("seed")) cfg.seed = static_cast<std::uint64_t>(to_int("seed", *v));
  if (auto v = get("workers")) cfg.workers = static_cast<int>(to_int("workers", *v));
  if (auto v = get("out")) cfg.out_dir = *v;
  if (auto v = get("sampler.N0")) cfg.n0 = static_cast<int>(to_int("sampler.N0", *v));
  if (auto v = get("sampler.N")) cfg.n = static_cast<int>(to_int("sampler.N", *v));
  if (auto v = get("sampler.schedule")) {
    cfg.schedule.clear();
    for (double d : to_list("sampler.schedule", *v)) {
      if (d < 1 || d != std::floor(d))
        throw ConfigError("sampler.schedule: entries must be positive integers");
      cfg.schedule.push_back(static_cast<int>(d));
    }
  }
  if (auto v = get("sampler.mh_step_sd"))
    cfg.mh_step_sd = to_double("sampler.mh_step_sd", *v);
  if (auto v = get("fitter.theta_nodes"))
    cfg.theta_nodes = static_cast<int>(to_int("fitter.theta_nodes", *v));
  if (auto v = get("model.lambda")) cfg.lambda = to_double("model.lambda", *v);
  if (auto v = get("model.bins")) cfg.bins = static_cast<int>(to_int("model.bins", *v));
  if (auto v = get("proposal.family")) {
    if (*v != "gaussian" && *v != "student_t")
      throw ConfigError("proposal.family: must be gaussian or student_t");
    cfg.proposal_family = *v;
  }
  if (auto v = get("proposal.nu")) cfg.proposal_nu = to_double("proposal.nu", *v);
  if (auto v = get("proposal.mu0")) cfg.proposal_mu0 = to_list("proposal.mu0", *v);
  if (auto v = get("proposal.sigma0_diag"))
    cfg.proposal_sigma0_diag = to_list("proposal.sigma0_diag", *v);
  if (auto v = get("proposal.sigma0_scale"))
    cfg.proposal_sigma0_scale = to_double("proposal.sigma0_scale", *v);
  if (auto v = get("emit.joint_kde")) cfg.emit_joint_kde = to_bool("emit.joint_kde", *v);
  if (auto v = get("emit.pplot")) cfg.emit_pplot = to_bool("emit.pplot", *v);
  if (auto v = get("emit.running_ess"))
    cfg.emit_running_ess = to_bool("emit.running_ess", *v);
  if (auto v = get("emit.quantiles")) cfg.emit_quantiles = to_bool("emit.quantiles", *v);
  if (auto v = get("quantile.p_list")) cfg.p_list = to_list("quantile.p_list", *v);

  if (cfg.model.empty()) throw ConfigError("model: required");
  static const std::set<std::string> models = {"bivariate", "lasso", "missing",
                                               "quantile"};
  if (!models.count(cfg.model))
    throw ConfigError("model: unknown model '" + cfg.model + "'");
  if (cfg.data_path.empty()) throw ConfigError("data: required");
  if (cfg.method != "is" && cfg.method != "amis" && cfg.method != "mh")
    throw ConfigError("method: must be is, amis or mh");
  if (cfg.workers < 1) throw ConfigError("workers: must be >= 1");
  if (cfg.n0 < 1) throw ConfigError("sampler.N0: must be >= 1");
  if (cfg.n < 1) throw ConfigError("sampler.N: must be >= 1");
  if (cfg.theta_nodes < 1 || cfg.theta_nodes % 2 == 0)
    throw ConfigError("fitter.theta_nodes: must be odd and >= 1");
  if (cfg.lambda <= 0.0) throw ConfigError("model.lambda: must be positive");
  for (double p : cfg.p_list)
    if (!(p > 0.0 && p < 1.0))
      throw ConfigError("quantile.p_list: probabilities must be in (0, 1)");
  return cfg;
}

std::string resolved_config_text(const RunConfig& cfg) {
  std::ostringstream os;
  auto list = [](const auto& v) {
    std::ostringstream s;
    for (size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << fmt(v[i]);
    return s.str();
  };
  os << "data=" << cfg.data_path << "\n";
  os << "emit.joint_kde=" << (cfg.emit_joint_kde ? "true" : "false") << "\n";
  os << "emit.pplot=" << (cfg.emit_pplot ? "true" : "false") << "\n";
  os << "emit.quantiles=" << (cfg.emit_quantiles ? "true" : "false") << "\n";
  os << "emit.running_ess=" << (cfg.emit_running_ess ? "true" : "false") << "\n";
  os << "fitter.theta_nodes=" << cfg.theta_nodes << "\n";
  os << "method=" << cfg.method << "\n";
  os << "model=" << cfg.model << "\n";
  os << "model.bins=" << cfg.bins << "\n";
  os << "model.lambda=" << fmt(cfg.lambda) << "\n";
  if (cfg.proposal_family) os << "proposal.family=" << *cfg.proposal_family << "\n";
  if (cfg.proposal_mu0) os << "proposal.mu0=" << list(*cfg.proposal_mu0) << "\n";
  if (cfg.proposal_nu) os << "proposal.nu=" << fmt(*cfg.proposal_nu) << "\n";
  if (cfg.proposal_sigma0_diag)
    os << "proposal.sigma0_diag=" << list(*cfg.proposal_sigma0_diag) << "\n";
  if (cfg.proposal_sigma0_scale)
    os << "proposal.sigma0_scale=" << fmt(*cfg.proposal_sigma0_scale) << "\n";
  os << "out=" << cfg.out_dir << "\n";
  os << "quantile.p_list=" << list(cfg.p_list) << "\n";
  if (cfg.mh_step_sd) os << "sampler.mh_step_sd=" << fmt(*cfg.mh_step_sd) << "\n";
  os << "sampler.N=" << cfg.n << "\n";
  os << "sampler.N0=" << cfg.n0 << "\n";
  {
    const auto sched = cfg.schedule.empty() && cfg.method == "amis"
                           ? default_amis_schedule()
                           : cfg.schedule;
    if (!sched.empty()) os << "sampler.schedule=" << list(sched) << "\n";
  }
  os << "seed=" << cfg.seed << "\n";
  os << "workers=" << cfg.workers << "\n";
  return os.str();
}

namespace {

ModelSetup build_setup(const RunConfig& cfg, const Dataset& data) {
  if (cfg.model == "bivariate") return bivariate_linear_adapter(data);
  if (cfg.model == "lasso") return lasso_adapter(data, cfg.lambda);
  if (cfg.model == "missing") return missing_covariate_adapter(data);
  return quantile_rw2_adapter(data, cfg.bins);
}

void apply_proposal_overrides(const RunConfig& cfg, ModelSetup& setup) {
  const int d = setup.g0.dim();
  if (cfg.proposal_family)
    setup.g0.family = *cfg.proposal_family == "gaussian"
                          ? ProposalFamily::Gaussian
                          : ProposalFamily::StudentT;
  if (cfg.proposal_nu) setup.g0.nu = *cfg.proposal_nu;
  if (cfg.proposal_mu0) {
    if (static_cast<int>(cfg.proposal_mu0->size()) != d)
      throw ConfigError("proposal.mu0: expected length " + std::to_string(d));
    setup.g0.mu = Eigen::Map<const Vector>(cfg.proposal_mu0->data(), d);
  }
  if (cfg.proposal_sigma0_diag) {
    if (static_cast<int>(cfg.proposal_sigma0_diag->size()) != d)
      throw ConfigError("proposal.sigma0_diag: expected length " +
                        std::to_string(d));
    setup.g0.sigma = Eigen::Map<const Vector>(cfg.proposal_sigma0_diag->data(), d)
                         .asDiagonal();
  }
  if (cfg.proposal_sigma0_scale)
    setup.g0.sigma = *cfg.proposal_sigma0_scale * Matrix::Identity(d, d);
  if (cfg.mh_step_sd)
    setup.mh_step_sigma =
        (*cfg.mh_step_sd) * (*cfg.mh_step_sd) * Matrix::Identity(d, d);
}

void write_samples_csv(const fs::path& path,
                       const std::vector<WeightedSample>& samples,
                       const Vector& weights,
                       const std::vector<std::string>& z_names) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "iteration,index";
  for (const auto& nm : z_names) out << "," << nm;
  out << ",log_evidence,log_prior,weight\n";
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out << s.round << "," << s.index;
    for (int k = 0; k < s.z.size(); ++k) out << "," << fmt(s.z[k]);
    out << "," << fmt(s.log_evidence) << "," << fmt(s.log_prior) << ","
        << fmt(weights[static_cast<int>(i)]) << "\n";
  }
}

void write_marginal_csv(const fs::path& path, const Vector& x, const Vector& f) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "abscissa,density\n";
  for (int i = 0; i < x.size(); ++i)
    out << fmt(x[i]) << "," << fmt(f[i]) << "\n";
}

}  // namespace

int run(const RunConfig& cfg) {
  json diag;
  diag["method"] = cfg.method;
  diag["model"] = cfg.model;
  diag["status"] = "failed";
  const fs::path out_dir(cfg.out_dir);

  auto flush_diag = [&]() {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream f(out_dir / "diagnostics.json");
    f << diag.dump(2) << "\n";
  };

  try {
    fs::create_directories(out_dir);
    {
      std::ofstream echo(out_dir / "config_resolved.txt");
      if (!echo) throw Error("cannot write config echo");
      echo << resolved_config_text(cfg);
    }

    const Dataset data = read_csv(cfg.data_path);
    ModelSetup setup = build_setup(cfg, data);
    apply_proposal_overrides(cfg, setup);
    const int d = setup.g0.dim();

    SamplerConfig scfg;
    scfg.N0 = cfg.n0;
    scfg.N = cfg.n;
    scfg.schedule = cfg.schedule;
    scfg.seed = cfg.seed;
    scfg.workers = cfg.workers;
    scfg.mh_step_sigma = setup.mh_step_sigma;
    scfg.fitter.theta_nodes = cfg.theta_nodes;

    std::vector<WeightedSample> samples;
    Vector weights;
    double runtime = 0.0;
    int n_failed = 0;
    int n_drawn = 0;
    std::vector<int> schedule_used;
    std::vector<std::string> warnings;
    bool mh = false;
    double acceptance = 0.0;

    if (cfg.method == "is") {
      scfg.method = Method::IS;
      WeightedSampleSet set = run_is(setup.target, setup.g0, scfg);
      weights = set.normalized_weights();
      samples = std::move(set.samples);
      runtime = set.runtime_seconds;
      n_failed = set.n_failed_fits;
      n_drawn = cfg.n0 + cfg.n;
      schedule_used = set.counts;
      warnings = set.warnings;
    } else if (cfg.method == "amis") {
      scfg.method = Method::AMIS;
      WeightedSampleSet set = run_amis(setup.target, setup.g0, scfg);
      weights = set.normalized_weights();
      samples = std::move(set.samples);
      runtime = set.runtime_seconds;
      n_failed = set.n_failed_fits;
      schedule_used = set.counts;
      for (int c : set.counts) n_drawn += c;
      warnings = set.warnings;
    } else {
      scfg.method = Method::MH;
      mh = true;
      SampleChain chain = run_mh(setup.target, scfg, setup.mh_z0);
      samples = std::move(chain.states);
      weights = Vector::Constant(static_cast<int>(samples.size()),
                                 1.0 / samples.size());
      runtime = chain.runtime_seconds;
      n_failed = chain.n_failed_fits;
      n_drawn = cfg.n + chain.burn_in;
      acceptance = chain.acceptance_rate;
      diag["acceptance_rate"] = acceptance;
    }

    write_samples_csv(out_dir / "samples.csv", samples, weights,
                      setup.target.z_names);

    // Marginals: KDE for the conditioning parameters, mixed conditional
    // grids for everything the fitter integrated out.
    fs::create_directories(out_dir / "marginals");
    Matrix zmat(static_cast<int>(samples.size()), d);
    for (size_t i = 0; i < samples.size(); ++i)
      zmat.row(static_cast<int>(i)) = samples[i].z;
    for (int k = 0; k < d; ++k) {
      const auto kde = weighted_kde_1d(zmat.col(k), weights);
      write_marginal_csv(out_dir / "marginals" /
                             (setup.target.z_names[k] + ".csv"),
                         kde.abscissae_x, kde.densities);
    }
    std::set<std::string> fitted_params;
    for (const auto& s : samples)
      if (s.fit_ok)
        for (const auto& [name, mg] : s.fit.marginals) fitted_params.insert(name);
    for (const auto& name : fitted_params) {
      // Samples lacking the grid (failed fits) carry zero weight.
      std::vector<WeightedSample> with;
      std::vector<double> w;
      for (size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].fit.marginals.count(name)) {
          with.push_back(samples[i]);
          w.push_back(weights[static_cast<int>(i)]);
        }
      }
      Vector wv = Eigen::Map<Vector>(w.data(), static_cast<int>(w.size()));
      if (wv.sum() <= 0.0) continue;
      wv /= wv.sum();
      const MixedMarginal mm = mix_marginals(with, wv, name);
      write_marginal_csv(out_dir / "marginals" / (name + ".csv"), mm.abscissae,
                         mm.densities);
    }

    if (cfg.emit_joint_kde && d >= 2) {
      const auto kde = weighted_kde_2d(zmat.leftCols(2), weights);
      std::ofstream out(out_dir / ("joint_" + setup.target.z_names[0] + "_" +
                                   setup.target.z_names[1] + ".csv"));
      out << setup.target.z_names[0] << "," << setup.target.z_names[1]
          << ",density\n";
      for (int i = 0; i < kde.abscissae_x.size(); ++i)
        for (int j = 0; j < kde.abscissae_y.size(); ++j)
          out << fmt(kde.abscissae_x[i]) << "," << fmt(kde.abscissae_y[j]) << ","
              << fmt(kde.densities_2d(i, j)) << "\n";
    }

    if (cfg.emit_pplot) {
      for (int k = 0; k < d; ++k) {
        const auto pts = probability_plot(zmat.col(k), weights);
        std::ofstream out(out_dir /
                          ("pplot_" + setup.target.z_names[k] + ".csv"));
        out << "empirical_cdf,theoretical_cdf\n";
        for (const auto& [emp, theo] : pts)
          out << fmt(emp) << "," << fmt(theo) << "\n";
      }
    }

    if (cfg.emit_running_ess) {
      const Vector ress = running_ess(weights);
      std::ofstream out(out_dir / "running_ess.csv");
      out << "k,ess\n";
      for (int i = 0; i < ress.size(); ++i)
        out << (i + 1) << "," << fmt(ress[i]) << "\n";
    }

    if (cfg.emit_quantiles && cfg.model == "quantile") {
      const Vector x = data.col("x");
      const Vector centers = rw2_bin_centers(x, cfg.bins);
      const double x_mean = x.mean();
      const double x_sd = std::sqrt((x.array() - x_mean).square().sum() /
                                    (x.size() - 1));
      const Vector xs_centers = (centers.array() - x_mean) / x_sd;
      Vector f = Vector::Zero(cfg.bins);
      double mu0 = 0.0, alpha = 0.0, beta = 0.0;
      for (size_t i = 0; i < samples.size(); ++i) {
        const double w = weights[static_cast<int>(i)];
        if (w == 0.0 || !samples[i].fit_ok) continue;
        f += w * samples[i].fit.smooth_mean;
        alpha += w * samples[i].z[0];
        beta += w * samples[i].z[1];
        const auto it = samples[i].fit.marginals.find("mu0");
        if (it != samples[i].fit.marginals.end()) mu0 += w * it->second.mean();
      }
      std::ofstream out(out_dir / "quantiles.csv");
      out << "x";
      for (double p : cfg.p_list) out << ",p" << p;
      out << "\n";
      std::vector<Vector> curves;
      for (double p : cfg.p_list)
        curves.push_back(quantile_curve(mu0, f, xs_centers, alpha, beta, p));
      for (int i = 0; i < cfg.bins; ++i) {
        out << fmt(centers[i]);
        for (const auto& c : curves) out << "," << fmt(c[i]);
        out << "\n";
      }
    }

    // Diagnostics last so the fit-storm verdict covers the whole run.
    diag["ess"] = ess(weights);
    json neh = json::object();
    for (int k = 0; k < d; ++k) {
      if (mh) {
        neh[setup.target.z_names[k]] = mh_effective_size(zmat.col(k));
      } else {
        neh[setup.target.z_names[k]] = ne_h(weights, zmat.col(k));
      }
    }
    diag["ne_h"] = neh;
    diag["mh_adjusted"] = mh;
    diag["n_failed_fits"] = n_failed;
    diag["n_drawn"] = n_drawn;
    diag["runtime_seconds"] = runtime;
    diag["schedule"] = schedule_used;
    diag["warnings"] = warnings;

    if (n_failed * 2 > n_drawn) {
      diag["failure"] = "fit-storm: more than half of the conditional fits failed";
      flush_diag();
      return EXIT_SAMPLER;
    }
    diag["status"] = "ok";
    flush_diag();
    return EXIT_OK;
  } catch (const ConfigError& e) {
    diag["failure"] = e.what();
    flush_diag();
    return EXIT_CONFIG;
  } catch (const DataError& e) {
    diag["failure"] = e.what();
    flush_diag();
    return EXIT_DATA;
  } catch (const SamplerError& e) {
    diag["failure"] = e.what();
    flush_diag();
    return EXIT_SAMPLER;
  } catch (const std::exception& e) {
    diag["failure"] = e.what();
    flush_diag();
    return EXIT_IO;
  }
}

int diagnose(const std::string& run_dir) {
  try {
    const fs::path dir(run_dir);
    const Dataset table = read_csv((dir / "samples.csv").string());
    std::vector<std::string> z_names;
    for (const auto& c : table.columns)
      if (c != "iteration" && c != "index" && c != "log_evidence" &&
          c != "log_prior" && c != "weight")
        z_names.push_back(c);
    const Vector w = table.col("weight");

    json diag;
    const fs::path diag_path = dir / "diagnostics.json";
    if (fs::exists(diag_path)) {
      std::ifstream in(diag_path);
      try {
        in >> diag;
      } catch (const json::exception&) {
        diag = json::object();
      }
    }
    diag["ess"] = ess(w);
    json neh = json::object();
    for (const auto& nm : z_names) neh[nm] = ne_h(w, table.col(nm));
    diag["ne_h"] = neh;
    diag["recomputed"] = true;

    std::ofstream out(diag_path);
    out << diag.dump(2) << "\n";
    std::cout << diag.dump(2) << std::endl;
    return EXIT_OK;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return EXIT_DATA;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return EXIT_IO;
  }
}

}  // namespace lgm
