#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgm/data.hpp"

namespace lgm {

// Exit codes of the operator surface.
enum ExitCode {
  EXIT_OK = 0,
  EXIT_CONFIG = 2,
  EXIT_DATA = 3,
  EXIT_SAMPLER = 4,
  EXIT_IO = 5,
};

struct RunConfig {
  std::string model;  // bivariate | lasso | missing | quantile
  std::string data_path;
  std::string method;  // is | amis | mh
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_dir = "out";

  int n0 = 800;
  int n = 10000;
  std::vector<int> schedule;  // AMIS; empty = default
  std::optional<double> mh_step_sd;
  int theta_nodes = 9;

  double lambda = 1.0;  // lasso regularization
  int bins = 50;        // quantile RW2 bins

  std::optional<std::string> proposal_family;
  std::optional<double> proposal_nu;
  std::optional<std::vector<double>> proposal_mu0;
  std::optional<std::vector<double>> proposal_sigma0_diag;
  std::optional<double> proposal_sigma0_scale;

  bool emit_joint_kde = false;
  bool emit_pplot = true;
  bool emit_running_ess = true;
  bool emit_quantiles = false;
  std::vector<double> p_list = {0.025, 0.25, 0.5, 0.75, 0.975};
};

// Flat key=value lines, '#' comments.
std::map<std::string, std::string> read_config_file(const std::string& path);

// Validates and applies defaults; every bad field is named individually.
RunConfig parse_config(const std::map<std::string, std::string>& kv);

// Serialized form of the fully resolved config (provenance echo).
std::string resolved_config_text(const RunConfig& cfg);

// End-to-end run; never throws, returns an ExitCode and always tries to
// leave a diagnostics.json behind.
int run(const RunConfig& cfg);

// Recompute diagnostics from <run_dir>/samples.csv.
int diagnose(const std::string& run_dir);

}  // namespace lgm
