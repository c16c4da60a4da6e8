#include "rfx/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rfx/error.hpp"

namespace rfx {

namespace {

const char* regularity_name(RegularityClass c) { return c == RegularityClass::kExplicit ? "explicit" : "implicit"; }

const char* status_name(RunStatus s) { return s == RunStatus::kCompleted ? "completed" : "budget_abort"; }

const char* verdict_name(LemmaVerdict v) {
  switch (v) {
    case LemmaVerdict::kPass:
      return "pass";
    case LemmaVerdict::kFail:
      return "fail";
    case LemmaVerdict::kPreconditionUnmet:
      return "precondition-unmet";
  }
  return "?";
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::kInvalidInput, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("field '") + key + "': " + e.what());
  }
}

Json vec(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector to_vec(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

Json env_to_json(const LinearMdp& env) {
  Json j;
  j["horizon"] = env.horizon;
  j["n_states"] = env.n_states;
  j["n_actions"] = env.n_actions;
  std::vector<int> dims;
  for (int t = 0; t < env.horizon; ++t) dims.push_back(env.dim(t));
  j["dims"] = dims;
  Json feats = Json::array();
  for (int t = 0; t < env.horizon; ++t) {
    Json ft = Json::array();
    for (int s = 0; s < env.n_states; ++s) {
      Json fs = Json::array();
      for (int a = 0; a < env.n_actions; ++a) fs.push_back(vec(env.phi(t, s, a)));
      ft.push_back(std::move(fs));
    }
    feats.push_back(std::move(ft));
  }
  j["features"] = std::move(feats);
  Json trans = Json::array();
  for (int t = 0; t + 1 < env.horizon; ++t) {
    Json tt = Json::array();
    for (int s = 0; s < env.n_states; ++s) {
      Json ts = Json::array();
      for (int a = 0; a < env.n_actions; ++a) ts.push_back(vec(env.next_dist(t, s, a).transpose()));
      tt.push_back(std::move(ts));
    }
    trans.push_back(std::move(tt));
  }
  j["transitions"] = std::move(trans);
  j["start_dist"] = vec(env.start_dist);
  return j;
}

LinearMdp env_from_json(const Json& j) {
  LinearMdp env;
  env.horizon = field<int>(j, "horizon");
  env.n_states = field<int>(j, "n_states");
  env.n_actions = field<int>(j, "n_actions");
  require(env.horizon >= 1 && env.n_states >= 1 && env.n_actions >= 1, "env: sizes must be positive");
  const auto dims = field<std::vector<int>>(j, "dims");
  require(static_cast<int>(dims.size()) == env.horizon, "env: dims must have one entry per timestep");
  const auto feats = field<std::vector<std::vector<std::vector<std::vector<double>>>>>(j, "features");
  require(static_cast<int>(feats.size()) == env.horizon, "env: features must have one entry per timestep");
  const int sa = env.n_states * env.n_actions;
  for (int t = 0; t < env.horizon; ++t) {
    require(dims[t] >= 1, "env: dims must be positive");
    require(static_cast<int>(feats[t].size()) == env.n_states, "env: features[t] must have n_states entries");
    Matrix f(sa, dims[t]);
    for (int s = 0; s < env.n_states; ++s) {
      require(static_cast<int>(feats[t][s].size()) == env.n_actions, "env: features[t][s] must have n_actions entries");
      for (int a = 0; a < env.n_actions; ++a) {
        require(static_cast<int>(feats[t][s][a].size()) == dims[t], "env: feature length differs from dims[t]");
        f.row(env.row(s, a)) = to_vec(feats[t][s][a]).transpose();
      }
    }
    env.features.push_back(std::move(f));
  }
  const auto trans = field<std::vector<std::vector<std::vector<std::vector<double>>>>>(j, "transitions");
  require(static_cast<int>(trans.size()) == env.horizon - 1, "env: transitions must have horizon-1 entries");
  for (int t = 0; t + 1 < env.horizon; ++t) {
    require(static_cast<int>(trans[t].size()) == env.n_states, "env: transitions[t] must have n_states entries");
    Matrix p(sa, env.n_states);
    for (int s = 0; s < env.n_states; ++s) {
      require(static_cast<int>(trans[t][s].size()) == env.n_actions,
              "env: transitions[t][s] must have n_actions entries");
      for (int a = 0; a < env.n_actions; ++a) {
        require(static_cast<int>(trans[t][s][a].size()) == env.n_states,
                "env: transition row length differs from n_states");
        p.row(env.row(s, a)) = to_vec(trans[t][s][a]).transpose();
      }
    }
    env.transitions.push_back(std::move(p));
  }
  const auto rho = field<std::vector<double>>(j, "start_dist");
  require(static_cast<int>(rho.size()) == env.n_states, "env: start_dist length differs from n_states");
  env.start_dist = to_vec(rho);
  return env;
}

Json reward_to_json(const RewardSpec& reward) {
  Json j;
  Json th = Json::array();
  for (const auto& v : reward.theta) th.push_back(vec(v));
  j["theta_r"] = std::move(th);
  j["class"] = regularity_name(reward.regularity);
  if (reward.delta) {
    Json dt = Json::array();
    for (const auto& v : *reward.delta) dt.push_back(vec(v));
    j["delta_table"] = std::move(dt);
  }
  if (!reward.misspec_bound.empty()) j["misspec_bound"] = reward.misspec_bound;
  return j;
}

RewardSpec reward_from_json(const Json& j, const LinearMdp& env) {
  RewardSpec r;
  const auto th = field<std::vector<std::vector<double>>>(j, "theta_r");
  require(static_cast<int>(th.size()) == env.horizon, "reward: theta_r must have one entry per timestep");
  for (int t = 0; t < env.horizon; ++t) {
    require(static_cast<int>(th[t].size()) == env.dim(t), "reward: theta_r[t] length differs from d_t");
    r.theta.push_back(to_vec(th[t]));
  }
  const auto cls = field<std::string>(j, "class");
  if (cls == "explicit") {
    r.regularity = RegularityClass::kExplicit;
  } else if (cls == "implicit") {
    r.regularity = RegularityClass::kImplicit;
  } else {
    fail(ErrorKind::kInvalidInput, "reward: class must be 'explicit' or 'implicit'");
  }
  if (j.contains("delta_table") && !j.at("delta_table").is_null()) {
    const auto dt = field<std::vector<std::vector<double>>>(j, "delta_table");
    require(static_cast<int>(dt.size()) == env.horizon, "reward: delta_table must have one entry per timestep");
    std::vector<Vector> delta;
    for (int t = 0; t < env.horizon; ++t) {
      require(static_cast<int>(dt[t].size()) == env.n_states * env.n_actions,
              "reward: delta_table[t] must have n_states*n_actions entries");
      delta.push_back(to_vec(dt[t]));
    }
    r.delta = std::move(delta);
  }
  if (j.contains("misspec_bound")) r.misspec_bound = field<std::vector<double>>(j, "misspec_bound");
  return r;
}

Json record_to_json(const ExplorationRecord& r) {
  Json j;
  j["phase"] = r.phase;
  j["episode"] = r.episode;
  j["epoch"] = r.epoch;
  j["sigma"] = r.sigma;
  j["t"] = r.t;
  j["state"] = r.state;
  j["action"] = r.action;
  j["next_state"] = r.next_state == kNoState ? Json(nullptr) : Json(r.next_state);
  return j;
}

ExplorationRecord record_from_json(const Json& j) {
  ExplorationRecord r;
  r.phase = field<int>(j, "phase");
  r.episode = field<long>(j, "episode");
  r.epoch = field<int>(j, "epoch");
  r.sigma = field<double>(j, "sigma");
  r.t = field<int>(j, "t");
  r.state = field<int>(j, "state");
  r.action = field<int>(j, "action");
  r.next_state = j.contains("next_state") && !j.at("next_state").is_null() ? field<int>(j, "next_state") : kNoState;
  return r;
}

Json report_to_json(const RunReport& report) {
  Json j;
  j["status"] = status_name(report.status);
  j["total_episodes"] = report.total_episodes;
  j["bound_shape"] = report.bound_shape;
  j["warnings"] = report.warnings;
  Json phases = Json::array();
  for (const auto& p : report.phases) {
    Json jp;
    jp["phase"] = p.phase;
    jp["episodes"] = p.episodes;
    jp["planned_episodes"] = p.planned_episodes;
    jp["resamples"] = p.resamples;
    jp["potential_sum"] = p.potential_sum;
    jp["log_det_ratio"] = p.log_det_ratio;
    jp["potential_ok"] = p.potential_ok;
    jp["status"] = status_name(p.status);
    jp["lambda_min_final"] = p.lambda_min.empty() ? Json(nullptr) : Json(p.lambda_min.back());
    Json epochs = Json::array();
    for (const auto& e : p.epochs) {
      epochs.push_back({{"epoch", e.epoch},
                        {"sigma", e.sigma},
                        {"k_max", e.k_max},
                        {"episodes", e.episodes},
                        {"resamples", e.resamples},
                        {"lambda_min_start", e.lambda_min_start},
                        {"lambda_min_end", e.lambda_min_end}});
    }
    jp["epochs"] = std::move(epochs);
    phases.push_back(std::move(jp));
  }
  j["phases"] = std::move(phases);
  return j;
}

Json lemma_to_json(const LemmaTestResult& r) {
  return {{"lemma", r.lemma},       {"trials", r.trials},       {"rate", r.rate},
          {"bound", r.bound},       {"stderr", r.stderr_},      {"lower_bound", r.lower_bound},
          {"verdict", verdict_name(r.verdict)}, {"detail", r.detail}};
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::kIo, "read failed: " + path.string());
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::kIo, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kInvalidInput, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string dataset_to_jsonl(const ExplorationDataset& data) {
  std::string out;
  for (const auto& r : data.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

ExplorationDataset dataset_from_jsonl(const std::string& text, int horizon) {
  ExplorationDataset data{horizon, {}};
  std::istringstream in(text);
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::kInvalidInput, "dataset line " + std::to_string(n) + ": " + e.what());
    }
    ExplorationRecord r = record_from_json(j);
    require(r.t >= 0 && r.t < horizon, "dataset line " + std::to_string(n) + ": timestep out of range");
    data.records.push_back(r);
  }
  return data;
}

void save_env(const std::filesystem::path& path, const LinearMdp& env) { write_json(path, env_to_json(env)); }

LinearMdp load_env(const std::filesystem::path& path) { return env_from_json(read_json(path)); }

void save_dataset(const std::filesystem::path& path, const ExplorationDataset& data) {
  write_text(path, dataset_to_jsonl(data));
}

ExplorationDataset load_dataset(const std::filesystem::path& path, int horizon) {
  return dataset_from_jsonl(read_text(path), horizon);
}

std::string csv_row(const EvalRow& row) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu,%s,%ld,%.17g,%d,%.17g,%.17g,%.17g,%.3f",
                static_cast<unsigned long long>(row.seed), row.algorithm.c_str(), row.episodes_used, row.epsilon,
                row.reward_id, row.v_star, row.v_pi, row.suboptimality, row.wall_time_ms);
  return buf;
}

}  // namespace rfx
