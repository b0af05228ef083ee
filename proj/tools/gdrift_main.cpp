#include "gdrift/config.hpp"
#include "gdrift/drift_field.hpp"
#include "gdrift/io.hpp"
#include "gdrift/mgda.hpp"
#include "gdrift/trainer.hpp"
#include "gdrift/transport.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gdrift;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

// Usage-level failure: bad flags, config or input files.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config document");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--set", c.sets, "dotted key=value override (repeatable)");
}

ExperimentConfig load(const Common& c) {
  std::string doc;
  if (!c.config.empty()) {
    if (!fs::is_regular_file(c.config)) throw ConfigError("config file not found: " + c.config);
    doc = read_file(c.config);
  }
  std::vector<std::string> sets = c.sets;
  if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
  return resolve_config(doc, sets);
}

fs::path prepare_out(const Common& c, const ExperimentConfig& cfg) {
  const fs::path out(c.out);
  fs::create_directories(out);
  write_file_atomic(out / "config.json", config_to_string(cfg));
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int cmd_transport(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const fs::path out = prepare_out(c, cfg);
  const ParticleCloud cloud = mixture_cloud(cfg.transport, cfg.seed);
  const TransportReport r = run_transport(cloud, cfg.transport.steps, cfg.transport.drift);
  write_file_atomic(out / "transport.csv", transport_csv(r.energy_distance, r.mean_drift_norm));
  write_tensor(out / "particles.dtf", to_tensor_file(r.final_particles));
  std::cout << "energy distance " << format_double(r.energy_distance.front()) << " -> "
            << format_double(r.energy_distance.back()) << "\n";
  return kOk;
}

int cmd_drift_field(const Common& c, const std::string& h, const std::string& pos, const std::string& neg,
                    const std::string& family) {
  const ExperimentConfig cfg = load(c);
  const auto fam = family_from_name(family);
  if (!fam) throw UsageError("unknown family \"" + family + "\"");
  FeatureTriplet t;
  t.family = *fam;
  t.h = tensor3_from_file(read_tensor(h));
  t.u_pos = tensor3_from_file(read_tensor(pos));
  t.u_neg = tensor3_from_file(read_tensor(neg));
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path out = prepare_out(c, cfg);
  const DriftField f = compute_drift_field(t, cfg.drift);
  write_tensor(out / "field.dtf", to_tensor_file(f.v));
  const double rms = std::sqrt(f.v.squared_norm() / static_cast<double>(std::max<std::size_t>(f.v.size(), 1)));
  const json summary = {{"family", family},
                        {"field_rms", rms},
                        {"temperature_norms", f.temperature_norms},
                        {"scale", f.scale},
                        {"shape", {f.v.n(), f.v.m(), f.v.c()}}};
  write_file_atomic(out / "summary.json", dump(summary));
  std::cout << "field rms " << format_double(rms) << "\n";
  return kOk;
}

int cmd_mgda(const Common& c, const std::vector<std::string>& grads, std::optional<double> lambda) {
  if (grads.size() < 2) throw UsageError("mgda needs at least two --grad files");
  const ExperimentConfig cfg = load(c);
  std::vector<Vector> g;
  for (const std::string& p : grads) g.push_back(vector_from_file(read_tensor(p)));
  for (const Vector& v : g) {
    if (v.size() != g[0].size()) throw UsageError("gradient files differ in length");
  }
  const double lam = lambda.value_or(cfg.drift.lambda_drift);
  if (!(lam >= 0.0)) throw UsageError("lambda must be nonnegative");
  const fs::path out = prepare_out(c, cfg);
  SimplexWeights w;
  Vector combined;
  if (g.size() == 2) {
    Coordination co = coordinate(g[0], g[1], lam, cfg.mgda);
    w = std::move(co.weights);
    combined = std::move(co.combined);
  } else {
    for (std::size_t i = 1; i < g.size(); ++i) g[i] *= lam;
    w = solve_simplex_qp(gram_matrix(g), cfg.mgda);
    combined = Vector::Zero(g[0].size());
    for (std::size_t i = 0; i < g.size(); ++i) combined += w.alpha[static_cast<Eigen::Index>(i)] * g[i];
  }
  write_tensor(out / "combined.dtf", to_tensor_file(combined));
  std::vector<double> alpha(w.alpha.data(), w.alpha.data() + w.alpha.size());
  write_file_atomic(out / "alpha.json", dump({{"alpha", alpha}, {"lambda", lam}}));
  std::cout << "alpha =";
  for (double a : alpha) std::cout << ' ' << format_double(a);
  std::cout << "\n";
  return kOk;
}

json eval_json(const EvalReport& r, std::uint64_t step) {
  json fam = json::object();
  for (const FamilyDistance& d : r.feature_distances) {
    fam[std::string(family_name(d.family))] = {{"energy_distance", d.energy_distance}, {"normalized", d.normalized}};
  }
  return {{"step", step},
          {"mae", r.mae},
          {"mae_identity", r.mae_identity},
          {"residual_bands", r.residual_bands},
          {"feature_energy_distance", r.feature_energy_distance},
          {"families", fam}};
}

int cmd_train(const Common& c, const std::string& resume, std::optional<std::uint64_t> stop_after) {
  const ExperimentConfig cfg = load(c);
  const fs::path out = prepare_out(c, cfg);
  const std::uint64_t hash = train_config_hash(cfg);
  TrainState state;
  if (!resume.empty()) {
    Checkpoint ck = read_checkpoint(resume, cfg.train.generator);
    if (ck.config_hash != hash) throw UsageError("checkpoint was written under a different training config");
    state = std::move(ck.state);
  } else {
    state = init_train_state(cfg.train);
  }
  const std::uint64_t total = cfg.train.total_steps();
  const std::uint64_t until = stop_after ? std::min<std::uint64_t>(*stop_after, total) : total;
  const auto save = [&](const TrainState& s) { write_checkpoint(out / "checkpoint.dck", {hash, s}); };
  write_file_atomic(out / "metrics.csv", metrics_csv(state.history));
  if (state.step < until) {
    const std::vector<PhantomPair> data = training_set(cfg.train);
    run_training(state, cfg.train, data, until, [&](const TrainState& s) {
      if (s.step % cfg.checkpoint_every == 0) {
        save(s);
        write_file_atomic(out / "metrics.csv", metrics_csv(s.history));
      }
    });
  }
  save(state);
  write_file_atomic(out / "metrics.csv", metrics_csv(state.history));
  if (state.step >= total) {
    const std::vector<PhantomPair> held_out = evaluation_set(cfg.train);
    const EvalReport r = evaluate(state.generator, cfg.train, held_out);
    write_file_atomic(out / "eval.json", dump(eval_json(r, state.step)));
    std::cout << "step " << state.step << " eval mae " << format_double(r.mae) << " feature energy distance "
              << format_double(r.feature_energy_distance) << "\n";
  } else {
    std::cout << "stopped at step " << state.step << " of " << total << "\n";
  }
  return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint) {
  const ExperimentConfig cfg = load(c);
  const Checkpoint ck = read_checkpoint(checkpoint, cfg.train.generator);
  const fs::path out = prepare_out(c, cfg);
  const EvalReport r = evaluate(ck.state.generator, cfg.train, evaluation_set(cfg.train));
  write_file_atomic(out / "eval.json", dump(eval_json(r, ck.state.step)));
  std::cout << "eval mae " << format_double(r.mae) << " feature energy distance "
            << format_double(r.feature_energy_distance) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative drifting: drift fields, MGDA coordination, transport and desk-scale training"};
  app.require_subcommand(1);

  Common common;
  auto* transport = app.add_subcommand("transport", "particle transport toward a 2-D mixture");
  add_common(transport, common);

  auto* drift = app.add_subcommand("drift-field", "drift field of one feature triplet");
  add_common(drift, common);
  drift->set_help_flag("--help", "Print this help message and exit");
  std::string h, pos, neg, family = "local";
  drift->add_option("--h", h, "generated features (rank-3 DTF1)")->required();
  drift->add_option("--pos", pos, "positive features (rank-3 DTF1)")->required();
  drift->add_option("--neg", neg, "negative features (rank-3 DTF1)")->required();
  drift->add_option("--family", family, "descriptor family tag")->capture_default_str();

  auto* mgda = app.add_subcommand("mgda", "coordinate gradients on the simplex");
  add_common(mgda, common);
  std::vector<std::string> grads;
  std::optional<double> lambda;
  mgda->add_option("--grad", grads, "gradient DTF1 file, fidelity first (repeatable)");
  mgda->add_option("--lambda", lambda, "weight applied to every gradient after the first");

  auto* train = app.add_subcommand("train", "desk-scale paired training");
  add_common(train, common);
  std::string resume;
  std::optional<std::uint64_t> stop_after;
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--stop-after", stop_after, "stop after this many total steps");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the held-out set");
  add_common(eval, common);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "DCK1 checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*transport) return cmd_transport(common);
    if (*drift) return cmd_drift_field(common, h, pos, neg, family);
    if (*mgda) return cmd_mgda(common, grads, lambda);
    if (*train) return cmd_train(common, resume, stop_after);
    if (*eval) return cmd_eval(common, checkpoint);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
