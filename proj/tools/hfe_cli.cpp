// hfe: command-line front end for the hierarchical feature embedding library.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"

#include "hfe/commands.hpp"

namespace {

void add_synth_options(CLI::App* cmd, hfe::SynthSpec& s) {
  cmd->add_option("--num-ids", s.num_ids, "Number of identities")->capture_default_str();
  cmd->add_option("--samples-per-id", s.samples_per_id, "Samples per identity")->capture_default_str();
  cmd->add_option("--num-attrs", s.num_attrs, "Binary attributes M")->capture_default_str();
  cmd->add_option("--feature-dim", s.feature_dim, "Feature dimension F")->capture_default_str();
  cmd->add_option("--attr-sep", s.attr_sep, "Distance between attribute class centers")->capture_default_str();
  cmd->add_option("--id-sep", s.id_sep, "Dispersion of id centers within a class")->capture_default_str();
  cmd->add_option("--noise", s.noise, "Per-sample spread")->capture_default_str();
  cmd->add_option("--hard-frac", s.hard_frac, "Fraction of hard samples per class")->capture_default_str();
  cmd->add_option("--seed", s.seed, "Generator seed")->capture_default_str();
}

void add_train_options(CLI::App* cmd, hfe::TrainOptions& t, std::string& config_path) {
  hfe::HFEConfig& c = t.hfe;
  cmd->add_option("--config", config_path, "key=value file; command-line flags override it");
  cmd->add_option("--data", t.data, "Training CSV")->required();
  cmd->add_option("--out", t.out_dir, "Output directory")->required();
  cmd->add_option("--epochs", t.epochs, "Passes over the dataset")->capture_default_str();
  cmd->add_option("--steps", t.steps, "Optimizer steps (overrides --epochs)");
  cmd->add_option("--log-every", t.log_every, "Log cadence in steps")->capture_default_str();
  cmd->add_option("--json-log", t.json_log, "Write JSON lines instead of CSV")->capture_default_str();
  cmd->add_option("--alpha1", c.alpha1, "Inter-class margin")->capture_default_str();
  cmd->add_option("--alpha2", c.alpha2, "Intra-class margin")->capture_default_str();
  cmd->add_option("--alpha3", c.alpha3, "Absolute boundary distance")->capture_default_str();
  cmd->add_option("--w0", c.w0, "Terminal HFE loss weight")->capture_default_str();
  cmd->add_option("--embed-dim", c.embed_dim, "Branch embedding size D")->capture_default_str();
  cmd->add_option("--hidden-dims", c.hidden_dims, "Backbone widths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("-P,--P", c.num_ids, "Identities per batch")->capture_default_str();
  cmd->add_option("-K,--K", c.imgs_per_id, "Samples per identity in a batch")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", c.weight_decay, "Decoupled weight decay")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for initialization and sampling")->capture_default_str();
  cmd->add_option("--use-inter", t.flags.use_inter, "Inter-class triplet term")->capture_default_str();
  cmd->add_option("--use-intra", t.flags.use_intra, "Intra-class triplet term")->capture_default_str();
  cmd->add_option("--use-abr", t.flags.use_abr, "Absolute boundary regularization")->capture_default_str();
  cmd->add_option("--use-dynamic-weight", t.flags.use_dynamic_weight, "Cosine ramp of the HFE weight")
      ->capture_default_str();
  cmd->add_option("--use-pairwise-intra", t.flags.use_pairwise_intra, "Pairwise intra-id term (ablation)")
      ->capture_default_str();
}

std::string_view trim(std::string_view v) {
  const auto b = v.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return v.substr(b, v.find_last_not_of(" \t\r") - b + 1);
}

// CLI11 only reads the config file of the top-level app, so the train
// subcommand's --config is expanded here: each key=value line becomes
// "--key value" unless the same option is given on the command line.
void expand_train_config(const CLI::App& train_cmd, std::vector<std::string>& args) {
  const auto t = std::find(args.begin(), args.end(), "train");
  if (t == args.end()) return;
  std::string path;
  std::vector<const CLI::Option*> explicit_opts;
  for (auto it = t + 1; it != args.end(); ++it) {
    if (it->rfind("-", 0) != 0) continue;
    const std::string name = it->substr(0, it->find('='));
    if (name == "--config") {
      if (it->size() > name.size()) path = it->substr(name.size() + 1);
      else if (it + 1 != args.end()) path = *(it + 1);
    }
    if (const CLI::Option* o = train_cmd.get_option_no_throw(name)) explicit_opts.push_back(o);
  }
  if (path.empty()) return;
  std::ifstream is(path);
  if (!is) throw hfe::usage_error("cannot read config file " + path);
  std::vector<std::string> extra;
  int line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    const std::string_view l = trim(line);
    if (l.empty() || l.front() == '#' || l.front() == ';') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos)
      throw hfe::usage_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key(trim(l.substr(0, eq)));
    const CLI::Option* o = train_cmd.get_option_no_throw("--" + key);
    if (!o || key == "config") throw hfe::usage_error(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (std::find(explicit_opts.begin(), explicit_opts.end(), o) != explicit_opts.end()) continue;
    extra.push_back("--" + key);
    extra.emplace_back(trim(l.substr(eq + 1)));
  }
  args.insert(t + 1, extra.begin(), extra.end());
}

int run(int argc, char** argv) {
  CLI::App app{"Hierarchical feature embedding: training, evaluation and diagnostics"};
  app.require_subcommand(1);

  hfe::GenSynthOptions gen;
  std::string test_out;
  auto* gen_cmd = app.add_subcommand("gen-synth", "Write a synthetic hierarchical dataset as CSV");
  add_synth_options(gen_cmd, gen.spec);
  gen_cmd->add_option("--out", gen.out, "Output CSV (training side when splitting)")->required();
  gen_cmd->add_option("--test-out", test_out, "Also split by identity and write the test side here");
  gen_cmd->add_option("--train-frac", gen.train_frac, "Identity fraction for training")->capture_default_str();

  hfe::TrainOptions tr;
  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write log, config and checkpoint");
  add_train_options(train_cmd, tr, config_path);

  std::string ckpt, data, json_out, out_path;
  auto* eval_cmd = app.add_subcommand("eval", "Class- and instance-based metrics plus embedding diagnostics");
  eval_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data, "Evaluation CSV")->required();
  eval_cmd->add_option("--json", json_out, "Also write the report as JSON");

  std::size_t attr = 0;
  auto* proj_cmd = app.add_subcommand("project", "2-D PCA projection of one attribute's embedding");
  proj_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  proj_cmd->add_option("--data", data, "Dataset CSV")->required();
  proj_cmd->add_option("--attr", attr, "Attribute index")->required();
  proj_cmd->add_option("--out", out_path, "Output CSV")->required();

  hfe::MineDebugOptions mine;
  auto* mine_cmd = app.add_subcommand("mine-debug", "Dump the quintuplets mined on one sampled batch");
  mine_cmd->add_option("--checkpoint", mine.checkpoint, "Checkpoint file")->required();
  mine_cmd->add_option("--data", mine.data, "Dataset CSV")->required();
  mine_cmd->add_option("-P,--P", mine.P, "Identities in the batch")->capture_default_str();
  mine_cmd->add_option("-K,--K", mine.K, "Samples per identity")->capture_default_str();
  mine_cmd->add_option("--seed", mine.seed, "Batch sampling seed")->capture_default_str();
  mine_cmd->add_option("--out", out_path, "Output CSV (stdout when omitted)");

  std::vector<std::string> args(argv + 1, argv + argc);
  expand_train_config(*train_cmd, args);
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return hfe::kExitUsage;
  }

  auto open_out = [](const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw hfe::usage_error("cannot open for writing: " + path);
    return os;
  };

  if (*gen_cmd) {
    if (!test_out.empty()) gen.test_out = test_out;
    hfe::cmd_gen_synth(gen);
  } else if (*train_cmd) {
    const hfe::TrainSummary s = hfe::cmd_train(tr);
    std::cout << "trained " << s.steps << " steps\n"
              << "log: " << s.log_path << "\ncheckpoint: " << s.checkpoint_path << '\n';
  } else if (*eval_cmd) {
    const hfe::EvalResult r = hfe::cmd_eval(ckpt, data);
    hfe::print_eval(std::cout, r);
    if (!json_out.empty()) open_out(json_out) << hfe::eval_json(r).dump(2) << '\n';
  } else if (*proj_cmd) {
    auto os = open_out(out_path);
    hfe::cmd_project(ckpt, data, attr, os);
  } else if (*mine_cmd) {
    if (out_path.empty()) {
      hfe::cmd_mine_debug(mine, std::cout);
    } else {
      auto os = open_out(out_path);
      hfe::cmd_mine_debug(mine, os);
    }
  }
  return hfe::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const hfe::usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hfe::kExitUsage;
  } catch (const hfe::data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return hfe::kExitData;
  } catch (const hfe::numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return hfe::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hfe::kExitUsage;
  }
}
