// Copyright 2026 The lerptext Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lerptext/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <sstream>

#include "lerptext/checkpoint.hpp"
#include "lerptext/corpus.hpp"
#include "lerptext/hashing.hpp"
#include "lerptext/synthetic.hpp"

namespace lerptext::cli {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("lerptext");
    l->set_pattern("[%H:%M:%S] %v");
    return l;
  }();
  return log;
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view value) {
  std::vector<T> out;
  size_t pos = 0;
  while (pos <= value.size()) {
    const size_t comma = std::min(value.find(',', pos), value.size());
    std::string_view item = value.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) throw std::invalid_argument(std::string(key) + ": empty list item");
    if constexpr (std::is_same_v<T, double>) {
      out.push_back(kv::to_double(key, item));
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      out.push_back(kv::to_u64(key, item));
    } else {
      out.emplace_back(item);
    }
    pos = comma + 1;
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_same_v<T, double>) s += kv::format_double(xs[i]);
    else if constexpr (std::is_same_v<T, std::string>) s += xs[i];
    else s += std::to_string(xs[i]);
  }
  return s;
}

int positive_int(std::string_view key, std::string_view value, int min = 1) {
  const int v = kv::to_int(key, value);
  if (v < min) {
    throw std::invalid_argument(std::string(key) + " must be >= " + std::to_string(min) +
                                ", got " + std::string(value));
  }
  return v;
}

void set_model_field(ModelConfig& m, std::string_view key, std::string_view value) {
  if (key == "vocab_size") m.vocab_size = positive_int(key, value, kNumSpecialTokens + 1);
  else if (key == "d_model") m.d_model = positive_int(key, value);
  else if (key == "heads") m.heads = positive_int(key, value);
  else if (key == "ff_dim") m.ff_dim = positive_int(key, value);
  else if (key == "encoder_layers") m.encoder_layers = positive_int(key, value);
  else if (key == "decoder_layers") m.decoder_layers = positive_int(key, value);
  else if (key == "max_length") m.max_length = positive_int(key, value);
  else if (key == "sigma_init") {
    m.sigma_init = kv::to_double(key, value);
    if (!(m.sigma_init > 0.0)) throw std::invalid_argument("sigma_init must be positive");
  } else {
    throw std::invalid_argument("unknown setting model." + std::string(key));
  }
}

void set_classifier_field(ClassifierConfig& c, std::string_view key, std::string_view value) {
  if (key == "embed_dim") c.embed_dim = positive_int(key, value);
  else if (key == "hidden_dim") c.hidden_dim = positive_int(key, value);
  else if (key == "epochs") c.epochs = positive_int(key, value, 0);
  else if (key == "batch_size") c.batch_size = positive_int(key, value);
  else if (key == "learning_rate") c.learning_rate = kv::to_double(key, value);
  else if (key == "seed") c.seed = kv::to_u64(key, value);
  else throw std::invalid_argument("unknown setting classifier." + std::string(key));
  c.validate();
}

double unit_interval(std::string_view key, std::string_view value) {
  const double v = kv::to_double(key, value);
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(key) + " must be in [0, 1], got " + std::string(value));
  }
  return v;
}

}  // namespace

RunConfig::RunConfig() { model.vocab_size = 8000; }

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const size_t dot = key.find('.');
  if (dot == std::string_view::npos) throw std::invalid_argument("unknown setting " + std::string(key));
  const std::string_view section = key.substr(0, dot);
  const std::string_view field = key.substr(dot + 1);
  if (section == "paths") {
    const std::filesystem::path p{std::string(value)};
    if (field == "corpus") cfg.corpus = p;
    else if (field == "data") cfg.data = p;
    else if (field == "test") cfg.test = p;
    else if (field == "ckpt") cfg.ckpt = p;
    else if (field == "vocab") cfg.vocab = p;
    else if (field == "out") cfg.out = p;
    else throw std::invalid_argument("unknown setting " + std::string(key));
  } else if (section == "run") {
    if (field == "workers") cfg.workers = positive_int(key, value);
    else throw std::invalid_argument("unknown setting " + std::string(key));
  } else if (section == "data") {
    if (field == "task") {
      if (value == "single") cfg.task = TaskKind::kSingleSentence;
      else if (value == "pair") cfg.task = TaskKind::kSentencePair;
      else throw std::invalid_argument("data.task must be single or pair, got " + std::string(value));
    } else {
      throw std::invalid_argument("unknown setting " + std::string(key));
    }
  } else if (section == "model") {
    set_model_field(cfg.model, field, value);
  } else if (section == "train") {
    if (field == "preset") {
      if (value != "finetune") throw std::invalid_argument("train.preset must be 'finetune', got " + std::string(value));
      const TrainingConfig p = TrainingConfig::finetune_preset();
      cfg.train.batch_size = p.batch_size;
      cfg.train.learning_rate = p.learning_rate;
      cfg.train.warmup_steps = p.warmup_steps;
      cfg.train.adam_beta2 = p.adam_beta2;
      cfg.train.adam_eps = p.adam_eps;
      return;
    }
    TrainingConfig t = cfg.train;
    set_field(t, field, value);
    t.validate();
    cfg.train = t;
  } else if (section == "decode") {
    DecodeConfig d = cfg.decode;
    set_field(d, field, value);
    d.validate();
    cfg.decode = d;
  } else if (section == "interpolate") {
    if (field == "a") cfg.text_a = value;
    else if (field == "b") cfg.text_b = value;
    else if (field == "alpha") cfg.alpha = unit_interval(key, value);
    else throw std::invalid_argument("unknown setting " + std::string(key));
  } else if (section == "augment") {
    if (field == "policy") cfg.policy = parse_label_policy(value);
    else if (field == "temperature") {
      const double t = kv::to_double(key, value);
      if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive, got " + std::string(value));
      cfg.temperature = t;
    } else if (field == "literal_orientation") cfg.literal_orientation = kv::to_bool(key, value);
    else if (field == "alpha_dist") {
      (void)AlphaDistribution::parse(value);
      cfg.alpha_dist = value;
    } else if (field == "seed") cfg.augment_seed = kv::to_u64(key, value);
    else if (field == "max_redraws") cfg.max_redraws = positive_int(key, value, 0);
    else throw std::invalid_argument("unknown setting " + std::string(key));
  } else if (section == "sweep") {
    if (field == "grid") {
      auto grid = parse_list<double>(key, value);
      for (double a : grid) {
        if (!(a >= 0.0 && a <= 1.0)) {
          throw std::invalid_argument("sweep.grid values must be in [0, 1], got " + kv::format_double(a));
        }
      }
      cfg.grid = std::move(grid);
    } else if (field == "pairs") cfg.sweep_pairs = positive_int(key, value);
    else if (field == "seed") cfg.sweep_seed = kv::to_u64(key, value);
    else throw std::invalid_argument("unknown setting " + std::string(key));
  } else if (section == "experiment") {
    if (field == "methods") {
      auto methods = parse_list<std::string>(key, value);
      for (const auto& m : methods) (void)MethodSpec::parse(m);
      cfg.methods = std::move(methods);
    } else if (field == "shots") cfg.shots = positive_int(key, value, 0);
    else if (field == "seeds") cfg.seeds = parse_list<std::uint64_t>(key, value);
    else throw std::invalid_argument("unknown setting " + std::string(key));
  } else if (section == "classifier") {
    set_classifier_field(cfg.classifier, field, value);
  } else if (section == "synth") {
    if (field == "count") cfg.synth_count = positive_int(key, value, 2);
    else if (field == "test_count") cfg.synth_test_count = positive_int(key, value, 1);
    else if (field == "seed") cfg.synth_seed = kv::to_u64(key, value);
    else throw std::invalid_argument("unknown setting " + std::string(key));
  } else {
    throw std::invalid_argument("unknown setting " + std::string(key));
  }
}

kv::Entries resolved_settings(const RunConfig& cfg) {
  kv::Entries e;
  e.emplace_back("command", cfg.command);
  e.emplace_back("paths.corpus", cfg.corpus.string());
  e.emplace_back("paths.data", cfg.data.string());
  e.emplace_back("paths.test", cfg.test.string());
  e.emplace_back("paths.ckpt", cfg.ckpt.string());
  e.emplace_back("paths.vocab", cfg.vocab.string());
  e.emplace_back("paths.out", cfg.out.string());
  e.emplace_back("run.workers", std::to_string(cfg.workers));
  e.emplace_back("data.task", cfg.task == TaskKind::kSentencePair ? "pair" : "single");
  e.emplace_back("model.vocab_size", std::to_string(cfg.model.vocab_size));
  e.emplace_back("model.d_model", std::to_string(cfg.model.d_model));
  e.emplace_back("model.heads", std::to_string(cfg.model.heads));
  e.emplace_back("model.ff_dim", std::to_string(cfg.model.ff_dim));
  e.emplace_back("model.encoder_layers", std::to_string(cfg.model.encoder_layers));
  e.emplace_back("model.decoder_layers", std::to_string(cfg.model.decoder_layers));
  e.emplace_back("model.max_length", std::to_string(cfg.model.max_length));
  e.emplace_back("model.sigma_init", kv::format_double(cfg.model.sigma_init));
  for (auto& [k, v] : fields(cfg.train)) e.emplace_back("train." + k, v);
  for (auto& [k, v] : fields(cfg.decode)) e.emplace_back("decode." + k, v);
  e.emplace_back("interpolate.a", cfg.text_a);
  e.emplace_back("interpolate.b", cfg.text_b);
  e.emplace_back("interpolate.alpha", kv::format_double(cfg.alpha));
  e.emplace_back("augment.policy", std::string(to_string(cfg.policy)));
  e.emplace_back("augment.temperature", kv::format_double(cfg.temperature));
  e.emplace_back("augment.literal_orientation", cfg.literal_orientation ? "true" : "false");
  e.emplace_back("augment.alpha_dist", cfg.alpha_dist);
  e.emplace_back("augment.seed", std::to_string(cfg.augment_seed));
  e.emplace_back("augment.max_redraws", std::to_string(cfg.max_redraws));
  e.emplace_back("sweep.grid", join(cfg.grid));
  e.emplace_back("sweep.pairs", std::to_string(cfg.sweep_pairs));
  e.emplace_back("sweep.seed", std::to_string(cfg.sweep_seed));
  e.emplace_back("experiment.methods", join(cfg.methods));
  e.emplace_back("experiment.shots", std::to_string(cfg.shots));
  e.emplace_back("experiment.seeds", join(cfg.seeds));
  e.emplace_back("classifier.embed_dim", std::to_string(cfg.classifier.embed_dim));
  e.emplace_back("classifier.hidden_dim", std::to_string(cfg.classifier.hidden_dim));
  e.emplace_back("classifier.epochs", std::to_string(cfg.classifier.epochs));
  e.emplace_back("classifier.batch_size", std::to_string(cfg.classifier.batch_size));
  e.emplace_back("classifier.learning_rate", kv::format_double(cfg.classifier.learning_rate));
  e.emplace_back("classifier.seed", std::to_string(cfg.classifier.seed));
  e.emplace_back("synth.count", std::to_string(cfg.synth_count));
  e.emplace_back("synth.test_count", std::to_string(cfg.synth_test_count));
  e.emplace_back("synth.seed", std::to_string(cfg.synth_seed));
  return e;
}

namespace {

struct OptionSpec {
  const char* flag;
  const char* key;
  const char* help;
  bool boolean = false;
};

const std::vector<OptionSpec> kDecodeOptions = {
    {"--strategy", "decode.strategy", "beam, greedy or sample"},
    {"--beam", "decode.beam_size", "beam width"},
    {"--max-decode-length", "decode.max_decode_length", "generation bound; 0 = 2*max(La,Lb)+2"},
    {"--length-penalty", "decode.length_penalty", "finished-hypothesis length exponent"},
    {"--decode-seed", "decode.seed", "seed for sampling decode"},
};

const std::vector<OptionSpec> kClassifierOptions = {
    {"--clf-embed-dim", "classifier.embed_dim", "classifier embedding width"},
    {"--clf-hidden-dim", "classifier.hidden_dim", "classifier hidden width"},
    {"--clf-epochs", "classifier.epochs", "classifier training epochs"},
    {"--clf-batch-size", "classifier.batch_size", "classifier minibatch size"},
    {"--clf-lr", "classifier.learning_rate", "classifier learning rate"},
    {"--clf-seed", "classifier.seed", "classifier initialization seed"},
};

struct CommandSpec {
  const char* name;
  const char* help;
  std::vector<OptionSpec> options;
  bool decode = false;
  bool classifier = false;
};

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> specs = {
      {"train",
       "train an interpolation model on a text corpus",
       {{"--corpus", "paths.corpus", "UTF-8 text, one sentence per line (required)"},
        {"--out", "paths.out", "run directory (required)"},
        {"--steps", "train.steps", "optimizer steps"},
        {"--batch-size", "train.batch_size", "pairs per minibatch"},
        {"--lr", "train.learning_rate", "peak learning rate"},
        {"--p-mask", "train.p_mask", "encoder-input masking probability"},
        {"--lambda", "train.lambda", "hidden-norm penalty weight"},
        {"--noise-std", "train.noise_std", "std of noise added to encoder outputs"},
        {"--seed", "train.seed", "training seed"},
        {"--alpha-sampling", "train.alpha_sampling", "per-example or per-minibatch"},
        {"--warmup", "train.warmup_steps", "linear warmup steps"},
        {"--grad-clip", "train.grad_clip", "global gradient-norm clip; 0 disables"},
        {"--checkpoint-every", "train.checkpoint_every", "intermediate checkpoint period"},
        {"--preset", "train.preset", "'finetune': batch 8, fixed lr 1e-5"},
        {"--vocab-size", "model.vocab_size", "vocabulary cap including specials"},
        {"--d-model", "model.d_model", "model width"},
        {"--heads", "model.heads", "attention heads"},
        {"--ff-dim", "model.ff_dim", "feed-forward width"},
        {"--encoder-layers", "model.encoder_layers", "encoder depth"},
        {"--decoder-layers", "model.decoder_layers", "decoder depth"},
        {"--max-length", "model.max_length", "token cap per sentence"},
        {"--sigma-init", "model.sigma_init", "initial length-converter spread"}}},
      {"interpolate",
       "interpolate two texts with a trained model",
       {{"--ckpt", "paths.ckpt", "model checkpoint (required)"},
        {"--a", "interpolate.a", "first text (required)"},
        {"--b", "interpolate.b", "second text (required)"},
        {"--alpha", "interpolate.alpha", "weight of the first text, in [0, 1]"},
        {"--out", "paths.out", "optional JSON result file"}},
       true},
      {"augment",
       "write one interpolated example per input example",
       {{"--data", "paths.data", "labeled dataset, .jsonl or .tsv (required)"},
        {"--ckpt", "paths.ckpt", "model checkpoint (required)"},
        {"--out", "paths.out", "augmented JSONL file (required)"},
        {"--task", "data.task", "single or pair"},
        {"--policy", "augment.policy", "interpolated, sharpened or teacher"},
        {"--temperature", "augment.temperature", "sharpening temperature"},
        {"--literal-orientation", "augment.literal_orientation",
         "weight alpha on the second label instead of the first", true},
        {"--alpha-dist", "augment.alpha_dist", "uniform, beta:a,b or choice:x,y,..."},
        {"--seed", "augment.seed", "augmentation seed"},
        {"--max-redraws", "augment.max_redraws", "replacement pairs after a decode failure"}},
       true,
       true},
      {"sweep",
       "unigram precision against both sources over an alpha grid",
       {{"--ckpt", "paths.ckpt", "model checkpoint (required)"},
        {"--corpus", "paths.corpus", "sentences to pair (required)"},
        {"--out", "paths.out", "output directory (required)"},
        {"--grid", "sweep.grid", "comma-separated alphas"},
        {"--pairs", "sweep.pairs", "number of random pairs"},
        {"--seed", "sweep.seed", "pair sampling seed"}},
       true},
      {"experiment",
       "few-shot classification with and without augmentation",
       {{"--data", "paths.data", "training set (required)"},
        {"--test", "paths.test", "test set (required)"},
        {"--ckpt", "paths.ckpt", "model checkpoint (required for linda methods)"},
        {"--vocab", "paths.vocab", "vocabulary file when no checkpoint is given"},
        {"--out", "paths.out", "output directory (required)"},
        {"--task", "data.task", "single or pair"},
        {"--methods", "experiment.methods",
         "comma list: vanilla, linda, linda:sharpened:T, linda:teacher"},
        {"--shots", "experiment.shots", "examples per class; 0 uses the full set"},
        {"--seeds", "experiment.seeds", "comma-separated run seeds"},
        {"--alpha-dist", "augment.alpha_dist", "uniform, beta:a,b or choice:x,y,..."},
        {"--literal-orientation", "augment.literal_orientation",
         "weight alpha on the second label instead of the first", true}},
       true,
       true},
      {"inspect-ckpt",
       "print checkpoint header and parameter summary",
       {{"--ckpt", "paths.ckpt", "model checkpoint (required)"}}},
      {"synth",
       "write the templated toy corpus and labeled splits",
       {{"--out", "paths.out", "output directory (required)"},
        {"--count", "synth.count", "corpus and training-set size"},
        {"--test-count", "synth.test_count", "test-set size"},
        {"--seed", "synth.seed", "generator seed"}}},
  };
  return specs;
}

struct HelpRequested {
  std::string text;
};

struct GivenFlag {
  std::string flag;
  std::string key;
  std::string value;
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

void require(const RunConfig& cfg, const std::filesystem::path& p, const char* flag) {
  if (p.empty()) throw UsageError(cfg.command + ": " + flag + " is required");
}

void require_input(const RunConfig& cfg, const std::filesystem::path& p, const char* flag) {
  require(cfg, p, flag);
  if (!std::filesystem::exists(p)) {
    throw UsageError(cfg.command + ": " + flag + " " + p.string() + ": no such file");
  }
}

void check_paths(const RunConfig& cfg) {
  const std::string& c = cfg.command;
  if (c == "train") {
    require_input(cfg, cfg.corpus, "--corpus");
    require(cfg, cfg.out, "--out");
  } else if (c == "interpolate") {
    require_input(cfg, cfg.ckpt, "--ckpt");
    if (cfg.text_a.empty()) throw UsageError("interpolate: --a is required");
    if (cfg.text_b.empty()) throw UsageError("interpolate: --b is required");
  } else if (c == "augment") {
    require_input(cfg, cfg.data, "--data");
    require_input(cfg, cfg.ckpt, "--ckpt");
    require(cfg, cfg.out, "--out");
  } else if (c == "sweep") {
    require_input(cfg, cfg.ckpt, "--ckpt");
    require_input(cfg, cfg.corpus, "--corpus");
    require(cfg, cfg.out, "--out");
  } else if (c == "experiment") {
    require_input(cfg, cfg.data, "--data");
    require_input(cfg, cfg.test, "--test");
    require(cfg, cfg.out, "--out");
    bool needs_model = false;
    for (const auto& m : cfg.methods) {
      needs_model = needs_model || MethodSpec::parse(m).kind == MethodSpec::Kind::kLinda;
    }
    if (needs_model) require_input(cfg, cfg.ckpt, "--ckpt");
    if (!cfg.ckpt.empty()) require_input(cfg, cfg.ckpt, "--ckpt");
    if (cfg.ckpt.empty()) require_input(cfg, cfg.vocab, "--vocab");
  } else if (c == "inspect-ckpt") {
    require_input(cfg, cfg.ckpt, "--ckpt");
  } else if (c == "synth") {
    require(cfg, cfg.out, "--out");
  }
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Learned text interpolation for data augmentation", "lerptext"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  // Flag values are kept as text and applied through apply_setting so that
  // file and flag settings share one parser.
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::map<std::string, std::string> config_files;
  std::map<std::string, std::string> workers;
  std::vector<std::pair<CLI::App*, std::vector<std::pair<CLI::Option*, OptionSpec>>>> registered;
  for (const auto& spec : commands()) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.help);
    std::vector<std::pair<CLI::Option*, OptionSpec>> opts;
    sub->add_option("--config", config_files[spec.name], "key: value settings file");
    opts.emplace_back(sub->add_option("--workers", workers[spec.name], "parallel workers"),
                      OptionSpec{"--workers", "run.workers", ""});
    std::vector<OptionSpec> all = spec.options;
    if (spec.decode) all.insert(all.end(), kDecodeOptions.begin(), kDecodeOptions.end());
    if (spec.classifier) all.insert(all.end(), kClassifierOptions.begin(), kClassifierOptions.end());
    for (const auto& o : all) {
      const std::string id = std::string(spec.name) + o.flag;
      CLI::Option* opt = o.boolean ? sub->add_flag(o.flag, switches[id], o.help)
                                   : sub->add_option(o.flag, values[id], o.help);
      opts.emplace_back(opt, o);
    }
    registered.emplace_back(sub, std::move(opts));
  }

  std::vector<const char*> argv;
  argv.push_back("lerptext");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    throw HelpRequested{subs.empty() ? app.help() : subs.front()->help()};
  } catch (const CLI::CallForVersion&) {
    throw HelpRequested{std::string(kVersion) + "\n"};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig cfg;
  for (auto& [sub, opts] : registered) {
    if (!sub->parsed()) continue;
    cfg.command = sub->get_name();
    std::vector<GivenFlag> given;
    for (auto& [opt, o] : opts) {
      if (opt->count() == 0) continue;
      const std::string id = cfg.command + o.flag;
      std::string value;
      if (std::string_view(o.flag) == "--workers") value = workers[cfg.command];
      else if (o.boolean) value = switches[id] ? "true" : "false";
      else value = values[id];
      given.push_back({o.flag, o.key, value});
    }
    // Presets go first so individual flags can refine them.
    std::stable_partition(given.begin(), given.end(),
                          [](const GivenFlag& g) { return g.key == "train.preset"; });

    const std::string& config_file = config_files[cfg.command];
    if (!config_file.empty()) {
      cfg.config_file = config_file;
      std::ifstream in(config_file);
      if (!in) throw UsageError("--config " + config_file + ": cannot open");
      std::stringstream ss;
      ss << in.rdbuf();
      kv::Entries entries;
      try {
        entries = kv::parse(ss.str());
      } catch (const std::exception& e) {
        throw UsageError("--config " + config_file + ": " + e.what());
      }
      std::stable_partition(entries.begin(), entries.end(),
                            [](const auto& kvp) { return kvp.first == "train.preset"; });
      for (const auto& [k, v] : entries) {
        if (k == "command") continue;
        try {
          apply_setting(cfg, k, v);
        } catch (const std::exception& e) {
          throw UsageError("--config " + config_file + ": " + k + ": " + v + ": " + e.what());
        }
      }
    }
    if (auto w = env("LERPTEXT_WORKERS")) {
      try {
        apply_setting(cfg, "run.workers", *w);
      } catch (const std::exception& e) {
        throw UsageError("LERPTEXT_WORKERS=" + *w + ": " + e.what());
      }
    }
    for (const auto& g : given) {
      try {
        apply_setting(cfg, g.key, g.value);
      } catch (const std::exception& e) {
        throw UsageError(g.flag + " " + g.value + ": " + e.what());
      }
    }
  }
  if (auto root = env("LERPTEXT_OUTPUT_ROOT"); root && !cfg.out.empty() && cfg.out.is_relative()) {
    cfg.out = std::filesystem::path(*root) / cfg.out;
  }
  check_paths(cfg);
  return cfg;
}

namespace {

using nlohmann::ordered_json;

ordered_json settings_json(const RunConfig& cfg) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : resolved_settings(cfg)) j[k] = v;
  return j;
}

std::uint64_t command_seed(const RunConfig& cfg) {
  const std::string& c = cfg.command;
  if (c == "train") return cfg.train.seed;
  if (c == "augment") return cfg.augment_seed;
  if (c == "sweep") return cfg.sweep_seed;
  if (c == "synth") return cfg.synth_seed;
  if (c == "experiment") return cfg.seeds.empty() ? 0 : cfg.seeds.front();
  return cfg.decode.seed;
}

/// Resolved config and manifest. Directory outputs use fixed names inside
/// the directory; file outputs get sibling files with suffixes.
void write_run_record(const RunConfig& cfg, const std::filesystem::path& base, bool is_dir,
                      const std::string& checkpoint_sha, const ordered_json& inputs,
                      const ordered_json& outputs, const ordered_json& results = ordered_json()) {
  const auto config_path = is_dir ? base / "config.yaml" : std::filesystem::path(base.string() + ".config.yaml");
  const auto manifest_path =
      is_dir ? base / "manifest.json" : std::filesystem::path(base.string() + ".manifest.json");
  {
    std::ofstream out(config_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + config_path.string());
    out << kv::render(resolved_settings(cfg));
  }
  ordered_json m;
  m["version"] = kVersion;
  m["command"] = cfg.command;
  m["seed"] = command_seed(cfg);
  m["config"] = settings_json(cfg);
  m["checkpoint_sha256"] = checkpoint_sha;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  if (!results.is_null()) m["results"] = results;
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
  out << m.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + manifest_path.string());
}

ordered_json input_record(std::initializer_list<std::filesystem::path> paths) {
  ordered_json j = ordered_json::object();
  for (const auto& p : paths) {
    if (!p.empty()) j[p.string()] = sha256_file(p);
  }
  return j;
}

int run_train(const RunConfig& cfg) {
  auto log = logger();
  const auto lines = load_corpus(cfg.corpus);
  if (lines.size() < 2) throw std::runtime_error("train: corpus needs at least 2 sentences");
  const Vocabulary vocab = build_vocabulary(lines, cfg.model.vocab_size);
  std::vector<TokenSequence> corpus;
  corpus.reserve(lines.size());
  for (const auto& l : lines) corpus.push_back(tokenize(l, vocab, cfg.model.max_length));
  ModelConfig mc = cfg.model;
  mc.vocab_size = vocab.size();
  InterpModel model(mc, mix_seed(cfg.train.seed, 1));
  log->info("train: {} sentences, vocabulary {}, {} parameters, {} steps", corpus.size(),
            vocab.size(), model.parameter_count(), cfg.train.steps);

  std::filesystem::create_directories(cfg.out);
  vocab.save(cfg.out / "vocab.txt");
  const kv::Entries meta = {{"version", kVersion},
                            {"train.seed", std::to_string(cfg.train.seed)},
                            {"train.steps", std::to_string(cfg.train.steps)},
                            {"corpus_sha256", sha256_file(cfg.corpus)}};
  const auto final_ckpt = cfg.out / "model.ckpt";
  ordered_json outputs = {"vocab.txt", "train_log.csv", "model.ckpt"};
  TrainHooks hooks;
  hooks.checkpoint = [&](long step, const InterpModel& m) {
    if (step >= cfg.train.steps) {
      save_checkpoint(final_ckpt, m, vocab, meta);
    } else {
      const std::string name = "step_" + std::to_string(step) + ".ckpt";
      save_checkpoint(cfg.out / name, m, vocab, meta);
      outputs.push_back(name);
    }
  };
  const long every = std::max(1, cfg.train.steps / 20);
  hooks.on_step = [&](const TrainingLogRow& r) {
    if (r.step % every == 0 || r.step == cfg.train.steps) {
      log->info("step {} loss {:.4f} recon_a {:.3f} recon_b {:.3f}", r.step, r.loss, r.recon_a,
                r.recon_b);
    }
  };
  const auto rows = train(model, corpus, cfg.train, hooks);
  write_training_log(cfg.out / "train_log.csv", rows);
  if (!std::filesystem::exists(final_ckpt)) save_checkpoint(final_ckpt, model, vocab, meta);
  const std::string sha = sha256_file(final_ckpt);
  ordered_json results = {{"final_loss", rows.empty() ? 0.0 : rows.back().loss},
                          {"sigma", model.sigma()}};
  write_run_record(cfg, cfg.out, true, sha, input_record({cfg.corpus}), outputs, results);
  log->info("train: wrote {} (sha256 {})", final_ckpt.string(), sha);
  return 0;
}

int run_interpolate(const RunConfig& cfg) {
  const LoadedCheckpoint ck = load_checkpoint(cfg.ckpt);
  const int max_len = ck.model.config().max_length;
  const TokenSequence a = tokenize(cfg.text_a, ck.vocab, max_len);
  const TokenSequence b = tokenize(cfg.text_b, ck.vocab, max_len);
  const DecodeResult r = interpolate_text(ck.model, a, b, MixRatio(cfg.alpha), cfg.decode);
  const std::string text = detokenize(r.content(), ck.vocab);
  std::cout << text << '\n';
  if (!cfg.out.empty()) {
    if (cfg.out.has_parent_path()) std::filesystem::create_directories(cfg.out.parent_path());
    ordered_json j = {{"a", cfg.text_a},           {"b", cfg.text_b},
                      {"alpha", cfg.alpha},        {"text", text},
                      {"logprob", r.total_logprob}, {"truncated", r.truncated}};
    std::ofstream out(cfg.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + cfg.out.string());
    out << j.dump() << '\n';
    out.close();
    write_run_record(cfg, cfg.out, false, sha256_file(cfg.ckpt), input_record({cfg.ckpt}),
                     {cfg.out.filename().string()});
  }
  return 0;
}

LoadOptions load_options(int max_length) {
  LoadOptions o;
  o.max_length = max_length;
  return o;
}

int run_augment(const RunConfig& cfg) {
  auto log = logger();
  const LoadedCheckpoint ck = load_checkpoint(cfg.ckpt);
  const int max_len = ck.model.config().max_length;
  const Dataset data = load_labeled_dataset(cfg.data, guess_format(cfg.data), cfg.task, ck.vocab,
                                            load_options(max_len));
  LabelPolicy policy;
  policy.kind = cfg.policy;
  policy.temperature = cfg.temperature;
  policy.literal_orientation = cfg.literal_orientation;
  std::optional<ClassifierModel> teacher;
  if (cfg.policy == LabelPolicyKind::kTeacher) {
    log->info("augment: training teacher on {} clean examples", data.size());
    const auto clean = to_soft_examples(data);
    teacher.emplace(train_classifier(clean, ck.vocab, data.num_classes, cfg.classifier));
    policy.teacher = &*teacher;
  }
  AugmentOptions opts;
  opts.alpha = AlphaDistribution::parse(cfg.alpha_dist);
  opts.seed = cfg.augment_seed;
  opts.workers = cfg.workers;
  opts.max_redraws = cfg.max_redraws;
  AugmentStats stats;
  const auto rows = augment_dataset(data, ck.model, ck.vocab, policy, cfg.decode, opts, &stats);
  if (cfg.out.has_parent_path()) std::filesystem::create_directories(cfg.out.parent_path());
  write_augmented_jsonl(cfg.out, rows, ck.vocab, data.task_kind);
  log->info("augment: {} records, {} empty, {} copies, {} redraws", rows.size(), stats.empty,
            stats.copies, stats.redraws);
  ordered_json results = {{"records", rows.size()},
                          {"empty", stats.empty},
                          {"copies", stats.copies},
                          {"redraws", stats.redraws}};
  write_run_record(cfg, cfg.out, false, sha256_file(cfg.ckpt), input_record({cfg.data, cfg.ckpt}),
                   {cfg.out.filename().string()}, results);
  return 0;
}

int run_sweep(const RunConfig& cfg) {
  auto log = logger();
  const LoadedCheckpoint ck = load_checkpoint(cfg.ckpt);
  const int max_len = ck.model.config().max_length;
  const auto lines = load_corpus(cfg.corpus);
  if (lines.size() < 2) throw std::runtime_error("sweep: corpus needs at least 2 sentences");
  std::vector<TokenSequence> sentences;
  for (const auto& l : lines) sentences.push_back(tokenize(l, ck.vocab, max_len));
  std::mt19937_64 rng(mix_seed(cfg.sweep_seed, 41));
  std::uniform_int_distribution<size_t> pick(0, sentences.size() - 1);
  std::vector<TokenPair> pairs;
  for (int i = 0; i < cfg.sweep_pairs; ++i) {
    const size_t a = pick(rng);
    size_t b = pick(rng);
    while (b == a) b = pick(rng);
    pairs.push_back({sentences[a], sentences[b]});
  }
  log->info("sweep: {} pairs x {} alphas", pairs.size(), cfg.grid.size());
  const PrecisionCurve curve = alpha_sweep(ck.model, pairs, cfg.grid, cfg.decode, cfg.workers);
  std::filesystem::create_directories(cfg.out);
  write_sweep_csv(cfg.out / "sweep.csv", curve);
  write_sweep_svg(cfg.out / "sweep.svg", curve);
  ordered_json results = ordered_json::object();
  if (curve.alphas.size() >= 3) {
    const Monotonicity m = monotonicity_score(curve);
    results = {{"rho_a", m.rho_a},
               {"rho_b", m.rho_b},
               {"constant_a", m.constant_a},
               {"constant_b", m.constant_b}};
    log->info("sweep: rho_a {:.3f} rho_b {:.3f}", m.rho_a, m.rho_b);
  }
  write_sweep_csv(std::cout, curve);
  write_run_record(cfg, cfg.out, true, sha256_file(cfg.ckpt), input_record({cfg.ckpt, cfg.corpus}),
                   {"sweep.csv", "sweep.svg"}, results);
  return 0;
}

int run_experiment(const RunConfig& cfg) {
  auto log = logger();
  std::optional<LoadedCheckpoint> ck;
  std::optional<Vocabulary> vocab_file;
  if (!cfg.ckpt.empty()) ck.emplace(load_checkpoint(cfg.ckpt));
  else vocab_file.emplace(Vocabulary::load(cfg.vocab));
  const Vocabulary& vocab = ck ? ck->vocab : *vocab_file;
  const int max_len = ck ? ck->model.config().max_length : kDefaultMaxLength;
  const Dataset train_set =
      load_labeled_dataset(cfg.data, guess_format(cfg.data), cfg.task, vocab, load_options(max_len));
  LoadOptions test_opts = load_options(max_len);
  test_opts.num_classes = train_set.num_classes;
  const Dataset test_set =
      load_labeled_dataset(cfg.test, guess_format(cfg.test), cfg.task, vocab, test_opts);

  ExperimentConfig ecfg;
  ecfg.shots = cfg.shots;
  ecfg.seeds = cfg.seeds;
  for (const auto& m : cfg.methods) ecfg.methods.push_back(MethodSpec::parse(m));
  ecfg.classifier = cfg.classifier;
  ecfg.decode = cfg.decode;
  ecfg.alpha = AlphaDistribution::parse(cfg.alpha_dist);
  ecfg.literal_orientation = cfg.literal_orientation;
  ecfg.workers = cfg.workers;
  log->info("experiment: {} train, {} test, {}-shot, {} seeds, {} methods", train_set.size(),
            test_set.size(), cfg.shots, cfg.seeds.size(), ecfg.methods.size());
  const ExperimentResult result =
      experiment_suite(train_set, test_set, ck ? &ck->model : nullptr, vocab, ecfg);
  std::filesystem::create_directories(cfg.out);
  write_experiment_csv(cfg.out / "results.csv", result.rows);
  {
    std::ofstream out(cfg.out / "summary.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary.csv");
    write_summary_table(out, result.summary);
  }
  write_summary_table(std::cout, result.summary);
  ordered_json results = ordered_json::array();
  for (const auto& s : result.summary) {
    results.push_back({{"method", s.method},
                       {"policy", s.policy},
                       {"mean", s.mean},
                       {"std", s.stddev},
                       {"runs", s.runs}});
  }
  write_run_record(cfg, cfg.out, true, cfg.ckpt.empty() ? "" : sha256_file(cfg.ckpt),
                   input_record({cfg.data, cfg.test, cfg.ckpt, cfg.vocab}),
                   {"results.csv", "summary.csv"}, results);
  return 0;
}

int run_inspect(const RunConfig& cfg) {
  const CheckpointInfo info = inspect_checkpoint(cfg.ckpt);
  std::cout << "version: " << info.version << '\n'
            << "sha256: " << sha256_file(cfg.ckpt) << '\n'
            << "vocab_size: " << info.vocab_size << '\n'
            << "vocab_sha256: " << info.vocab_hash << '\n'
            << "d_model: " << info.config.d_model << '\n'
            << "heads: " << info.config.heads << '\n'
            << "ff_dim: " << info.config.ff_dim << '\n'
            << "encoder_layers: " << info.config.encoder_layers << '\n'
            << "decoder_layers: " << info.config.decoder_layers << '\n'
            << "max_length: " << info.config.max_length << '\n'
            << "sigma: " << kv::format_double(info.sigma) << '\n'
            << "parameters: " << info.parameter_count << " in " << info.parameters.size()
            << " arrays\n";
  for (const auto& [k, v] : info.metadata) std::cout << "meta." << k << ": " << v << '\n';
  return 0;
}

int run_synth(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out);
  const std::uint64_t s = cfg.synth_seed;
  synthetic::write_lines(cfg.out / "corpus.txt", synthetic::review_corpus(cfg.synth_count, mix_seed(s, 51)));
  synthetic::write_jsonl(cfg.out / "train.jsonl", synthetic::sentiment_task(cfg.synth_count, mix_seed(s, 52)));
  synthetic::write_jsonl(cfg.out / "test.jsonl", synthetic::sentiment_task(cfg.synth_test_count, mix_seed(s, 53)));
  synthetic::write_jsonl(cfg.out / "pairs_train.jsonl",
                         synthetic::agreement_task(cfg.synth_count, mix_seed(s, 54)));
  synthetic::write_jsonl(cfg.out / "pairs_test.jsonl",
                         synthetic::agreement_task(cfg.synth_test_count, mix_seed(s, 55)));
  write_run_record(cfg, cfg.out, true, "", ordered_json::object(),
                   {"corpus.txt", "train.jsonl", "test.jsonl", "pairs_train.jsonl", "pairs_test.jsonl"});
  std::cout << "wrote " << cfg.out.string() << '\n';
  return 0;
}

}  // namespace

int run(const RunConfig& cfg) {
  try {
    if (cfg.command == "train") return run_train(cfg);
    if (cfg.command == "interpolate") return run_interpolate(cfg);
    if (cfg.command == "augment") return run_augment(cfg);
    if (cfg.command == "sweep") return run_sweep(cfg);
    if (cfg.command == "experiment") return run_experiment(cfg);
    if (cfg.command == "inspect-ckpt") return run_inspect(cfg);
    if (cfg.command == "synth") return run_synth(cfg);
    std::cerr << "error: unknown command '" << cfg.command << "'\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << cfg.command << ": " << e.what() << '\n';
    return 1;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  RunConfig cfg;
  try {
    cfg = parse_args(args);
  } catch (const HelpRequested& h) {
    std::cout << h.text;
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return run(cfg);
}

}  // namespace lerptext::cli
