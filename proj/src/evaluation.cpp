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

#include "lerptext/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "lerptext/hashing.hpp"
#include "lerptext/kv_config.hpp"

namespace lerptext {

namespace {

std::unordered_map<int, int> content_counts(const TokenSequence& x, int* total) {
  std::unordered_map<int, int> counts;
  *total = 0;
  for (int id : x.ids) {
    if (Vocabulary::is_special(id)) continue;
    ++counts[id];
    ++*total;
  }
  return counts;
}

}  // namespace

double unigram_precision(const TokenSequence& hyp, const TokenSequence& ref) {
  int hyp_total = 0;
  int ref_total = 0;
  const auto hc = content_counts(hyp, &hyp_total);
  const auto rc = content_counts(ref, &ref_total);
  if (hyp_total == 0) throw std::invalid_argument("unigram_precision: empty hypothesis");
  int matched = 0;
  for (const auto& [id, n] : hc) {
    auto it = rc.find(id);
    if (it != rc.end()) matched += std::min(n, it->second);
  }
  return static_cast<double>(matched) / hyp_total;
}

std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

PrecisionCurve alpha_sweep(const InterpModel& model, std::span<const TokenPair> pairs,
                           std::span<const double> grid, const DecodeConfig& cfg, int workers) {
  if (grid.empty()) throw std::invalid_argument("alpha_sweep: empty alpha grid");
  if (pairs.empty()) throw std::invalid_argument("alpha_sweep: no evaluation pairs");
  std::vector<double> alphas(grid.begin(), grid.end());
  for (double a : alphas) (void)MixRatio(a);
  std::sort(alphas.begin(), alphas.end());
  if (std::adjacent_find(alphas.begin(), alphas.end()) != alphas.end()) {
    throw std::invalid_argument("alpha_sweep: duplicate grid point");
  }

  std::vector<InterpolationRequest> items;
  items.reserve(alphas.size() * pairs.size());
  for (double a : alphas) {
    for (size_t i = 0; i < pairs.size(); ++i) {
      items.push_back({pairs[i].a, pairs[i].b, a, static_cast<int>(i), static_cast<int>(i)});
    }
  }
  const auto results = batch_interpolate(model, items, cfg, workers);

  PrecisionCurve curve;
  curve.alphas = alphas;
  curve.n_pairs = static_cast<int>(pairs.size());
  for (size_t g = 0; g < alphas.size(); ++g) {
    std::vector<double> pa;
    std::vector<double> pb;
    for (size_t i = 0; i < pairs.size(); ++i) {
      const TokenSequence hyp = results[g * pairs.size() + i].content();
      if (hyp.empty()) {
        pa.push_back(0.0);
        pb.push_back(0.0);
        continue;
      }
      pa.push_back(unigram_precision(hyp, pairs[i].a));
      pb.push_back(unigram_precision(hyp, pairs[i].b));
    }
    const auto [ma, sa] = mean_std(pa);
    const auto [mb, sb] = mean_std(pb);
    curve.mean_precision_a.push_back(ma);
    curve.std_a.push_back(sa);
    curve.mean_precision_b.push_back(mb);
    curve.std_b.push_back(sb);
  }
  return curve;
}

void write_sweep_csv(std::ostream& out, const PrecisionCurve& curve) {
  out << "alpha,mean_prec_a,std_a,mean_prec_b,std_b,n_pairs\n";
  for (size_t i = 0; i < curve.alphas.size(); ++i) {
    out << kv::format_double(curve.alphas[i]) << ',' << kv::format_double(curve.mean_precision_a[i])
        << ',' << kv::format_double(curve.std_a[i]) << ','
        << kv::format_double(curve.mean_precision_b[i]) << ',' << kv::format_double(curve.std_b[i])
        << ',' << curve.n_pairs << '\n';
  }
}

void write_sweep_csv(const std::filesystem::path& path, const PrecisionCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_sweep_csv(out, curve);
}

void write_sweep_svg(const std::filesystem::path& path, const PrecisionCurve& curve) {
  constexpr double kW = 480, kH = 320, kLeft = 56, kRight = 120, kTop = 20, kBottom = 44;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  auto px = [&](double a) { return kLeft + a * pw; };
  auto py = [&](double p) { return kTop + (1.0 - p) * ph; };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    svg << "<text x=\"" << px(v) << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">"
        << v << "</text>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v
        << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 8
      << "\" text-anchor=\"middle\">alpha</text>\n";
  svg << "<text transform=\"translate(14," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">unigram precision</text>\n";
  auto series = [&](const std::vector<double>& ys, const char* color, const char* name, int slot) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < curve.alphas.size(); ++i) {
      svg << px(curve.alphas[i]) << ',' << py(ys[i]) << ' ';
    }
    svg << "\"/>\n";
    for (size_t i = 0; i < curve.alphas.size(); ++i) {
      svg << "<circle cx=\"" << px(curve.alphas[i]) << "\" cy=\"" << py(ys[i])
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 14 + 18 * slot;
    svg << "<line x1=\"" << kW - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kW - kRight + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kW - kRight + 34 << "\" y=\"" << ly + 4 << "\">" << name << "</text>\n";
  };
  series(curve.mean_precision_a, "#1f77b4", "vs source a", 0);
  series(curve.mean_precision_b, "#d62728", "vs source b", 1);
  svg << "</svg>\n";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << svg.str();
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double rank_correlation(std::span<const double> x, std::span<const double> y, bool* constant) {
  if (x.size() != y.size()) throw std::invalid_argument("rank_correlation: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("rank_correlation: need at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  const bool flat = sxx == 0.0 || syy == 0.0;
  if (constant) *constant = flat;
  if (flat) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

Monotonicity monotonicity_score(const PrecisionCurve& curve) {
  if (curve.alphas.size() < 3) {
    throw std::invalid_argument("monotonicity_score: need at least 3 grid points, got " +
                                std::to_string(curve.alphas.size()));
  }
  Monotonicity m;
  m.rho_a = rank_correlation(curve.alphas, curve.mean_precision_a, &m.constant_a);
  m.rho_b = rank_correlation(curve.alphas, curve.mean_precision_b, &m.constant_b);
  return m;
}

double source_preference(const InterpModel& model, std::span<const TokenPair> pairs,
                         MixRatio alpha) {
  if (pairs.empty()) throw std::invalid_argument("source_preference: no pairs");
  int prefer_a = 0;
  for (const auto& p : pairs) {
    const InterpolatedState state = build_state(model, p.a, p.b, alpha);
    if (decoder_logprob(model, state, p.a) > decoder_logprob(model, state, p.b)) ++prefer_a;
  }
  return static_cast<double>(prefer_a) / static_cast<double>(pairs.size());
}

Dataset sample_k_shot(const Dataset& data, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("sample_k_shot: k must be >= 1");
  std::vector<std::vector<int>> by_class(static_cast<size_t>(data.num_classes));
  for (int i = 0; i < data.size(); ++i) {
    const int* cls = std::get_if<int>(&data.examples[i].label);
    if (!cls) throw std::invalid_argument("sample_k_shot: requires hard labels");
    by_class.at(static_cast<size_t>(*cls)).push_back(i);
  }
  Dataset out;
  out.num_classes = data.num_classes;
  out.task_kind = data.task_kind;
  std::mt19937_64 rng(mix_seed(seed, 31));
  for (int c = 0; c < data.num_classes; ++c) {
    auto& idx = by_class[c];
    if (static_cast<int>(idx.size()) < k) {
      throw std::invalid_argument("sample_k_shot: class " + std::to_string(c) + " has " +
                                  std::to_string(idx.size()) + " examples, need " +
                                  std::to_string(k));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < k; ++i) out.examples.push_back(data.examples[idx[i]]);
  }
  return out;
}

std::string MethodSpec::method_name() const {
  return kind == Kind::kVanilla ? "vanilla" : "linda";
}

std::string MethodSpec::policy_name() const {
  if (kind == Kind::kVanilla) return "none";
  if (policy == LabelPolicyKind::kSharpened) {
    return "sharpened:" + kv::format_double(temperature);
  }
  return std::string(to_string(policy));
}

MethodSpec MethodSpec::parse(std::string_view s) {
  MethodSpec m;
  if (s == "vanilla") return m;
  if (!s.starts_with("linda")) {
    throw std::invalid_argument("unknown method '" + std::string(s) + "' (expected vanilla or linda[:policy])");
  }
  m.kind = Kind::kLinda;
  std::string_view rest = s.substr(5);
  if (rest.empty()) return m;
  if (rest.front() != ':') throw std::invalid_argument("unknown method '" + std::string(s) + "'");
  rest.remove_prefix(1);
  const size_t colon = rest.find(':');
  m.policy = parse_label_policy(rest.substr(0, colon));
  if (colon != std::string_view::npos) {
    if (m.policy != LabelPolicyKind::kSharpened) {
      throw std::invalid_argument("method '" + std::string(s) + "': only sharpened takes a temperature");
    }
    m.temperature = kv::to_double("temperature", rest.substr(colon + 1));
    if (!(m.temperature > 0.0)) {
      throw std::invalid_argument("method '" + std::string(s) + "': temperature must be positive");
    }
  }
  return m;
}

ExperimentResult experiment_suite(const Dataset& train, const Dataset& test,
                                  const InterpModel* model, const Vocabulary& vocab,
                                  const ExperimentConfig& config) {
  if (config.methods.empty()) throw std::invalid_argument("experiment_suite: no methods");
  if (config.seeds.empty()) throw std::invalid_argument("experiment_suite: no seeds");
  if (config.shots < 0) throw std::invalid_argument("experiment_suite: shots must be >= 0");
  if (test.examples.empty()) throw std::invalid_argument("experiment_suite: empty test set");
  if (train.num_classes != test.num_classes) {
    throw std::invalid_argument("experiment_suite: train and test class counts differ");
  }
  if (config.shots > 0 && config.shots * train.num_classes > train.size()) {
    throw std::invalid_argument("experiment_suite: " + std::to_string(config.shots) +
                                "-shot needs " + std::to_string(config.shots * train.num_classes) +
                                " examples, dataset has " + std::to_string(train.size()));
  }
  for (const auto& m : config.methods) {
    if (m.kind == MethodSpec::Kind::kLinda && model == nullptr) {
      throw std::invalid_argument("experiment_suite: linda requires an interpolation model");
    }
  }
  ExperimentResult result;
  for (std::uint64_t seed : config.seeds) {
    const Dataset subset = config.shots > 0 ? sample_k_shot(train, config.shots, seed) : train;
    const std::vector<SoftExample> clean = to_soft_examples(subset);
    ClassifierConfig ccfg = config.classifier;
    ccfg.seed = mix_seed(config.classifier.seed, 21, seed);
    for (const auto& m : config.methods) {
      std::vector<SoftExample> data = clean;
      if (m.kind == MethodSpec::Kind::kLinda) {
        LabelPolicy policy;
        policy.kind = m.policy;
        policy.temperature = m.temperature;
        policy.literal_orientation = config.literal_orientation;
        std::optional<ClassifierModel> teacher;
        if (m.policy == LabelPolicyKind::kTeacher) {
          ClassifierConfig tcfg = config.classifier;
          tcfg.seed = mix_seed(config.classifier.seed, 22, seed);
          teacher.emplace(train_classifier(clean, vocab, subset.num_classes, tcfg));
          policy.teacher = &*teacher;
        }
        AugmentOptions opts;
        opts.alpha = config.alpha;
        opts.seed = mix_seed(seed, 23);
        opts.workers = config.workers;
        DecodeConfig dcfg = config.decode;
        dcfg.seed = mix_seed(config.decode.seed, 24, seed);
        for (auto& ex : augment_dataset(subset, *model, vocab, policy, dcfg, opts)) {
          data.push_back(SoftExample{std::move(ex.texts), std::move(ex.soft_label)});
        }
      }
      const ClassifierModel clf = train_classifier(data, vocab, subset.num_classes, ccfg);
      result.rows.push_back(ExperimentRow{m.method_name(), m.policy_name(), config.shots, seed,
                                          evaluate_classifier(clf, test).accuracy});
    }
  }
  result.summary = summarize(result.rows);
  return result;
}

std::vector<ExperimentSummary> summarize(std::span<const ExperimentRow> rows) {
  std::vector<ExperimentSummary> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ExperimentSummary& s) {
      return s.method == r.method && s.policy == r.policy && s.shots == r.shots;
    });
    if (it == out.end()) {
      out.push_back(ExperimentSummary{r.method, r.policy, r.shots, 0.0, 0.0, 0});
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<size_t>(it - out.begin())].push_back(r.accuracy);
  }
  for (size_t i = 0; i < out.size(); ++i) {
    const auto [m, s] = mean_std(values[i]);
    out[i].mean = m;
    out[i].stddev = s;
    out[i].runs = static_cast<int>(values[i].size());
  }
  return out;
}

void write_experiment_csv(const std::filesystem::path& path, std::span<const ExperimentRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,policy,shots,seed,accuracy\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.policy << ',' << r.shots << ',' << r.seed << ','
        << kv::format_double(r.accuracy) << '\n';
  }
}

void write_summary_table(std::ostream& out, std::span<const ExperimentSummary> summary) {
  out << "method,policy,shots,runs,mean_accuracy,std_accuracy\n";
  for (const auto& s : summary) {
    out << s.method << ',' << s.policy << ',' << s.shots << ',' << s.runs << ','
        << kv::format_double(s.mean) << ',' << kv::format_double(s.stddev) << '\n';
  }
}

}  // namespace lerptext
