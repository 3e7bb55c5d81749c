#include "cardforge/selection.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cardforge/fileio.hpp"
#include "cardforge/logging.hpp"
#include "cardforge/manifest.hpp"
#include "cardforge/parallel.hpp"
#include "cardforge/resources.hpp"
#include "cardforge/rng.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

namespace fs = std::filesystem;

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kCenterTieTolerance = 1e-12;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return std::clamp(s, -1.0, 1.0);
}

void check_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error(ErrorKind::invalid_argument, "cannot cluster an empty sample set");
  const std::size_t dim = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != dim) throw Error(ErrorKind::invalid_argument, "embedding dimension mismatch");
    double norm2 = 0.0;
    for (double v : r) norm2 += v * v;
    if (std::abs(norm2 - 1.0) > kUnitTolerance) {
      throw Error(ErrorKind::invalid_argument, "clustering expects unit-norm vectors");
    }
  }
}

// Linkage values of active cluster pairs, stored as a condensed upper
// triangle. Average linkage stores the sum of member cosines.
class LinkageTable {
 public:
  LinkageTable(std::size_t n, Linkage linkage) : n_(n), linkage_(linkage), cells_(n * (n - 1) / 2) {}

  double& raw(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return cells_[i * n_ - i * (i + 1) / 2 + (j - i - 1)];
  }

  double value(std::size_t i, std::size_t j, const std::vector<std::size_t>& sizes) {
    double v = raw(i, j);
    if (linkage_ == Linkage::average) v /= static_cast<double>(sizes[i]) * static_cast<double>(sizes[j]);
    return v;
  }

  double combine(double a, double b) const {
    switch (linkage_) {
      case Linkage::average: return a + b;
      case Linkage::single: return std::max(a, b);
      case Linkage::complete: return std::min(a, b);
    }
    return a + b;
  }

 private:
  std::size_t n_;
  Linkage linkage_;
  std::vector<double> cells_;
};

}  // namespace

std::vector<std::vector<std::size_t>> cluster_rows(const std::vector<std::vector<double>>& rows, double theta,
                                                   Linkage linkage) {
  check_rows(rows);
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorKind::invalid_argument, "theta must lie in (0, 1]", "theta");
  const std::size_t n = rows.size();
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  if (n == 1) return members;

  LinkageTable table(n, linkage);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) table.raw(i, j) = dot(rows[i], rows[j]);
  }
  std::vector<std::size_t> sizes(n, 1);
  std::vector<bool> active(n, true);
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  // best[i]: preferred partner j > i of cluster i, smallest j among equals.
  std::vector<std::size_t> best(n, none);
  std::vector<double> best_value(n, -INFINITY);

  auto recompute = [&](std::size_t i) {
    best[i] = none;
    best_value[i] = -INFINITY;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!active[j]) continue;
      double v = table.value(i, j, sizes);
      if (v > best_value[i]) {
        best_value[i] = v;
        best[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) recompute(i);

  while (true) {
    std::size_t a = none;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || best[i] == none) continue;
      if (a == none || best_value[i] > best_value[a]) a = i;
    }
    if (a == none || !(best_value[a] > theta)) break;
    const std::size_t b = best[a];

    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      table.raw(a, c) = table.combine(table.raw(a, c), table.raw(b, c));
    }
    sizes[a] += sizes[b];
    active[b] = false;
    members[a].insert(members[a].end(), members[b].begin(), members[b].end());
    members[b].clear();

    recompute(a);
    for (std::size_t c = 0; c < b; ++c) {
      if (!active[c] || c == a) continue;
      if (best[c] == a || best[c] == b) {
        recompute(c);
      } else if (c < a) {
        double v = table.value(c, a, sizes);
        if (v > best_value[c] || (v == best_value[c] && a < best[c])) {
          best_value[c] = v;
          best[c] = a;
        }
      }
    }
  }

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    std::sort(members[i].begin(), members[i].end());
    out.push_back(std::move(members[i]));
  }
  return out;
}

std::string cluster_center(const Cluster& cluster, const std::map<std::string, EmbeddingVector>& vectors) {
  if (cluster.member_ids.empty()) throw Error(ErrorKind::invalid_argument, "empty cluster");
  std::vector<std::string> ids = cluster.member_ids;
  std::sort(ids.begin(), ids.end());
  if (ids.size() == 1) return ids.front();
  std::vector<const EmbeddingVector*> vs;
  for (const auto& id : ids) {
    auto it = vectors.find(id);
    if (it == vectors.end()) throw Error(ErrorKind::invalid_argument, "no vector for sample " + id);
    vs.push_back(&it->second);
  }
  std::size_t best = 0;
  double best_sum = -INFINITY;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < vs.size(); ++j) {
      if (i != j) sum += cosine(*vs[i], *vs[j]);
    }
    if (sum > best_sum + kCenterTieTolerance) {
      best_sum = sum;
      best = i;
    }
  }
  return ids[best];
}

std::vector<Cluster> cluster_samples(const std::map<std::string, EmbeddingVector>& vectors, double theta,
                                     Linkage linkage) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  for (const auto& [id, v] : vectors) {
    ids.push_back(id);
    rows.push_back(v.values);
  }
  auto groups = cluster_rows(rows, theta, linkage);
  std::vector<Cluster> out;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    Cluster cl;
    cl.cluster_id = static_cast<std::int64_t>(c);
    for (auto idx : groups[c]) cl.member_ids.push_back(ids[idx]);
    cl.center_id = cluster_center(cl, vectors);
    out.push_back(std::move(cl));
  }
  return out;
}

double representativeness_cluster_size(const Cluster& cluster, std::size_t max_size) {
  if (cluster.member_ids.empty()) throw Error(ErrorKind::invalid_argument, "empty cluster");
  if (max_size < cluster.member_ids.size()) {
    throw Error(ErrorKind::invalid_argument, "max cluster size is smaller than the cluster", "max_size");
  }
  return static_cast<double>(cluster.member_ids.size()) / static_cast<double>(max_size);
}

ProbeSet ProbeSet::for_culture(const std::string& culture, std::size_t limit) const {
  ProbeSet out;
  for (const auto& p : items) {
    if (out.items.size() >= limit) break;
    if (p.culture.empty() || p.culture == culture) out.items.push_back(p);
  }
  return out;
}

ProbeSet parse_probe_set(std::string_view jsonl, const std::string& origin) {
  ProbeSet set;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = fields::parse_object(line);
      Probe p;
      p.question = fields::get_string(j, "question");
      p.options = fields::get_string_array(j, "options");
      fields::invariant(p.options.size() >= 2, "options", "a probe needs at least two options");
      fields::invariant(p.options.size() <= 26, "options", "at most 26 options are supported");
      p.gold = static_cast<int>(fields::get_int(j, "gold"));
      fields::invariant(p.gold >= 0 && static_cast<std::size_t>(p.gold) < p.options.size(), "gold",
                        "gold index out of range");
      p.topic = fields::get_optional_string(j, "topic").value_or("");
      p.culture = fields::get_optional_string(j, "culture").value_or("");
      set.items.push_back(std::move(p));
    } catch (const FieldError& e) {
      throw Error(ErrorKind::schema, origin + ":" + std::to_string(line_no) + ": " + e.what(), e.field());
    }
  }
  if (set.items.empty()) throw Error(ErrorKind::schema, origin + ": probe set is empty");
  return set;
}

ProbeSet load_probe_set(const std::string& path) {
  if (path.empty()) return parse_probe_set(resources::get("data/probes.sample.jsonl"), "probes.sample.jsonl");
  return parse_probe_set(fileio::read_file(path), path);
}

double representativeness_in_context(const ClusterSample& center, const std::vector<ClusterSample>& members,
                                     const std::map<std::string, EmbeddingVector>& vectors, const ProbeSet& probes,
                                     ModelUnderTest& model, int shots, const PromptSet& prompts,
                                     const std::string& culture_name) {
  if (shots < 1) throw Error(ErrorKind::invalid_argument, "shots must be positive", "shots");
  if (static_cast<std::size_t>(shots) > members.size()) {
    throw Error(ErrorKind::precondition, "shots exceed the cluster size", "shots");
  }
  if (probes.items.empty()) throw Error(ErrorKind::precondition, "probe set is empty");
  if (!model.capabilities().free_text) throw Error(ErrorKind::precondition, "probe model must produce free text");

  const EmbeddingVector& cv = vectors.at(center.sample_id);
  std::vector<std::pair<double, const ClusterSample*>> others;
  for (const auto& m : members) {
    if (m.sample_id == center.sample_id) continue;
    others.emplace_back(cosine(cv, vectors.at(m.sample_id)), &m);
  }
  std::sort(others.begin(), others.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second->sample_id < y.second->sample_id;
  });
  std::vector<const ClusterSample*> shots_used{&center};
  for (const auto& o : others) {
    if (shots_used.size() >= static_cast<std::size_t>(shots)) break;
    shots_used.push_back(o.second);
  }
  std::string examples;
  for (std::size_t i = 0; i < shots_used.size(); ++i) {
    examples += "Example " + std::to_string(i + 1) + ":\nQ: " + shots_used[i]->question_text +
                "\nA: " + shots_used[i]->response_text + "\n";
  }

  std::vector<std::string> user_prompts;
  for (const auto& p : probes.items) {
    user_prompts.push_back(prompts.render("probe.user", {{"option_count", std::to_string(p.options.size())},
                                                         {"culture_name", culture_name},
                                                         {"examples_block", examples},
                                                         {"question", p.question},
                                                         {"options_block", lettered_options(p.options)}}));
  }
  auto replies = model.generate(user_prompts);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probes.items.size(); ++i) {
    if (!replies[i]) {
      log().warn("probe {} for sample {}: model call failed", i, center.sample_id);
      continue;
    }
    auto letter = parse_answer_letter(*replies[i], probes.items[i].options.size());
    if (!letter) {
      log().warn("probe {} for sample {}: unparseable answer", i, center.sample_id);
      continue;
    }
    if (*letter == probes.items[i].gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probes.items.size());
}

double distinctiveness(std::span<const double> target, const std::vector<std::span<const double>>& peers) {
  if (peers.empty()) throw Error(ErrorKind::invalid_argument, "distinctiveness needs at least one peer");
  double sum = 0.0;
  for (const auto& p : peers) sum += 1.0 - cosine(target, p);
  return sum / static_cast<double>(peers.size());
}

double distinctiveness(const EmbeddingVector& target, const std::vector<EmbeddingVector>& peers) {
  std::vector<std::span<const double>> spans;
  for (const auto& p : peers) spans.emplace_back(p.values);
  return distinctiveness(std::span<const double>(target.values), spans);
}

double combined_score(double r, double d) { return r * d; }

SelectionResult select(const std::vector<ScoredSample>& candidates, int budget, const std::string& culture,
                       ScoringMode mode) {
  if (budget <= 0) throw Error(ErrorKind::invalid_argument, "budget must be positive", "budget");
  std::vector<ScoredSample> sorted = candidates;
  for (const auto& c : sorted) {
    if (!c.s) throw Error(ErrorKind::invalid_argument, "candidate " + c.sample_id + " has no score", "s");
  }
  std::sort(sorted.begin(), sorted.end(), [](const ScoredSample& a, const ScoredSample& b) {
    if (*a.s != *b.s) return *a.s > *b.s;
    return a.sample_id < b.sample_id;
  });
  if (sorted.size() > static_cast<std::size_t>(budget)) sorted.resize(static_cast<std::size_t>(budget));
  return {culture, std::move(sorted), budget, mode};
}

std::string sample_text(ClusterText mode, std::string_view question, std::string_view response) {
  if (mode == ClusterText::response) return std::string(response);
  return "Question: " + std::string(question) + "\nAnswer: " + std::string(response);
}

namespace {

ordered_json quantiles(std::vector<double> values) {
  ordered_json j;
  if (values.empty()) {
    for (const char* k : {"min", "p25", "p50", "p75", "max"}) j[k] = nullptr;
    return j;
  }
  std::sort(values.begin(), values.end());
  // Nearest-rank quantiles.
  auto at = [&](double q) {
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
  };
  j["min"] = values.front();
  j["p25"] = at(0.25);
  j["p50"] = at(0.5);
  j["p75"] = at(0.75);
  j["max"] = values.back();
  return j;
}

struct CultureOutcome {
  std::vector<std::size_t> sample_rows;  // indices into the run's sample list
  std::vector<Cluster> clusters;
  SelectionResult selection;
  std::size_t candidates = 0;
  std::vector<std::string> warnings;
};

std::string require_input(const fs::path& run_dir, const char* name) {
  fs::path p = run_dir / name;
  if (!fs::exists(p)) {
    throw Error(ErrorKind::config, "missing input " + p.string() + " (run synthesize first)", name);
  }
  return p.string();
}

}  // namespace

SelectionSummary run_selection(const RunConfig& config, Gateway& gateway, const PromptSet& prompts,
                               std::shared_ptr<EmbeddingProvider> embedder) {
  const fs::path run_dir = config.run_dir;
  const auto adapted_path = require_input(run_dir, "questions.adapted.jsonl");
  const auto contrastive_path = require_input(run_dir, "responses.contrastive.jsonl");
  const auto questions = read_questions(adapted_path);
  const auto responses = read_responses(contrastive_path);

  std::map<std::string, const QuestionRecord*> question_by_id;
  for (const auto& q : questions) question_by_id[q.id] = &q;
  std::map<std::string, std::size_t> roster_pos;
  for (std::size_t i = 0; i < config.cultures.size(); ++i) roster_pos[config.cultures[i].code] = i;

  // Samples ordered by roster position, then sample id.
  std::vector<ScoredSample> samples;
  std::vector<std::string> parent_of;  // universal parent per sample
  {
    std::set<std::string> seen;
    std::vector<std::pair<ScoredSample, std::string>> tmp;
    for (const auto& r : responses) {
      auto q = question_by_id.find(r.question_id);
      if (q == question_by_id.end()) {
        throw Error(ErrorKind::schema, contrastive_path + ": question_id " + r.question_id + " does not resolve",
                    "question_id");
      }
      if (!roster_pos.count(r.culture)) continue;
      ScoredSample s;
      s.sample_id = ScoredSample::make_id(r.question_id, r.culture, r.text);
      if (!seen.insert(s.sample_id).second) continue;
      s.question_id = r.question_id;
      s.culture = r.culture;
      s.question_text = q->second->text;
      s.response_text = r.text;
      tmp.emplace_back(std::move(s), q->second->parent_id.value_or(q->second->id));
    }
    std::sort(tmp.begin(), tmp.end(), [&](const auto& a, const auto& b) {
      auto pa = roster_pos[a.first.culture], pb = roster_pos[b.first.culture];
      if (pa != pb) return pa < pb;
      return a.first.sample_id < b.first.sample_id;
    });
    for (auto& [s, parent] : tmp) {
      samples.push_back(std::move(s));
      parent_of.push_back(std::move(parent));
    }
  }

  const fs::path cache_root = effective_cache_dir(config);
  EmbeddingService service(embedder, cache_root / "embeddings");
  std::vector<std::string> texts;
  for (const auto& s : samples) texts.push_back(sample_text(config.cluster_text, s.question_text, s.response_text));
  const auto vectors = samples.empty() ? std::vector<EmbeddingVector>{} : service.embed_texts(texts);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].embedding_ref = static_cast<std::int64_t>(i);

  std::map<std::string, std::vector<std::size_t>> rows_by_parent;
  for (std::size_t i = 0; i < samples.size(); ++i) rows_by_parent[parent_of[i]].push_back(i);

  std::optional<ProbeSet> probes;
  std::unique_ptr<GatewayModel> probe_model;
  if (config.scoring_mode == ScoringMode::in_context) {
    probes = load_probe_set(config.probes_path);
    probe_model = std::make_unique<GatewayModel>(gateway, config.probe_model, prompts, config.max_in_flight);
  }

  std::vector<CultureOutcome> outcomes(config.cultures.size());
  for (std::size_t i = 0; i < samples.size(); ++i) outcomes[roster_pos[samples[i].culture]].sample_rows.push_back(i);

  auto score_culture = [&](std::size_t ci) {
    const Culture& culture = config.cultures[ci];
    CultureOutcome& out = outcomes[ci];
    out.selection = {culture.code, {}, config.budget_per_culture, config.scoring_mode};
    if (out.sample_rows.empty()) {
      out.warnings.push_back("culture " + culture.code + " has no samples");
      return;
    }
    std::map<std::string, EmbeddingVector> by_id;
    std::map<std::string, std::size_t> row_of;
    for (auto row : out.sample_rows) {
      by_id.emplace(samples[row].sample_id, vectors[row]);
      row_of[samples[row].sample_id] = row;
    }
    out.clusters = cluster_samples(by_id, config.theta, config.linkage);
    std::size_t max_size = 0;
    for (const auto& c : out.clusters) max_size = std::max(max_size, c.member_ids.size());
    std::optional<ProbeSet> culture_probes;
    if (probes) culture_probes = probes->for_culture(culture.code, static_cast<std::size_t>(config.probes_per_culture));

    std::vector<ScoredSample> candidates;
    for (const auto& cluster : out.clusters) {
      for (const auto& id : cluster.member_ids) samples[row_of[id]].cluster_id = cluster.cluster_id;
      const std::size_t center_row = row_of[cluster.center_id];
      ScoredSample& center = samples[center_row];

      // Distinctiveness peers: other cultures' samples for the same universal
      // question, or any other-culture sample in random mode.
      std::vector<std::size_t> pool;
      if (config.peer_mode == PeerMode::same_question) {
        for (auto row : rows_by_parent.at(parent_of[center_row])) {
          if (samples[row].culture != culture.code) pool.push_back(row);
        }
      } else {
        for (std::size_t row = 0; row < samples.size(); ++row) {
          if (samples[row].culture != culture.code) pool.push_back(row);
        }
      }
      std::sort(pool.begin(), pool.end(),
                [&](std::size_t a, std::size_t b) { return samples[a].sample_id < samples[b].sample_id; });
      if (pool.empty()) {
        out.warnings.push_back("sample " + center.sample_id + " has no peer responses; not a candidate");
        continue;
      }
      if (pool.size() > static_cast<std::size_t>(config.distinctiveness_peers)) {
        Rng rng(derive_seed(config.seed, "distinctiveness", center.sample_id));
        auto picks = sample_indices(pool.size(), static_cast<std::size_t>(config.distinctiveness_peers), rng);
        std::vector<std::size_t> chosen;
        for (auto p : picks) chosen.push_back(pool[p]);
        pool = std::move(chosen);
      }
      std::vector<std::span<const double>> peer_vecs;
      for (auto row : pool) peer_vecs.emplace_back(vectors[row].values);
      const double d = distinctiveness(std::span<const double>(vectors[center_row].values), peer_vecs);

      double r = 0.0;
      if (config.scoring_mode == ScoringMode::cluster_size) {
        r = config.r_normalization == RNormalization::max ? representativeness_cluster_size(cluster, max_size)
                                                          : static_cast<double>(cluster.member_ids.size());
      } else {
        std::vector<ClusterSample> members;
        for (const auto& id : cluster.member_ids) {
          const auto& s = samples[row_of[id]];
          members.push_back({s.sample_id, s.question_text, s.response_text});
        }
        const int shots = std::min<int>(config.shots, static_cast<int>(members.size()));
        r = representativeness_in_context({center.sample_id, center.question_text, center.response_text}, members,
                                          by_id, *culture_probes, *probe_model, shots, prompts, culture.display_name);
      }
      center.r = r;
      center.d = d;
      center.s = combined_score(r, d);
      candidates.push_back(center);
    }
    out.candidates = candidates.size();
    out.selection = select(candidates, config.budget_per_culture, culture.code, config.scoring_mode);
  };
  // In-context probing goes through the gateway's own concurrency bound, so
  // cultures run one at a time there; clustering alone runs in parallel.
  parallel_for(config.cultures.size(), config.scoring_mode == ScoringMode::in_context ? 1 : config.max_in_flight,
               score_culture);

  // Outputs.
  fileio::ensure_directory(run_dir);
  RunManifest manifest = load_manifest(run_dir);
  manifest.tool_version = CARDFORGE_VERSION;
  manifest.config_hash = config_hash(config);
  manifest.seed = config.seed;
  ordered_json settings = to_json(config);
  ordered_json fingerprint_fields = ordered_json::array({"selection", embedder->id(), sha256_file(adapted_path),
                                                         sha256_file(contrastive_path)});
  for (const char* key : {"cultures", "theta", "linkage", "budget_per_culture", "scoring_mode", "r_normalization",
                          "cluster_text", "peer_mode", "distinctiveness_peers", "shots", "probes_per_culture",
                          "probes_path", "probe_model", "embedding", "seed"}) {
    fingerprint_fields.push_back(settings[key]);
  }
  if (config.scoring_mode == ScoringMode::in_context) fingerprint_fields.push_back(prompts.digest());
  const std::string fingerprint = content_hash(fingerprint_fields);

  manifest.stage_outputs["samples.scored"] =
      write_stage_file(run_dir, "samples.scored.jsonl", to_jsonl_lines(samples), fingerprint);

  std::vector<SidecarRow> sidecar;
  for (std::size_t i = 0; i < samples.size(); ++i) sidecar.push_back({samples[i].sample_id, &vectors[i]});
  write_embedding_sidecar(run_dir / "embeddings.f32", run_dir / "embeddings.index.json", sidecar);
  manifest.stage_outputs["embeddings"] = describe_file(run_dir, "embeddings.f32", samples.size(), fingerprint);
  manifest.stage_outputs["embeddings.index"] = describe_file(run_dir, "embeddings.index.json", samples.size(), fingerprint);

  SelectionSummary summary;
  ordered_json cultures_report = ordered_json::object();
  for (std::size_t ci = 0; ci < config.cultures.size(); ++ci) {
    const auto& code = config.cultures[ci].code;
    auto& out = outcomes[ci];
    for (const auto& w : out.warnings) log().warn("stage=select culture={} {}", code, w);
    // Chosen records carry the final cluster ids.
    for (auto& c : out.selection.chosen) {
      c = samples[static_cast<std::size_t>(*c.embedding_ref)];
    }
    const std::string file = "selection." + code + ".jsonl";
    manifest.stage_outputs["selection." + code] =
        write_stage_file(run_dir, file, to_jsonl_lines(out.selection.chosen), fingerprint);
    summary.chosen_per_culture[code] = out.selection.chosen.size();

    std::map<std::size_t, std::size_t> histogram;
    for (const auto& c : out.clusters) ++histogram[c.member_ids.size()];
    ordered_json hist = ordered_json::object();
    for (const auto& [size, count] : histogram) hist[std::to_string(size)] = count;
    std::vector<double> scores;
    for (auto row : out.sample_rows) {
      if (samples[row].s) scores.push_back(*samples[row].s);
    }
    ordered_json entry;
    entry["samples"] = out.sample_rows.size();
    entry["clusters"] = out.clusters.size();
    entry["candidates"] = out.candidates;
    entry["chosen"] = out.selection.chosen.size();
    entry["cluster_size_histogram"] = hist;
    entry["score_quantiles"] = quantiles(scores);
    cultures_report[code] = entry;
  }
  ordered_json report;
  report["scoring_mode"] = to_string(config.scoring_mode);
  report["theta"] = config.theta;
  report["linkage"] = to_string(config.linkage);
  report["budget_per_culture"] = config.budget_per_culture;
  report["embedding"] = embedder->id();
  report["cultures"] = cultures_report;
  fileio::write_file_atomic(run_dir / "selection.summary.json", report.dump(2) + "\n");
  manifest.stage_outputs["selection.summary"] = describe_file(run_dir, "selection.summary.json", 1, fingerprint);
  save_manifest(run_dir, manifest);
  summary.report = std::move(report);
  return summary;
}

}  // namespace cardforge
