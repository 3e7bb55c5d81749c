#include "cardforge/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "cardforge/fileio.hpp"
#include "cardforge/logging.hpp"
#include "cardforge/manifest.hpp"
#include "cardforge/resources.hpp"
#include "cardforge/selection.hpp"
#include "cardforge/text.hpp"

namespace cardforge {

namespace fs = std::filesystem;

const std::set<std::string>& bundled_stopwords() {
  static const std::set<std::string> words = [] {
    std::set<std::string> out;
    for (const auto& line : text::split_lines(resources::get("data/stopwords.txt"))) {
      std::string w = text::trim(line);
      if (!w.empty() && w[0] != '#') out.insert(text::to_lower_ascii(w));
    }
    return out;
  }();
  return words;
}

std::vector<std::string> tokenize(std::string_view input, const std::set<std::string>& stopwords) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stopwords.count(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char ch : input) {
    auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) || u >= 0x80) {
      cur += static_cast<char>(std::tolower(u));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::vector<std::string> extract_terms(std::string_view input, const std::set<std::string>& stopwords) {
  auto tokens = tokenize(input, stopwords);
  std::vector<std::string> out = tokens;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.push_back(tokens[i] + " " + tokens[i + 1]);
  return out;
}

std::vector<TermWeight> tfidf_top_terms(const std::map<std::string, std::vector<std::string>>& corpus,
                                        const std::string& culture, int k, const std::set<std::string>& stopwords) {
  if (corpus.size() < 2) throw Error(ErrorKind::invalid_argument, "tf-idf needs at least two cultures");
  if (k < 1) throw Error(ErrorKind::invalid_argument, "k must be positive", "k");
  if (!corpus.count(culture)) throw Error(ErrorKind::invalid_argument, "culture " + culture + " is not in the corpus");

  std::map<std::string, std::size_t> df;
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& [code, texts] : corpus) {
    std::set<std::string> present;
    for (const auto& t : texts) {
      for (auto& term : extract_terms(t, stopwords)) {
        if (code == culture) {
          ++counts[term];
          ++total;
        }
        present.insert(std::move(term));
      }
    }
    for (const auto& term : present) ++df[term];
  }
  const double n = static_cast<double>(corpus.size());
  std::vector<TermWeight> out;
  for (const auto& [term, count] : counts) {
    const double tf = static_cast<double>(count) / static_cast<double>(total);
    const double idf = std::log(n / static_cast<double>(df[term]));
    out.push_back({term, tf * idf});
  }
  std::sort(out.begin(), out.end(), [](const TermWeight& a, const TermWeight& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.term < b.term;
  });
  if (out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
  return out;
}

Projection project_embeddings(const std::vector<LabeledVector>& vectors) {
  if (vectors.size() < 3) throw Error(ErrorKind::invalid_argument, "projection needs at least three samples");
  const auto n = static_cast<Eigen::Index>(vectors.size());
  const auto d = static_cast<Eigen::Index>(vectors.front().values.size());
  if (d < 1) throw Error(ErrorKind::invalid_argument, "empty vectors");
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = vectors[static_cast<std::size_t>(i)].values;
    if (static_cast<Eigen::Index>(v.size()) != d) throw Error(ErrorKind::invalid_argument, "embedding dimension mismatch");
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = v[static_cast<std::size_t>(j)];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const double denom = static_cast<double>(n - 1);

  // Leading eigenpairs of the covariance, or of the Gram matrix when there
  // are fewer samples than dimensions.
  Eigen::MatrixXd comps(d, 2);
  comps.setZero();
  double lambda[2] = {0.0, 0.0};
  if (d <= n) {
    Eigen::MatrixXd cov = (x.transpose() * x) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (int c = 0; c < 2 && c < d; ++c) {
      lambda[c] = solver.eigenvalues()(d - 1 - c);
      comps.col(c) = solver.eigenvectors().col(d - 1 - c);
    }
  } else {
    Eigen::MatrixXd gram = (x * x.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    for (int c = 0; c < 2; ++c) {
      lambda[c] = solver.eigenvalues()(n - 1 - c);
      Eigen::VectorXd v = x.transpose() * solver.eigenvectors().col(n - 1 - c);
      const double norm = v.norm();
      if (norm > 0.0) comps.col(c) = v / norm;
    }
  }

  Projection out;
  const double scale = std::max(std::abs(lambda[0]), 1e-300);
  bool usable[2] = {lambda[0] > 1e-12, lambda[1] > 1e-12 * std::max(1.0, scale)};
  out.rank_deficient = !usable[1];
  if (out.rank_deficient) log().warn("projection input has rank < 2; second coordinate set to 0");
  for (int c = 0; c < 2; ++c) {
    if (!usable[c]) comps.col(c).setZero();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(comps(j, c)) > 1e-12) {
        if (comps(j, c) < 0) comps.col(c) *= -1.0;
        break;
      }
    }
    out.components[c].assign(comps.col(c).data(), comps.col(c).data() + d);
    out.variances[c] = usable[c] ? lambda[c] : 0.0;
  }
  const Eigen::MatrixXd coords = x * comps;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = vectors[static_cast<std::size_t>(i)];
    out.points.push_back({v.sample_id, v.culture, coords(i, 0), coords(i, 1)});
  }
  return out;
}

std::optional<AnalysisSource> parse_analysis_source(std::string_view s) {
  if (s == "selection") return AnalysisSource::selection;
  if (s == "scored") return AnalysisSource::scored;
  return std::nullopt;
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

ordered_json run_analysis(const RunConfig& config, std::shared_ptr<EmbeddingProvider> embedder, int top_terms,
                          AnalysisSource source) {
  const fs::path run_dir = config.run_dir;
  std::vector<ScoredSample> samples;
  if (source == AnalysisSource::scored) {
    fs::path p = run_dir / "samples.scored.jsonl";
    if (!fs::exists(p)) throw Error(ErrorKind::config, "missing input " + p.string() + " (run select first)");
    samples = read_scored_samples(p.string());
  } else {
    for (const auto& c : config.cultures) {
      fs::path p = run_dir / ("selection." + c.code + ".jsonl");
      if (!fs::exists(p)) throw Error(ErrorKind::config, "missing input " + p.string() + " (run select first)");
      for (auto& s : read_scored_samples(p.string())) samples.push_back(std::move(s));
    }
  }

  std::map<std::string, std::vector<std::string>> corpus;
  for (const auto& s : samples) corpus[s.culture].push_back(s.response_text);
  ordered_json report;
  ordered_json terms_report = ordered_json::object();
  for (const auto& c : config.cultures) {
    if (!corpus.count(c.code)) continue;
    auto terms = tfidf_top_terms(corpus, c.code, top_terms);
    std::string csv = "term,weight\n";
    for (const auto& t : terms) csv += csv_field(t.term) + "," + format_number(t.weight) + "\n";
    fileio::write_file_atomic(run_dir / ("terms." + c.code + ".csv"), csv);
    terms_report[c.code] = terms.size();
  }
  report["terms"] = terms_report;

  // Vectors from the selection sidecar when present, recomputed otherwise.
  std::map<std::string, EmbeddingVector> stored;
  const fs::path data = run_dir / "embeddings.f32", index = run_dir / "embeddings.index.json";
  if (fs::exists(data) && fs::exists(index)) stored = read_embedding_sidecar(data, index);
  std::vector<std::string> missing_texts;
  std::vector<std::size_t> missing_rows;
  std::vector<LabeledVector> labeled(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    labeled[i].sample_id = samples[i].sample_id;
    labeled[i].culture = samples[i].culture;
    if (auto it = stored.find(samples[i].sample_id); it != stored.end()) {
      labeled[i].values = it->second.values;
    } else {
      missing_texts.push_back(sample_text(config.cluster_text, samples[i].question_text, samples[i].response_text));
      missing_rows.push_back(i);
    }
  }
  if (!missing_rows.empty()) {
    EmbeddingService service(embedder, fs::path(effective_cache_dir(config)) / "embeddings");
    auto vecs = service.embed_texts(missing_texts);
    for (std::size_t k = 0; k < missing_rows.size(); ++k) labeled[missing_rows[k]].values = vecs[k].values;
  }
  auto projection = project_embeddings(labeled);
  std::string csv = "sample_id,culture,x,y\n";
  for (const auto& p : projection.points) {
    csv += csv_field(p.sample_id) + "," + csv_field(p.culture) + "," + format_number(p.x) + "," + format_number(p.y) + "\n";
  }
  fileio::write_file_atomic(run_dir / "projection.csv", csv);
  report["projection"] = {{"points", projection.points.size()}, {"rank_deficient", projection.rank_deficient}};
  return report;
}

}  // namespace cardforge
