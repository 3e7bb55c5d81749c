#pragma once

#include <array>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cardforge/config.hpp"
#include "cardforge/embedding.hpp"

namespace cardforge {

struct TermWeight {
  std::string term;  // unigram or "first second" bigram, lowercased
  double weight = 0.0;
};

/// The bundled English stopword list.
const std::set<std::string>& bundled_stopwords();

/// Lowercased alphanumeric runs (bytes >= 0x80 count as word characters)
/// with stopwords removed.
std::vector<std::string> tokenize(std::string_view text, const std::set<std::string>& stopwords);

/// Unigrams followed by bigrams of adjacent surviving tokens.
std::vector<std::string> extract_terms(std::string_view text, const std::set<std::string>& stopwords);

/// Each culture's texts form one document. tf = count / total terms of the
/// document, idf = ln(N / df). Top k by weight, ties alphabetical.
std::vector<TermWeight> tfidf_top_terms(const std::map<std::string, std::vector<std::string>>& corpus,
                                        const std::string& culture, int k,
                                        const std::set<std::string>& stopwords = bundled_stopwords());

struct LabeledVector {
  std::string sample_id;
  std::string culture;
  std::vector<double> values;
};

struct ProjectedPoint {
  std::string sample_id;
  std::string culture;
  double x = 0.0;
  double y = 0.0;
};

struct Projection {
  std::vector<ProjectedPoint> points;  // input order
  std::array<std::vector<double>, 2> components;
  std::array<double, 2> variances{};
  bool rank_deficient = false;  // second coordinate zeroed
};

/// Mean-centred projection onto the two leading principal components. Each
/// component's first loading with magnitude above 1e-12 is made positive.
Projection project_embeddings(const std::vector<LabeledVector>& vectors);

enum class AnalysisSource { selection, scored };

std::optional<AnalysisSource> parse_analysis_source(std::string_view s);

/// Writes terms.<code>.csv (term,weight) and projection.csv
/// (sample_id,culture,x,y) into the run directory.
ordered_json run_analysis(const RunConfig& config, std::shared_ptr<EmbeddingProvider> embedder, int top_terms,
                          AnalysisSource source);

}  // namespace cardforge
