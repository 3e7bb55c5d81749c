#pragma once

#include <memory>

#include "cardforge/analysis.hpp"
#include "cardforge/config.hpp"
#include "cardforge/embedding.hpp"
#include "cardforge/eval.hpp"
#include "cardforge/exporter.hpp"
#include "cardforge/gateway.hpp"
#include "cardforge/prompts.hpp"
#include "cardforge/selection.hpp"
#include "cardforge/synthesis.hpp"

namespace cardforge {

/// Transport for a configured provider id ("mock" or "openai").
std::shared_ptr<Transport> make_transport(const std::string& provider);

/// Embedding backend for the configured settings.
std::shared_ptr<EmbeddingProvider> make_embedder(const EmbeddingSettings& settings, const RetryPolicy& retry);

// Everything one command needs: the validated config, a gateway with the
// configured transports and cache, the prompt set and the embedder. Each
// command holds the run-directory lock while it runs.
class Pipeline {
 public:
  /// Validates the environment (credentials for remote providers) and wires
  /// transports. `options` overrides the gateway settings derived from the
  /// config when given (tests inject sleepers and transports this way).
  explicit Pipeline(RunConfig config, std::optional<GatewayOptions> options = std::nullopt);

  const RunConfig& config() const { return config_; }
  Gateway& gateway() { return *gateway_; }
  const PromptSet& prompts() const { return prompts_; }
  void set_embedder(std::shared_ptr<EmbeddingProvider> embedder) { embedder_ = std::move(embedder); }

  SynthesisSummary synthesize();
  SelectionSummary select();
  ordered_json export_corpora(ExportFormat format);
  ordered_json evaluate(const EvalOptions& options);
  ordered_json analyze(int top_terms, AnalysisSource source);

 private:
  RunConfig config_;
  PromptSet prompts_;
  std::unique_ptr<Gateway> gateway_;
  std::shared_ptr<EmbeddingProvider> embedder_;
};

}  // namespace cardforge
