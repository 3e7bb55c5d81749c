#include "cardforge/pipeline.hpp"

#include "cardforge/http_provider.hpp"
#include "cardforge/mock_provider.hpp"
#include "cardforge/run_lock.hpp"

namespace cardforge {

std::shared_ptr<Transport> make_transport(const std::string& provider) {
  if (provider == "mock") return std::make_shared<MockTransport>();
  if (provider == "openai") return std::make_shared<HttpChatTransport>(endpoint_from_env());
  throw Error(ErrorKind::config, "unknown provider '" + provider + "'", "provider");
}

std::shared_ptr<EmbeddingProvider> make_embedder(const EmbeddingSettings& settings, const RetryPolicy& retry) {
  if (settings.provider == "fallback") {
    return std::make_shared<FallbackEmbeddingProvider>(static_cast<std::size_t>(settings.dim));
  }
  if (settings.provider == "openai") {
    return std::make_shared<HttpEmbeddingProvider>(endpoint_from_env(), settings.model, retry);
  }
  throw Error(ErrorKind::config, "unknown embedding provider '" + settings.provider + "'", "embedding.provider");
}

namespace {

PromptSet load_prompts(const RunConfig& config) {
  return config.prompts_dir.empty() ? PromptSet::bundled() : PromptSet::with_overrides(config.prompts_dir);
}

}  // namespace

Pipeline::Pipeline(RunConfig config, std::optional<GatewayOptions> options)
    : config_(std::move(config)), prompts_(load_prompts(config_)) {
  validate(config_);
  validate_environment(config_);
  GatewayOptions opts;
  if (options) {
    opts = std::move(*options);
  } else {
    opts.retry = config_.retry;
    opts.max_in_flight = config_.max_in_flight;
    opts.cache_dir = std::filesystem::path(effective_cache_dir(config_)) / "completions";
  }
  gateway_ = std::make_unique<Gateway>(std::move(opts));
  for (const auto* p : {&config_.generation, &config_.probe_model, &config_.eval_model, &config_.judge}) {
    if (!gateway_->has_transport(p->provider)) gateway_->register_transport(p->provider, make_transport(p->provider));
  }
  embedder_ = make_embedder(config_.embedding, config_.retry);
}

SynthesisSummary Pipeline::synthesize() {
  RunLock lock(config_.run_dir);
  return run_synthesis(config_, *gateway_, prompts_);
}

SelectionSummary Pipeline::select() {
  RunLock lock(config_.run_dir);
  return run_selection(config_, *gateway_, prompts_, embedder_);
}

ordered_json Pipeline::export_corpora(ExportFormat format) {
  RunLock lock(config_.run_dir);
  return run_export(config_, prompts_, format);
}

ordered_json Pipeline::evaluate(const EvalOptions& options) {
  RunLock lock(config_.run_dir);
  std::optional<ProviderSettings> extra[2] = {options.model, options.judge};
  for (const auto& p : extra) {
    if (p && !gateway_->has_transport(p->provider)) gateway_->register_transport(p->provider, make_transport(p->provider));
  }
  return run_evaluation(config_, *gateway_, prompts_, options);
}

ordered_json Pipeline::analyze(int top_terms, AnalysisSource source) {
  RunLock lock(config_.run_dir);
  return run_analysis(config_, embedder_, top_terms, source);
}

}  // namespace cardforge
