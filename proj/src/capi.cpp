#include "cardforge/cardforge.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "cardforge/pipeline.hpp"
#include "cardforge/records.hpp"
#include "cardforge/text.hpp"

using namespace cardforge;

struct cf_context {
  std::unique_ptr<Pipeline> pipeline;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_field;

cf_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return CF_ERR_CONFIG;
    case ErrorKind::provider_exhausted:
    case ErrorKind::provider_auth:
    case ErrorKind::provider_malformed: return CF_ERR_PROVIDER;
    case ErrorKind::schema: return CF_ERR_SCHEMA;
    case ErrorKind::io: return CF_ERR_IO;
    case ErrorKind::invalid_argument: return CF_ERR_INVALID_ARGUMENT;
    case ErrorKind::precondition: return CF_ERR_PRECONDITION;
    case ErrorKind::internal: return CF_ERR_INTERNAL;
  }
  return CF_ERR_INTERNAL;
}

cf_status fail(cf_status status, std::string message, std::string field = {}) {
  g_last_error = std::move(message);
  g_last_field = std::move(field);
  return status;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

// Runs fn and converts every exception into a status.
template <class Fn>
cf_status guarded(Fn&& fn) {
  try {
    fn();
    return CF_OK;
  } catch (const Error& e) {
    return fail(status_of(e.kind()), e.what(), e.field());
  } catch (const nlohmann::json::exception& e) {
    return fail(CF_ERR_CONFIG, std::string("invalid JSON: ") + e.what());
  } catch (const std::exception& e) {
    return fail(CF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CF_ERR_INTERNAL, "unknown error");
  }
}

RunConfig parse_config(const char* config_json) {
  if (!config_json || !*config_json) return config_from_json(nlohmann::json::object());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

ProviderSettings model_spec(const nlohmann::json& v, ProviderSettings base, const char* key) {
  if (v.is_string()) {
    std::string spec = v.get<std::string>();
    auto colon = spec.find(':');
    base.provider = spec.substr(0, colon);
    if (colon != std::string::npos) base.model = spec.substr(colon + 1);
  } else {
    throw Error(ErrorKind::config, std::string(key) + " must be \"provider[:model]\"", key);
  }
  if (base.provider != "mock" && base.provider != "openai") {
    throw Error(ErrorKind::config, "unknown provider '" + base.provider + "'", key);
  }
  return base;
}

EvalOptions eval_options(const char* options_json, const RunConfig& config) {
  EvalOptions o;
  if (!options_json || !*options_json) return o;
  auto j = nlohmann::json::parse(options_json);
  if (!j.is_object()) throw Error(ErrorKind::config, "evaluation options must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "suites") {
      o.suites.clear();
      for (const auto& s : *it) {
        std::string name = s.get<std::string>();
        if (name == "opinion") o.suites.insert(Suite::opinion);
        else if (name == "binary") o.suites.insert(Suite::binary);
        else if (name == "open") o.suites.insert(Suite::open);
        else if (name == "all") o.suites = {Suite::opinion, Suite::binary, Suite::open};
        else throw Error(ErrorKind::config, "unknown suite '" + name + "'", "suite");
      }
    } else if (key == "data_dir") {
      o.data_dir = it->get<std::string>();
    } else if (key == "culture") {
      o.culture = it->get<std::string>();
    } else if (key == "raw_divergence") {
      o.raw_divergence = it->get<bool>();
    } else if (key == "model") {
      o.model = model_spec(*it, config.eval_model, "model");
    } else if (key == "judge") {
      o.judge = model_spec(*it, config.judge, "judge");
    } else if (key == "report_path") {
      o.report_path = it->get<std::string>();
    } else {
      throw Error(ErrorKind::config, "unknown evaluation option '" + key + "'", key);
    }
  }
  return o;
}

cf_status need_context(const cf_context* ctx) {
  return ctx && ctx->pipeline ? CF_OK : fail(CF_ERR_INVALID_ARGUMENT, "null context");
}

}  // namespace

extern "C" {

const char* cf_version(void) { return CARDFORGE_VERSION; }

const char* cf_last_error(void) { return g_last_error.c_str(); }

const char* cf_last_error_field(void) { return g_last_field.c_str(); }

void cf_string_free(char* s) { std::free(s); }

cf_status cf_context_create(const char* config_json, cf_context** out) {
  if (!out) return fail(CF_ERR_INVALID_ARGUMENT, "null output pointer");
  *out = nullptr;
  return guarded([&] {
    auto ctx = std::make_unique<cf_context>();
    ctx->pipeline = std::make_unique<Pipeline>(parse_config(config_json));
    *out = ctx.release();
  });
}

void cf_context_destroy(cf_context* ctx) { delete ctx; }

cf_status cf_config_resolve(const char* config_json, char** resolved_json) {
  return guarded([&] { put(resolved_json, to_json(parse_config(config_json)).dump(2)); });
}

uint64_t cf_context_transport_calls(const cf_context* ctx) {
  return ctx && ctx->pipeline ? ctx->pipeline->gateway().transport_calls() : 0;
}

cf_status cf_synthesize(cf_context* ctx, char** summary_json) {
  if (auto s = need_context(ctx)) return s;
  return guarded([&] { put(summary_json, to_json(ctx->pipeline->synthesize()).dump(2)); });
}

cf_status cf_select(cf_context* ctx, char** summary_json) {
  if (auto s = need_context(ctx)) return s;
  return guarded([&] { put(summary_json, ctx->pipeline->select().report.dump(2)); });
}

cf_status cf_export(cf_context* ctx, const char* format, char** report_json) {
  if (auto s = need_context(ctx)) return s;
  return guarded([&] {
    auto f = parse_export_format(format ? format : "all");
    if (!f) throw Error(ErrorKind::config, "unknown export format (sft, dpo, all)", "format");
    put(report_json, ctx->pipeline->export_corpora(*f).dump(2));
  });
}

cf_status cf_evaluate(cf_context* ctx, const char* options_json, char** report_json) {
  if (auto s = need_context(ctx)) return s;
  return guarded([&] {
    auto options = eval_options(options_json, ctx->pipeline->config());
    put(report_json, ctx->pipeline->evaluate(options).dump(2));
  });
}

cf_status cf_analyze(cf_context* ctx, int top_terms, const char* source, char** report_json) {
  if (auto s = need_context(ctx)) return s;
  return guarded([&] {
    auto src = parse_analysis_source(source ? source : "selection");
    if (!src) throw Error(ErrorKind::config, "unknown analysis source (selection, scored)", "source");
    put(report_json, ctx->pipeline->analyze(top_terms, *src).dump(2));
  });
}

cf_status cf_taxonomy_dump(const char* source, int strict_count, char** jsonl) {
  return guarded([&] {
    TaxonomyOptions opts;
    opts.strict_count = strict_count != 0;
    put(jsonl, load_taxonomy(source ? source : "builtin", opts).to_jsonl());
  });
}

cf_status cf_cosine(const double* a, const double* b, size_t dim, double* out) {
  if (!a || !b || !out || dim == 0) return fail(CF_ERR_INVALID_ARGUMENT, "null or empty vector");
  return guarded([&] { *out = cosine(std::span<const double>(a, dim), std::span<const double>(b, dim)); });
}

cf_status cf_distinctiveness(const double* target, const double* peers, size_t n_peers, size_t dim, double* out) {
  if (!target || !out || dim == 0) return fail(CF_ERR_INVALID_ARGUMENT, "null or empty vector");
  if (n_peers > 0 && !peers) return fail(CF_ERR_INVALID_ARGUMENT, "null peer matrix");
  return guarded([&] {
    std::vector<std::span<const double>> rows;
    for (size_t i = 0; i < n_peers; ++i) rows.emplace_back(peers + i * dim, dim);
    *out = distinctiveness(std::span<const double>(target, dim), rows);
  });
}

cf_status cf_js_similarity(const double* p, const double* q, size_t n, int raw_divergence, double* out) {
  if (!p || !q || !out || n == 0) return fail(CF_ERR_INVALID_ARGUMENT, "null or empty distribution");
  return guarded([&] {
    *out = js_similarity(std::span<const double>(p, n), std::span<const double>(q, n), raw_divergence != 0);
  });
}

cf_status cf_content_hash(const char* json, char** hex) {
  if (!json) return fail(CF_ERR_INVALID_ARGUMENT, "null input");
  return guarded([&] { put(hex, content_hash(ordered_json::parse(json))); });
}

cf_status cf_validate_record(const char* line, const char* kind, char** report_json) {
  if (!line || !kind) return fail(CF_ERR_INVALID_ARGUMENT, "null input");
  auto k = parse_record_kind(kind);
  if (!k) return fail(CF_ERR_INVALID_ARGUMENT, std::string("unknown record kind '") + kind + "'", "kind");
  cf_status status = CF_OK;
  cf_status guard = guarded([&] {
    ValidationReport report = validate_record(line, *k);
    ordered_json j;
    j["ok"] = report.ok;
    if (report.error) {
      j["error_kind"] = to_string(report.error->kind);
      j["field"] = report.error->field;
      j["message"] = report.error->message;
      status = fail(CF_ERR_SCHEMA, report.error->message, report.error->field);
    } else {
      j["error_kind"] = nullptr;
      j["field"] = nullptr;
      j["message"] = nullptr;
    }
    put(report_json, j.dump());
  });
  return guard != CF_OK ? guard : status;
}

}  // extern "C"
