#include "metsfuse/explain/lime.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "metsfuse/corpus/tokenizer.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/numerics/linalg.hpp"
#include "metsfuse/numerics/rng.hpp"

namespace metsfuse::explain {

const TokenWeight& TokenExplanation::top() const {
  if (tokens.empty()) throw DataError("explanation has no tokens");
  return *std::max_element(tokens.begin(), tokens.end(),
                           [](const TokenWeight& a, const TokenWeight& b) { return a.weight < b.weight; });
}

nlohmann::json TokenExplanation::to_json() const {
  nlohmann::json j;
  j["text"] = text;
  j["intercept"] = intercept;
  j["r2"] = r2;
  j["prediction"] = prediction;
  j["tokens"] = nlohmann::json::array();
  for (const auto& t : tokens) {
    j["tokens"].push_back({{"token", t.token}, {"begin", t.begin}, {"end", t.end}, {"weight", t.weight}});
  }
  return j;
}

namespace {

std::string escape_html(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string TokenExplanation::to_html() const {
  double scale = 0.0;
  for (const auto& t : tokens) scale = std::max(scale, std::abs(t.weight));
  std::string out = fmt::format("<p class=\"metsfuse-lime\" data-prediction=\"{:.6f}\">", prediction);
  std::size_t pos = 0;
  for (const auto& t : tokens) {
    out += escape_html(std::string_view(text).substr(pos, t.begin - pos));
    const double a = scale > 0.0 ? std::abs(t.weight) / scale : 0.0;
    // red pushes toward the positive class, blue away from it
    const char* rgb = t.weight >= 0.0 ? "220,50,47" : "38,139,210";
    out += fmt::format("<span title=\"{:+.4f}\" style=\"background: rgba({},{:.3f})\">{}</span>", t.weight, rgb, a,
                       escape_html(std::string_view(text).substr(t.begin, t.end - t.begin)));
    pos = t.end;
  }
  out += escape_html(std::string_view(text).substr(pos));
  out += "</p>\n";
  return out;
}

TokenExplanation lime_text(const TextClassifier& classify, const std::string& text, const LimeConfig& cfg) {
  if (cfg.samples < 50) throw ConfigError(fmt::format("lime: needs at least 50 samples, got {}", cfg.samples));
  if (!(cfg.kernel_width > 0.0)) throw ConfigError("lime: kernel width must be positive");
  if (cfg.ridge < 0.0) throw ConfigError("lime: ridge must be non-negative");
  const auto toks = corpus::tokenize(text);
  const std::size_t p = toks.size();
  if (p < 2) throw DataError(fmt::format("lime: text needs at least two tokens, got {}", p));

  auto rng = num::Rng::derive(cfg.seed, {num::stream_id("lime")});
  std::vector<std::vector<char>> masks;
  masks.emplace_back(p, 1);
  while (masks.size() < cfg.samples) {
    std::vector<char> m(p);
    std::size_t kept = 0;
    for (auto& v : m) {
      v = rng.bernoulli(0.5) ? 1 : 0;
      kept += static_cast<std::size_t>(v);
    }
    if (kept > 0) masks.push_back(std::move(m));
  }
  std::vector<std::string> texts;
  texts.reserve(masks.size());
  for (const auto& m : masks) {
    std::string t = text;
    for (std::size_t k = 0; k < p; ++k) {
      if (!m[k]) std::fill(t.begin() + static_cast<std::ptrdiff_t>(toks[k].begin),
                           t.begin() + static_cast<std::ptrdiff_t>(toks[k].end), ' ');
    }
    texts.push_back(std::move(t));
  }
  std::vector<double> y;
  try {
    y = classify(texts);
  } catch (const std::exception& e) {
    throw NumericError(fmt::format("lime: classifier failed on a perturbation of \"{}\": {}", text, e.what()));
  }
  if (y.size() != texts.size()) {
    throw ShapeError(fmt::format("lime: classifier returned {} scores for {} texts", y.size(), texts.size()));
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw NumericError(fmt::format("lime: non-finite score for \"{}\"", texts[i]));
  }

  // Weighted ridge on [1, mask]; the intercept is not penalized.
  const std::size_t q = p + 1;
  std::vector<double> a(q * q, 0.0), b(q, 0.0), w(masks.size());
  for (std::size_t s = 0; s < masks.size(); ++s) {
    std::size_t kept = 0;
    for (char v : masks[s]) kept += static_cast<std::size_t>(v);
    const double d = 1.0 - std::sqrt(static_cast<double>(kept) / static_cast<double>(p));
    w[s] = std::exp(-d * d / (cfg.kernel_width * cfg.kernel_width));
    std::vector<double> x(q);
    x[0] = 1.0;
    for (std::size_t k = 0; k < p; ++k) x[k + 1] = masks[s][k];
    for (std::size_t i = 0; i < q; ++i) {
      if (x[i] == 0.0) continue;
      b[i] += w[s] * x[i] * y[s];
      for (std::size_t j = 0; j < q; ++j) a[i * q + j] += w[s] * x[i] * x[j];
    }
  }
  for (std::size_t i = 1; i < q; ++i) a[i * q + i] += cfg.ridge;
  const auto beta = num::solve_spd(a, b);

  TokenExplanation out;
  out.text = text;
  out.intercept = beta[0];
  out.prediction = y[0];
  for (std::size_t k = 0; k < p; ++k) out.tokens.push_back({toks[k].text, toks[k].begin, toks[k].end, beta[k + 1]});

  double wsum = 0.0, ybar = 0.0;
  for (std::size_t s = 0; s < masks.size(); ++s) {
    wsum += w[s];
    ybar += w[s] * y[s];
  }
  ybar /= wsum;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t s = 0; s < masks.size(); ++s) {
    double fit = beta[0];
    for (std::size_t k = 0; k < p; ++k) fit += masks[s][k] ? beta[k + 1] : 0.0;
    ss_res += w[s] * (y[s] - fit) * (y[s] - fit);
    ss_tot += w[s] * (y[s] - ybar) * (y[s] - ybar);
  }
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  out.r2 = *lo == *hi ? 1.0 : 1.0 - ss_res / ss_tot;
  return out;
}

TextClassifier record_classifier(const models::FusionModel& model, const cohort::DailyRecord& record) {
  cohort::DailyRecord r = record;
  if (!r.text) r.text = "";
  const int label = 0;
  auto base = model.prepare(std::span<const cohort::DailyRecord>(&r, 1), std::span<const int>(&label, 1)).front();
  return [&model, base](const std::vector<std::string>& texts) {
    std::vector<models::Example> ex(texts.size(), base);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      ex[i].tokens = model.vocabulary().encode(texts[i], model.encoder_config().max_len);
    }
    return model.predict(ex);
  };
}

}  // namespace metsfuse::explain
