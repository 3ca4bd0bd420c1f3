#include "promptsearch/filters.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "promptsearch/errors.hpp"
#include "promptsearch/rng.hpp"

namespace promptsearch {

std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

TextMatchFilter::TextMatchFilter(std::vector<std::string> keywords) {
  if (keywords.empty()) throw ConfigError("text-match: empty keyword list");
  for (auto& k : keywords) {
    std::transform(k.begin(), k.end(), k.begin(),
                   [](unsigned char c) { return std::tolower(c); });
  }
  keywords_ = std::move(keywords);
}

bool TextMatchFilter::blocks_text(const Prompt& p) const {
  for (const auto& token : p.tokens)
    for (const auto& keyword : keywords_)
      if (token == keyword) return true;
  return false;
}

TextClassifier::TextClassifier() : weights_(kFeatureDim, 0.0) {}

std::vector<std::pair<std::size_t, double>> TextClassifier::features(
    const std::vector<std::string>& tokens) {
  // Character 3-grams over the tokens joined with single spaces, hashed into
  // 2^16 buckets. Texts shorter than 3 characters contribute one gram.
  std::map<std::size_t, double> counts;
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) joined.push_back(' ');
    joined += tokens[i];
  }
  if (joined.size() < 3) {
    if (!joined.empty())
      counts[hash_token(joined) % kFeatureDim] += 1.0;
  } else {
    for (std::size_t i = 0; i + 3 <= joined.size(); ++i)
      counts[hash_token(std::string_view(joined).substr(i, 3)) % kFeatureDim] +=
          1.0;
  }
  return {counts.begin(), counts.end()};
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double raw_score(const TextClassifier& model,
                 const std::vector<std::pair<std::size_t, double>>& feats) {
  double s = model.bias();
  for (const auto& [idx, count] : feats) s += model.weights()[idx] * count;
  return s;
}

}  // namespace

double TextClassifier::classify(const Prompt& p) const {
  return classify(p.tokens);
}

double TextClassifier::classify(const std::vector<std::string>& tokens) const {
  return sigmoid(raw_score(*this, features(tokens)));
}

TextClassifier train_text_classifier(const std::vector<Prompt>& positive,
                                     const std::vector<Prompt>& negative,
                                     int epochs, double learning_rate,
                                     std::uint64_t seed) {
  if (positive.empty() || negative.empty())
    throw ConfigError("classifier training needs non-empty corpora");
  if (epochs <= 0 || learning_rate <= 0.0)
    throw ConfigError("classifier training needs positive epochs and lr");

  struct Example {
    std::vector<std::pair<std::size_t, double>> feats;
    double label;
  };
  std::vector<Example> examples;
  examples.reserve(positive.size() + negative.size());
  for (const auto& p : positive)
    examples.push_back({TextClassifier::features(p.tokens), 1.0});
  for (const auto& p : negative)
    examples.push_back({TextClassifier::features(p.tokens), 0.0});

  TextClassifier model;
  SplitMix64 rng(seed);
  for (auto& w : model.weights()) w = 1e-3 * rng.next_symmetric();

  const double scale = learning_rate / static_cast<double>(examples.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::map<std::size_t, double> grad;
    double grad_bias = 0.0;
    for (const auto& ex : examples) {
      double err = sigmoid(raw_score(model, ex.feats)) - ex.label;
      for (const auto& [idx, count] : ex.feats) grad[idx] += err * count;
      grad_bias += err;
    }
    for (const auto& [idx, g] : grad) model.weights()[idx] -= scale * g;
    model.bias() -= scale * grad_bias;
  }

  std::size_t correct = 0;
  for (const auto& ex : examples) {
    double p = sigmoid(raw_score(model, ex.feats));
    if ((p > 0.5) == (ex.label > 0.5)) ++correct;
  }
  double accuracy = static_cast<double>(correct) / examples.size();
  if (accuracy < 0.95)
    throw TrainingError("text classifier failed to converge: train accuracy " +
                        std::to_string(accuracy));
  return model;
}

namespace {

void write_f32_le(std::ofstream& out, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  unsigned char bytes[4] = {
      static_cast<unsigned char>(bits & 0xff),
      static_cast<unsigned char>((bits >> 8) & 0xff),
      static_cast<unsigned char>((bits >> 16) & 0xff),
      static_cast<unsigned char>((bits >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

float read_f32_le(std::ifstream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw ConfigError("classifier file truncated");
  std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                       (static_cast<std::uint32_t>(bytes[1]) << 8) |
                       (static_cast<std::uint32_t>(bytes[2]) << 16) |
                       (static_cast<std::uint32_t>(bytes[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace

void TextClassifier::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write classifier file: " + path);
  out.write(kMagic, 8);
  for (double w : weights_) write_f32_le(out, static_cast<float>(w));
  write_f32_le(out, static_cast<float>(bias_));
  if (!out) throw ConfigError("failed writing classifier file: " + path);
}

TextClassifier TextClassifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open classifier file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("bad classifier file magic: " + path);
  TextClassifier model;
  for (auto& w : model.weights_) w = read_f32_le(in);
  model.bias_ = read_f32_le(in);
  in.peek();
  if (!in.eof()) throw ConfigError("classifier file has trailing bytes");
  return model;
}

ImageThresholdFilter::ImageThresholdFilter(std::vector<SemanticVector> concepts,
                                           double tau,
                                           std::vector<double> per_concept_tau)
    : concepts_(std::move(concepts)),
      tau_(tau),
      per_concept_tau_(std::move(per_concept_tau)) {
  if (concepts_.empty())
    throw ConfigError("image-threshold: empty concept list");
  if (tau_ < 0.0 || tau_ > 1.0)
    throw ConfigError("image-threshold: tau must be in [0, 1]");
  if (!per_concept_tau_.empty() &&
      per_concept_tau_.size() != concepts_.size())
    throw ConfigError("image-threshold: per-concept tau size mismatch");
  for (double t : per_concept_tau_)
    if (t < 0.0 || t > 1.0)
      throw ConfigError("image-threshold: per-concept tau out of range");
}

bool ImageThresholdFilter::blocks_image(const SemanticVector& image) const {
  for (std::size_t k = 0; k < concepts_.size(); ++k) {
    double threshold = per_concept_tau_.empty() ? tau_ : per_concept_tau_[k];
    if (cos_sim01(image, concepts_[k]) > threshold) return true;
  }
  return false;
}

namespace {

std::vector<SemanticVector> encode_concepts(
    const std::vector<Prompt>& concept_prompts, const TextEncoder& encoder) {
  if (concept_prompts.empty())
    throw ConfigError("text-image-threshold: empty concept list");
  std::vector<SemanticVector> vectors;
  vectors.reserve(concept_prompts.size());
  for (const auto& p : concept_prompts) vectors.push_back(encoder.encode(p));
  return vectors;
}

}  // namespace

TextImageThresholdFilter::TextImageThresholdFilter(
    const std::vector<Prompt>& concept_prompts, double tau,
    const TextEncoder& encoder, std::vector<double> per_concept_tau)
    : inner_(encode_concepts(concept_prompts, encoder), tau,
             std::move(per_concept_tau)) {}

bool TextImageThresholdFilter::blocks_image(const SemanticVector& image) const {
  return inner_.blocks_image(image);
}

}  // namespace promptsearch
