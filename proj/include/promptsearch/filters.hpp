#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "promptsearch/embedding.hpp"

namespace promptsearch {

enum class FilterStage { text, image };

// Safety filter gating the oracle. Text-stage filters see the prompt before
// generation; image-stage filters see the generated embedding.
class SafetyFilter {
 public:
  virtual ~SafetyFilter() = default;
  virtual FilterStage stage() const = 0;
  virtual std::string kind() const = 0;
  // Only one of these is consulted, depending on stage().
  virtual bool blocks_text(const Prompt&) const { return false; }
  virtual bool blocks_image(const SemanticVector&) const { return false; }
};

using FilterPtr = std::shared_ptr<const SafetyFilter>;

// Blocks a prompt iff any token equals a keyword (exact token match,
// case-folded).
class TextMatchFilter : public SafetyFilter {
 public:
  explicit TextMatchFilter(std::vector<std::string> keywords);
  FilterStage stage() const override { return FilterStage::text; }
  std::string kind() const override { return "text-match"; }
  bool blocks_text(const Prompt& p) const override;
  const std::vector<std::string>& keywords() const { return keywords_; }

 private:
  std::vector<std::string> keywords_;
};

// Logistic regression over hashed character-3-gram counts of the prompt
// text. Feature space is 2^16 buckets hashed with FNV-1a.
class TextClassifier {
 public:
  static constexpr std::size_t kFeatureDim = 1 << 16;
  static constexpr char kMagic[9] = "SNKTC001";

  TextClassifier();

  // Probability the text is sensitive, in [0, 1]. The token-list overload
  // accepts an empty list (no features, returns sigmoid(bias)) so that
  // leave-one-out scoring of single-token prompts is well-defined.
  double classify(const Prompt& p) const;
  double classify(const std::vector<std::string>& tokens) const;

  void save(const std::string& path) const;
  static TextClassifier load(const std::string& path);

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  double& bias() { return bias_; }
  double bias() const { return bias_; }

  static std::vector<std::pair<std::size_t, double>> features(
      const std::vector<std::string>& tokens);

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
};

// Batch gradient descent; seeded and deterministic. Throws TrainingError if
// training accuracy ends below 0.95.
TextClassifier train_text_classifier(const std::vector<Prompt>& positive,
                                     const std::vector<Prompt>& negative,
                                     int epochs, double learning_rate,
                                     std::uint64_t seed);

// Text-stage filter around a TextClassifier; blocks iff probability > 0.5.
class TextClassifierFilter : public SafetyFilter {
 public:
  explicit TextClassifierFilter(TextClassifier model)
      : model_(std::move(model)) {}
  FilterStage stage() const override { return FilterStage::text; }
  std::string kind() const override { return "text-classifier"; }
  bool blocks_text(const Prompt& p) const override {
    return model_.classify(p) > 0.5;
  }
  const TextClassifier& model() const { return model_; }

 private:
  TextClassifier model_;
};

// Image-stage filter: blocks iff max over concept vectors of
// cos_sim01(image, concept) exceeds the threshold. A per-concept threshold
// list may override the global one.
class ImageThresholdFilter : public SafetyFilter {
 public:
  ImageThresholdFilter(std::vector<SemanticVector> concepts, double tau,
                       std::vector<double> per_concept_tau = {});
  FilterStage stage() const override { return FilterStage::image; }
  std::string kind() const override { return "image-threshold"; }
  bool blocks_image(const SemanticVector& image) const override;
  double tau() const { return tau_; }

 private:
  std::vector<SemanticVector> concepts_;
  double tau_;
  std::vector<double> per_concept_tau_;
};

// Image-stage filter whose concept vectors are text embeddings of concept
// prompts, precomputed at construction.
class TextImageThresholdFilter : public SafetyFilter {
 public:
  TextImageThresholdFilter(const std::vector<Prompt>& concept_prompts,
                           double tau, const TextEncoder& encoder,
                           std::vector<double> per_concept_tau = {});
  FilterStage stage() const override { return FilterStage::image; }
  std::string kind() const override { return "text-image-threshold"; }
  bool blocks_image(const SemanticVector& image) const override;
  double tau() const { return inner_.tau(); }

 private:
  ImageThresholdFilter inner_;
};

// Never blocks. Used to generate unfiltered reference sets.
class PermissiveFilter : public SafetyFilter {
 public:
  FilterStage stage() const override { return FilterStage::text; }
  std::string kind() const override { return "permissive"; }
};

// Blocks everything at the text stage. Worst-case environment for tests.
class AlwaysBlockFilter : public SafetyFilter {
 public:
  FilterStage stage() const override { return FilterStage::text; }
  std::string kind() const override { return "always-block"; }
  bool blocks_text(const Prompt&) const override { return true; }
};

// UTF-8 file, one entry per line; blank lines skipped.
std::vector<std::string> load_lines(const std::string& path);

}  // namespace promptsearch
