#ifndef ILB_ENVS_SEQLABEL_HPP
#define ILB_ENVS_SEQLABEL_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ilb/core.hpp"

namespace ilb {

// One character record in the established tab-separated layout:
// id, letter (a-z), next_id (-1 terminates the word), word_id, position,
// fold (0-9), then 128 binary pixels (16x8).
struct OcrRecord {
  int id = 0;
  int letter = 0;  // 0-based class index
  int next_id = -1;
  int word_id = 0;
  int position = 0;
  int fold = 0;
  std::array<std::uint8_t, 128> pixels{};
};

struct OcrWord {
  std::vector<int> letters;
  std::vector<std::array<std::uint8_t, 128>> pixels;
  int fold = 0;
  int length() const { return static_cast<int>(letters.size()); }
};

struct OcrCorpus {
  std::vector<OcrWord> words;
  int alphabet = 26;
  int n_characters() const;
};

// Parses the tab-separated layout, chaining characters into words via
// next_id. Malformed lines and broken chains raise IoError with the line.
OcrCorpus load_ocr(std::istream& in);
OcrCorpus load_ocr_file(const std::string& path);
void save_ocr(std::ostream& out, const OcrCorpus& corpus);
void save_ocr_file(const std::string& path, const OcrCorpus& corpus);

// Procedurally generated glyph corpus. Letters come in confusable
// prototype pairs (a few differing pixels) and follow a bigram chain, so
// the previous-letter feature carries real signal; per-pixel flip noise
// controls difficulty. Deterministic in the seed.
OcrCorpus synth_glyphs(int n_words, int alphabet_size, double noise, std::uint64_t seed,
                       double bigram_strength = 0.85, int min_len = 4, int max_len = 8);

struct SeqLabelConfig {
  int alphabet = 26;
  bool prev_letter_feature = true;  // false: the no-structure baseline
  int pixel_dim = 128;
  int feature_dim() const { return pixel_dim + (prev_letter_feature ? alphabet : 0); }
};

// Left-to-right sequence labeling as a degenerate control problem: the
// state at position t is the character's pixels plus a one-hot of the
// previously *predicted* letter (zero at the first position); the expert
// action is the ground-truth letter.
class SeqLabelEnv : public Environment {
 public:
  SeqLabelEnv(const SeqLabelConfig& cfg, const std::vector<const OcrWord*>& words);

  const EnvSchema& schema() const override { return schema_; }
  void reset(RngStream& rng) override;
  StateObs observe() const override;
  ActionVal expert_action() const override;
  bool step(const ActionVal& a, RngStream& rng) override;
  std::map<std::string, double> episode_metrics() const override;

  void load_word(const OcrWord* word);
  // Ground-truth previous letter instead of the prediction; reproduces the
  // supervised training input distribution.
  void set_teacher_forcing(bool v) { teacher_forcing_ = v; }

 private:
  const SeqLabelConfig& cfg_;
  const std::vector<const OcrWord*>& words_;
  EnvSchema schema_;
  const OcrWord* word_ = nullptr;
  int t_ = 1;
  int prev_letter_ = -1;
  int correct_ = 0;
  bool teacher_forcing_ = false;
};

// Greedy left-to-right accuracy of a deterministic policy over a word set.
double seqlabel_accuracy(const Policy& policy, const SeqLabelConfig& cfg,
                         const std::vector<const OcrWord*>& words);

class SeqLabelModel : public EnvModel {
 public:
  // Words from `test_fold` are held out for the deterministic metric;
  // training rollouts sample the remaining folds.
  SeqLabelModel(OcrCorpus corpus, SeqLabelConfig cfg, int test_fold = 0);

  std::unique_ptr<Environment> make() const override;
  const EnvSchema& schema() const override { return schema_; }
  Featurizer featurizer() const override { return identity_featurizer(); }
  PolicyPtr expert_policy() const override { return env_expert_policy(); }
  std::string metric_name() const override { return "char_accuracy"; }
  double metric_from(const std::vector<Trajectory>& trajs) const override;
  std::optional<double> deterministic_metric(const Policy& policy) const override;

  int max_word_length() const;
  const SeqLabelConfig& config() const { return cfg_; }
  const std::vector<const OcrWord*>& train_words() const { return train_; }
  const std::vector<const OcrWord*>& test_words() const { return test_; }

 private:
  OcrCorpus corpus_;
  SeqLabelConfig cfg_;
  EnvSchema schema_;
  std::vector<const OcrWord*> train_;
  std::vector<const OcrWord*> test_;
};

}  // namespace ilb

#endif  // ILB_ENVS_SEQLABEL_HPP
