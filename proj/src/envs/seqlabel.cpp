#include "ilb/envs/seqlabel.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ilb/rng.hpp"

namespace ilb {

// ---------------------------------------------------------------------------
// Corpus I/O
// ---------------------------------------------------------------------------

int OcrCorpus::n_characters() const {
  int n = 0;
  for (const auto& w : words) n += w.length();
  return n;
}

OcrCorpus load_ocr(std::istream& in) {
  OcrCorpus corpus;
  OcrWord current;
  int expected_next = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    OcrRecord rec;
    std::string letter_field;
    const std::string where = "ocr line " + std::to_string(line_no);
    if (!(ls >> rec.id >> letter_field >> rec.next_id >> rec.word_id >> rec.position >> rec.fold))
      throw IoError(where + ": malformed record prefix");
    if (letter_field.size() != 1 || letter_field[0] < 'a' || letter_field[0] > 'z')
      throw IoError(where + ": letter must be a-z");
    rec.letter = letter_field[0] - 'a';
    for (int i = 0; i < 128; ++i) {
      int v;
      if (!(ls >> v) || (v != 0 && v != 1)) throw IoError(where + ": bad pixel data");
      rec.pixels[i] = static_cast<std::uint8_t>(v);
    }
    if (expected_next != -1 && rec.id != expected_next)
      throw IoError(where + ": broken next_id chain (expected id " +
                    std::to_string(expected_next) + ")");
    current.letters.push_back(rec.letter);
    current.pixels.push_back(rec.pixels);
    current.fold = rec.fold;
    expected_next = rec.next_id;
    if (rec.next_id == -1) {
      corpus.words.push_back(std::move(current));
      current = OcrWord{};
    }
  }
  if (expected_next != -1 || !current.letters.empty())
    throw IoError("ocr file ends inside a word (dangling next_id chain)");
  return corpus;
}

OcrCorpus load_ocr_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return load_ocr(in);
}

void save_ocr(std::ostream& out, const OcrCorpus& corpus) {
  int id = 1;
  int word_id = 1;
  for (const auto& w : corpus.words) {
    for (int t = 0; t < w.length(); ++t, ++id) {
      const bool last = t + 1 == w.length();
      out << id << '\t' << static_cast<char>('a' + w.letters[t]) << '\t' << (last ? -1 : id + 1)
          << '\t' << word_id << '\t' << t << '\t' << w.fold;
      for (int i = 0; i < 128; ++i) out << '\t' << static_cast<int>(w.pixels[t][i]);
      out << '\n';
    }
    ++word_id;
  }
}

void save_ocr_file(const std::string& path, const OcrCorpus& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  save_ocr(out, corpus);
}

// ---------------------------------------------------------------------------
// Synthetic glyphs
// ---------------------------------------------------------------------------

OcrCorpus synth_glyphs(int n_words, int alphabet_size, double noise, std::uint64_t seed,
                       double bigram_strength, int min_len, int max_len) {
  if (alphabet_size < 2 || alphabet_size > 26)
    throw ConfigError("alphabet size must lie in [2, 26]");
  if (noise < 0.0 || noise > 1.0) throw ConfigError("noise must lie in [0, 1]");
  if (min_len < 1 || max_len < min_len) throw ConfigError("bad word length range");
  OcrCorpus corpus;
  corpus.alphabet = alphabet_size;
  RngStream rng = RngStream::child(seed, 0x91f9, 0);

  // prototypes in confusable pairs: (2k, 2k+1) differ in a few pixels only
  std::vector<std::array<std::uint8_t, 128>> protos(alphabet_size);
  for (int c = 0; c < alphabet_size; c += 2) {
    for (int i = 0; i < 128; ++i) protos[c][i] = rng.bernoulli(0.5) ? 1 : 0;
    if (c + 1 < alphabet_size) {
      protos[c + 1] = protos[c];
      int flipped = 0;
      while (flipped < 8) {
        const int i = static_cast<int>(rng.uniform_int(128));
        protos[c + 1][i] ^= 1;
        ++flipped;
      }
    }
  }
  // parity-preserving successor: a within-pair mistake on one letter
  // misleads exactly the within-pair decision at the next position
  std::vector<int> successor(alphabet_size);
  for (int c = 0; c < alphabet_size; ++c) successor[c] = (c + 2) % alphabet_size;

  for (int w = 0; w < n_words; ++w) {
    OcrWord word;
    word.fold = w % 10;
    const int len = min_len + static_cast<int>(rng.uniform_int(max_len - min_len + 1));
    int letter = static_cast<int>(rng.uniform_int(alphabet_size));
    for (int t = 0; t < len; ++t) {
      word.letters.push_back(letter);
      auto px = protos[letter];
      if (noise > 0.0) {
        for (int i = 0; i < 128; ++i) {
          if (rng.bernoulli(noise)) px[i] ^= 1;
        }
      }
      word.pixels.push_back(px);
      letter = rng.bernoulli(bigram_strength) ? successor[letter]
                                              : static_cast<int>(rng.uniform_int(alphabet_size));
    }
    corpus.words.push_back(std::move(word));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// SeqLabelEnv
// ---------------------------------------------------------------------------

SeqLabelEnv::SeqLabelEnv(const SeqLabelConfig& cfg, const std::vector<const OcrWord*>& words)
    : cfg_(cfg), words_(words) {
  schema_.name = "seqlabel";
  schema_.feature_dim = cfg.feature_dim();
  schema_.action = ActionSpec::discrete(cfg.alphabet);
}

void SeqLabelEnv::load_word(const OcrWord* word) {
  word_ = word;
  t_ = 1;
  prev_letter_ = -1;
  correct_ = 0;
}

void SeqLabelEnv::reset(RngStream& rng) {
  if (words_.empty()) throw ConfigError("sequence labeling corpus is empty");
  load_word(words_[rng.uniform_int(words_.size())]);
}

StateObs SeqLabelEnv::observe() const {
  if (!word_) throw ConfigError("environment not reset");
  std::vector<double> f;
  f.reserve(cfg_.feature_dim());
  const auto& px = word_->pixels[t_ - 1];
  for (int i = 0; i < cfg_.pixel_dim; ++i) f.push_back(i < 128 ? px[i] : 0.0);
  if (cfg_.prev_letter_feature) {
    const int shown =
        teacher_forcing_ ? (t_ > 1 ? word_->letters[t_ - 2] : -1) : prev_letter_;
    for (int c = 0; c < cfg_.alphabet; ++c) f.push_back(shown == c ? 1.0 : 0.0);
  }
  return StateObs::from_features(std::move(f), t_);
}

ActionVal SeqLabelEnv::expert_action() const {
  if (!word_) throw ConfigError("environment not reset");
  return ActionVal::make_discrete(word_->letters[t_ - 1]);
}

bool SeqLabelEnv::step(const ActionVal& a, RngStream&) {
  if (!a.is_discrete() || a.label() < 0 || a.label() >= cfg_.alphabet)
    throw SchemaError("label outside the alphabet");
  if (a.label() == word_->letters[t_ - 1]) ++correct_;
  prev_letter_ = a.label();
  ++t_;
  return t_ <= word_->length();
}

std::map<std::string, double> SeqLabelEnv::episode_metrics() const {
  const int done = std::min(t_ - 1, word_ ? word_->length() : 0);
  return {{"correct", static_cast<double>(correct_)},
          {"length", static_cast<double>(done)},
          {"char_accuracy", done > 0 ? static_cast<double>(correct_) / done : 0.0}};
}

// ---------------------------------------------------------------------------
// Evaluation and model
// ---------------------------------------------------------------------------

double seqlabel_accuracy(const Policy& policy, const SeqLabelConfig& cfg,
                         const std::vector<const OcrWord*>& words) {
  RngStream rng(0);
  long correct = 0, total = 0;
  SeqLabelEnv env(cfg, words);
  for (const OcrWord* w : words) {
    env.load_word(w);
    for (int t = 1; t <= w->length(); ++t) {
      StateObs obs = env.observe();
      obs.time_step = t;
      const ActionVal a = policy.act(obs, rng);
      if (a.label() == w->letters[t - 1]) ++correct;
      ++total;
      env.step(a, rng);
    }
  }
  return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

SeqLabelModel::SeqLabelModel(OcrCorpus corpus, SeqLabelConfig cfg, int test_fold)
    : corpus_(std::move(corpus)), cfg_(cfg) {
  schema_.name = "seqlabel";
  schema_.feature_dim = cfg_.feature_dim();
  schema_.action = ActionSpec::discrete(cfg_.alphabet);
  for (const auto& w : corpus_.words) {
    if (w.fold == test_fold && corpus_.words.size() > 20) test_.push_back(&w);
    else train_.push_back(&w);
  }
  if (test_.empty()) test_ = train_;  // tiny corpora evaluate on themselves
  if (train_.empty()) throw ConfigError("sequence labeling corpus has no training words");
}

std::unique_ptr<Environment> SeqLabelModel::make() const {
  return std::make_unique<SeqLabelEnv>(cfg_, train_);
}

double SeqLabelModel::metric_from(const std::vector<Trajectory>& trajs) const {
  double correct = 0.0, total = 0.0;
  for (const auto& t : trajs) {
    correct += t.metrics.at("correct");
    total += t.metrics.at("length");
  }
  return total > 0 ? correct / total : 0.0;
}

std::optional<double> SeqLabelModel::deterministic_metric(const Policy& policy) const {
  return seqlabel_accuracy(policy, cfg_, test_);
}

int SeqLabelModel::max_word_length() const {
  int m = 1;
  for (const auto& w : corpus_.words) m = std::max(m, w.length());
  return m;
}

}  // namespace ilb
