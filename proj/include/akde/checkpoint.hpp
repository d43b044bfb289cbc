#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "akde/corpus.hpp"
#include "akde/metrics.hpp"
#include "akde/model.hpp"

namespace akde {

// Everything needed to score new text with a trained model.
struct Checkpoint {
  Vocabulary vocabulary;
  UnigramModel unigram;
  std::unique_ptr<DualEncoder> model;
};

// JSON document: format tag, model config, vocabulary (tokens and hash),
// knowledge base, unigram counts and every named parameter with its shape and
// column-major values. Output is a pure function of its inputs.
void save_checkpoint(std::ostream& out, DualEncoder& model, const Vocabulary& vocab, const UnigramModel& unigram);
void save_checkpoint(const std::filesystem::path& path, DualEncoder& model, const Vocabulary& vocab,
                     const UnigramModel& unigram);

// Rebuilds the model and checks the vocabulary hash and every parameter
// shape against the stored config. Mismatches throw FormatError.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace akde
