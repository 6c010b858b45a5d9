// Copyright 2026 The Viscade Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VISCADE_APP_CORPUS_IO_H_
#define VISCADE_APP_CORPUS_IO_H_

#include <filesystem>
#include <vector>

#include "viscade/app/synth.h"
#include "viscade/index/doc.h"

namespace viscade::app {

// Corpus directory layout: docs.jsonl (one metadata record per doc),
// <family>.emb per embedding family, and hidden.jsonl when the generator's
// ground truth is kept.
void save_corpus(const std::filesystem::path& dir, std::span<const index::ImageDoc> docs,
                 std::span<const HiddenState> hidden = {});

// Throws kLoad on malformed records or embeddings for unknown ids.
std::vector<index::ImageDoc> load_corpus(const std::filesystem::path& dir);
// Empty when the corpus has no hidden.jsonl.
std::vector<HiddenState> load_hidden(const std::filesystem::path& dir);

}  // namespace viscade::app

#endif  // VISCADE_APP_CORPUS_IO_H_
