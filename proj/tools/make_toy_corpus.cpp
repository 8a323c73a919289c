// Copyright 2026 The cmfda Authors.
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

// Regenerates the bundled shape corpus: make_toy_corpus [OUT_DIR] [IMAGES] [SEED]

#include <cstdlib>
#include <iostream>
#include <string>

#include "cmfda/data/toy.hpp"

int main(int argc, char** argv) {
  cmfda::data::ToyCorpusOptions opt;
  const std::string out = argc > 1 ? argv[1] : "data/toy_corpus";
  if (argc > 2) opt.images = std::stoul(argv[2]);
  if (argc > 3) opt.seed = std::stoull(argv[3]);
  try {
    cmfda::data::write_toy_corpus(out, opt);
  } catch (const std::exception& e) {
    std::cerr << "make_toy_corpus: " << e.what() << '\n';
    return 2;
  }
  std::cout << "wrote " << opt.images << " images to " << out << '\n';
  return 0;
}
