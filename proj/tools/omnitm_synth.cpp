// Writes the synthetic evaluation bundle (corpus, designed pair scores,
// groups, token list).

#include <CLI11.hpp>

#include <iostream>

#include "omnitm/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic embedding corpus", "omnitm-synth"};
  std::string dir = "data/synthetic";
  std::uint64_t seed = 42;
  auto design = omnitm::synthetic::default_design();
  app.add_option("--out-dir", dir)->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--documents", design.documents)->capture_default_str();
  app.add_option("--filler-words", design.filler_words)->capture_default_str();
  app.add_option("--signature-presence", design.signature_presence)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    omnitm::synthetic::write_bundle(dir, design, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
