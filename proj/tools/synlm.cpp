// synlm — structured language model toolkit.
//
// The model builds binary parse structure incrementally while reading a
// sentence left to right and conditions next-word prediction on the two
// rightmost exposed headwords. Subcommands cover the whole pipeline:
// treebank initialization, reestimation passes, perplexity evaluation,
// parsing, and the trigram baseline. Everything that affects results lives
// in the config file; flags only select inputs.

#include <CLI11.hpp>

#include "synlm/synlm.hpp"

int main(int argc, char** argv) {
  CLI::App app{"structured language model toolkit"};
  app.require_subcommand(1);

  std::string config_path, model_path, corpus_path, input_path, mode = "causal";

  CLI::App* init = app.add_subcommand("init", "build vocabulary and the treebank-initialized model");
  init->add_option("--config", config_path, "config file")->required();

  CLI::App* train = app.add_subcommand("train", "run the reestimation passes, checkpointing each");
  train->add_option("--config", config_path, "config file")->required();

  CLI::App* ppl = app.add_subcommand("ppl", "evaluate perplexity");
  ppl->add_option("--config", config_path, "config file")->required();
  ppl->add_option("--model", model_path, "model checkpoint (trigram file for mode=trigram)")->required();
  ppl->add_option("--corpus", corpus_path, "text corpus, one sentence per line")->required();
  ppl->add_option("--mode", mode, "causal | lower-bound | trigram | interpolated");

  CLI::App* parse = app.add_subcommand("parse", "print the best parse per sentence");
  parse->add_option("--config", config_path, "config file")->required();
  parse->add_option("--model", model_path, "model checkpoint")->required();
  parse->add_option("--input", input_path, "text file, one sentence per line")->required();

  CLI::App* trigram = app.add_subcommand("trigram", "train and evaluate the trigram baseline");
  trigram->add_option("--config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    synlm::RunConfig cfg = synlm::RunConfig::load(config_path);
    if (init->parsed()) return synlm::cmd_init(cfg);
    if (train->parsed()) return synlm::cmd_train(cfg);
    if (ppl->parsed()) return synlm::cmd_ppl(cfg, model_path, corpus_path, mode);
    if (parse->parsed()) return synlm::cmd_parse(cfg, model_path, input_path);
    if (trigram->parsed()) return synlm::cmd_trigram(cfg);
  } catch (const std::exception& e) {
    std::cerr << "synlm-error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
