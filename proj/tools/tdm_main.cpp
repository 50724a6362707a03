// tdm_main.cpp
// Command-line front end: convert / train / tag / eval / agree / kg.
//
// Exit codes: 0 success, 1 input or format problem, 2 internal/numerical
// failure. Diagnostics go to stderr; data goes to stdout or to files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdm/tdm.hpp"

namespace fs = std::filesystem;

namespace {

enum class LogLevel { Error = 0, Warn = 1, Info = 2 };
LogLevel g_log_level = LogLevel::Info;

void log_warn(const std::string& msg) {
  if (g_log_level >= LogLevel::Warn) std::cerr << "warning: " << msg << "\n";
}

void log_info(const std::string& msg) {
  if (g_log_level >= LogLevel::Info) std::cerr << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tdm::FormatError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tdm::FormatError("cannot write " + path);
  out << content;
}

std::string file_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

void emit(const std::optional<std::string>& out_path, const std::string& data) {
  if (out_path)
    write_file(*out_path, data);
  else
    std::cout << data;
}

// ---------------------------------------------------------------------------
// Corpus loading shared by the subcommands

tdm::Corpus load_conll_files(const std::vector<std::string>& paths,
                             int* repairs = nullptr) {
  tdm::Corpus corpus;
  std::vector<std::string> findings;
  for (const auto& path : paths) {
    int file_repairs = 0;
    tdm::Corpus part =
        tdm::read_conll(read_file(path), file_stem(path), &file_repairs, &findings);
    if (repairs) *repairs += file_repairs;
    if (file_repairs > 0)
      log_warn(path + ": repaired " + std::to_string(file_repairs) +
               " malformed BIO tag(s)");
    for (auto& s : part.sentences) corpus.sentences.push_back(std::move(s));
  }
  for (const auto& f : findings) log_warn(f);
  tdm::validate_unique_keys(corpus);
  return corpus;
}

std::vector<tdm::Sentence> load_brat_pair(const std::string& txt_path,
                                          tdm::ConflictPolicy policy) {
  fs::path ann_path = fs::path(txt_path);
  ann_path.replace_extension(".ann");
  std::vector<std::string> findings;
  auto sentences = tdm::read_brat(read_file(txt_path),
                                  read_file(ann_path.string()),
                                  file_stem(txt_path), &findings);
  for (const auto& f : findings) log_warn(txt_path + ": " + f);
  std::vector<std::string> warnings;
  for (auto& s : sentences) {
    s.entities = tdm::resolve_nesting(s.entities, policy, &warnings);
    for (const auto& finding : tdm::lint_spans(s))
      log_warn(txt_path + " " + s.sent_id + ": [" + finding.rule_id + "] " +
               finding.message);
  }
  for (const auto& w : warnings) log_warn(txt_path + ": " + w);
  return sentences;
}

tdm::ConllLayout pick_layout(const tdm::Corpus& corpus, int columns) {
  if (columns == 2) return tdm::ConllLayout::TokenTag;
  if (columns == 3) return tdm::ConllLayout::TokenPosTag;
  return tdm::corpus_has_full_pos(corpus) ? tdm::ConllLayout::TokenPosTag
                                          : tdm::ConllLayout::TokenTag;
}

// "name=path" gazetteer specs from the command line
std::vector<tdm::Gazetteer> load_gazetteers(const std::vector<std::string>& specs) {
  std::vector<tdm::Gazetteer> out;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size())
      throw tdm::InvalidInput("--gazetteer expects name=path, got \"" + spec +
                              "\"");
    out.push_back(
        tdm::Gazetteer::from_file(spec.substr(eq + 1), spec.substr(0, eq)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommand state

struct ConvertArgs {
  std::string from, to;
  std::vector<std::string> inputs;
  std::optional<std::string> out_file;
  std::optional<std::string> out_dir;
  int columns = 0;  // 0 = auto
  bool lenient = false;
};

struct TrainArgs {
  std::vector<std::string> train_files;
  std::string model_path;
  std::optional<std::string> log_path;
  bool augment_mask = false;
  bool no_pos = false;
  bool no_shape = false;
  std::vector<std::string> gazetteer_specs;
  tdm::TrainConfig config;
};

struct TagArgs {
  std::string model_path;
  std::string input;
  std::optional<std::string> out_file;
  bool constrain_bio = false;
};

struct EvalArgs {
  std::string gold, pred;
  std::string mode = "exact";
};

struct AgreeArgs {
  std::vector<std::string> files;
};

struct KgArgs {
  std::vector<std::string> inputs;
  std::string format = "dot";
  std::optional<std::string> out_file;
  tdm::KgThresholds thresholds;
};

int run_convert(const ConvertArgs& args) {
  const auto policy =
      args.lenient ? tdm::ConflictPolicy::Lenient : tdm::ConflictPolicy::Strict;
  tdm::Corpus corpus;
  if (args.from == "conll") {
    corpus = load_conll_files(args.inputs);
  } else {
    for (const auto& path : args.inputs)
      for (auto& s : load_brat_pair(path, policy))
        corpus.sentences.push_back(std::move(s));
    tdm::validate_unique_keys(corpus);
  }

  if (args.to == "conll") {
    if (!args.out_file) throw tdm::InvalidInput("--out is required for CoNLL output");
    write_file(*args.out_file, tdm::write_conll(corpus, pick_layout(corpus, args.columns)));
    log_info("wrote " + std::to_string(corpus.sentences.size()) +
             " sentence(s) to " + *args.out_file);
  } else {
    if (!args.out_dir) throw tdm::InvalidInput("--out-dir is required for BRAT output");
    fs::create_directories(*args.out_dir);
    std::map<std::string, std::vector<tdm::Sentence>> by_doc;
    for (const auto& s : corpus.sentences) by_doc[s.doc_id].push_back(s);
    for (const auto& [doc_id, sentences] : by_doc) {
      // BRAT cannot carry nested annotations we no longer have; entities are
      // already flat here.
      const tdm::BratFiles files = tdm::write_brat(sentences);
      write_file((fs::path(*args.out_dir) / (doc_id + ".txt")).string(), files.txt);
      write_file((fs::path(*args.out_dir) / (doc_id + ".ann")).string(), files.ann);
    }
    log_info("wrote " + std::to_string(by_doc.size()) + " BRAT document(s) to " +
             *args.out_dir);
  }
  return 0;
}

int run_train(const TrainArgs& args) {
  tdm::Corpus corpus = load_conll_files(args.train_files);
  const std::size_t original = corpus.sentences.size();

  tdm::FeatureConfig features;
  features.use_pos = !args.no_pos;
  features.use_shape = !args.no_shape;
  features.gazetteers = load_gazetteers(args.gazetteer_specs);

  if (features.use_pos && !tdm::corpus_has_full_pos(corpus))
    log_warn("training corpus has no (complete) POS column; POS features are disabled for tokens without tags");

  if (args.augment_mask) {
    corpus = tdm::mask_entities(corpus, features.unknown_token);
    log_info("training sentences: " + std::to_string(corpus.sentences.size()) +
             " (" + std::to_string(original) + " original + " +
             std::to_string(corpus.sentences.size() - original) + " masked)");
  } else {
    log_info("training sentences: " + std::to_string(corpus.sentences.size()));
  }

  tdm::TrainReport report;
  const tdm::CrfModel model = tdm::train(corpus, features, args.config, &report);
  write_file(args.model_path, model.serialize());

  if (args.log_path) {
    std::string log;
    for (std::size_t i = 0; i < report.objective_trace.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%zu\t%.12g\n", i,
                    report.objective_trace[i]);
      log += buf;
    }
    write_file(*args.log_path, log);
  }

  log_info("features: " + std::to_string(report.feature_count));
  log_info("iterations: " + std::to_string(report.iterations) +
           (report.converged ? " (converged)" : " (iteration budget reached)"));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "objective: %.6f  gradient norm: %.3e",
                report.final_objective, report.gradient_norm);
  log_info(buf);
  if (!report.converged)
    log_warn("optimizer did not converge; the best model so far was saved");
  log_info("model written to " + args.model_path);
  return 0;
}

int run_tag(const TagArgs& args) {
  const tdm::CrfModel model = tdm::CrfModel::deserialize(read_file(args.model_path));
  tdm::Corpus corpus = load_conll_files({args.input});
  int repairs = 0;
  for (auto& s : corpus.sentences)
    s.entities = tdm::tag(model, s, args.constrain_bio, &repairs);
  if (repairs > 0)
    log_warn("decoder emitted " + std::to_string(repairs) +
             " malformed BIO transition(s), repaired");
  emit(args.out_file, tdm::write_conll(corpus, pick_layout(corpus, 0)));
  return 0;
}

int run_eval(const EvalArgs& args) {
  const tdm::Corpus gold = load_conll_files({args.gold});
  const tdm::Corpus pred = load_conll_files({args.pred});
  const tdm::EvalReport report = args.mode == "partial"
                                     ? tdm::score_partial_type(gold, pred)
                                     : tdm::score_exact(gold, pred);
  std::cout << report.table() << "\n" << report.machine_readable();
  return 0;
}

int run_agree(const AgreeArgs& args) {
  std::vector<tdm::Corpus> annotators;
  for (const auto& path : args.files)
    annotators.push_back(load_conll_files({path}));
  const tdm::AgreementReport report = tdm::agreement(annotators);
  std::cout << report.table() << "\n" << report.machine_readable();
  return 0;
}

int run_kg(const KgArgs& args) {
  const tdm::Corpus corpus = load_conll_files(args.inputs);
  const tdm::TdmGraph graph = tdm::build_graph(corpus, args.thresholds);
  log_info("graph: " + std::to_string(graph.nodes.size()) + " node(s), " +
           std::to_string(graph.edges.size()) + " edge(s)");
  emit(args.out_file, tdm::export_graph(graph, args.format));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task/Dataset/Metric entity extraction toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value config file; flags override it")
      ->envname("TDM_CONFIG");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::string log_level = "info";
  app.add_option("--log-level", log_level, "Diagnostics verbosity on stderr")
      ->check(CLI::IsMember({"error", "warn", "info"}))
      ->capture_default_str();

  ConvertArgs convert_args;
  auto* convert = app.add_subcommand("convert", "Convert between BRAT and CoNLL");
  convert->add_option("--from", convert_args.from, "Input format")
      ->required()
      ->check(CLI::IsMember({"brat", "conll"}));
  convert->add_option("--to", convert_args.to, "Output format")
      ->required()
      ->check(CLI::IsMember({"brat", "conll"}));
  convert->add_option("inputs", convert_args.inputs,
                      "Input files (.conll, or .txt with sibling .ann)")
      ->required()
      ->expected(-1);
  convert->add_option("--out", convert_args.out_file, "Output CoNLL file");
  convert->add_option("--out-dir", convert_args.out_dir, "Output directory for BRAT pairs");
  convert->add_option("--columns", convert_args.columns,
                      "CoNLL column count (2 or 3; default auto)")
      ->check(CLI::IsMember({2, 3}));
  convert->add_flag("--lenient", convert_args.lenient,
                    "Keep the canonically first label on annotation conflicts");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a CRF tagger");
  train->add_option("--train", train_args.train_files, "Training CoNLL file(s)")
      ->required()
      ->expected(-1);
  train->add_option("--model", train_args.model_path, "Output model file")->required();
  train->add_option("--log", train_args.log_path,
                    "Write the objective value per iteration to this file");
  train->add_flag("--augment-mask", train_args.augment_mask,
                  "Append entity-masked copies of entity-bearing sentences");
  train->add_flag("--no-pos", train_args.no_pos, "Disable POS features");
  train->add_flag("--no-shape", train_args.no_shape, "Disable word-shape features");
  train->add_option("--gazetteer", train_args.gazetteer_specs,
                    "Gazetteer as name=path (repeatable)");
  train->add_option("--sigma2", train_args.config.l2_variance,
                    "Gaussian prior variance")
      ->capture_default_str();
  train->add_option("--max-iterations", train_args.config.max_iterations,
                    "Optimizer iteration budget")
      ->capture_default_str();
  train->add_option("--tolerance", train_args.config.tolerance,
                    "Relative objective-change convergence tolerance")
      ->capture_default_str();
  train->add_option("--seed", train_args.config.seed, "Random seed")
      ->capture_default_str();
  train->add_option("--threads", train_args.config.threads,
                    "Worker threads for gradient evaluation")
      ->capture_default_str();

  TagArgs tag_args;
  auto* tag_cmd = app.add_subcommand("tag", "Tag a corpus with a trained model");
  tag_cmd->add_option("--model", tag_args.model_path, "Model file")->required();
  tag_cmd->add_option("--input", tag_args.input, "Input CoNLL file")->required();
  tag_cmd->add_option("--out", tag_args.out_file, "Output CoNLL file (default stdout)");
  tag_cmd->add_flag("--constrain-bio", tag_args.constrain_bio,
                    "Forbid invalid BIO transitions during decoding");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold");
  eval_cmd->add_option("--gold", eval_args.gold, "Gold CoNLL file")->required();
  eval_cmd->add_option("--pred", eval_args.pred, "Predicted CoNLL file")->required();
  eval_cmd->add_option("--mode", eval_args.mode, "Matching mode")
      ->check(CLI::IsMember({"exact", "partial"}))
      ->capture_default_str();

  AgreeArgs agree_args;
  auto* agree = app.add_subcommand("agree", "Inter-annotator agreement");
  agree->add_option("files", agree_args.files, "One CoNLL file per annotator")
      ->required()
      ->expected(-2);

  KgArgs kg_args;
  auto* kg = app.add_subcommand("kg", "Build the co-occurrence knowledge graph");
  kg->add_option("--input", kg_args.inputs, "Tagged CoNLL file(s)")
      ->required()
      ->expected(-1);
  kg->add_option("--format", kg_args.format, "Export format")
      ->check(CLI::IsMember({"dot", "jsonl"}))
      ->capture_default_str();
  kg->add_option("--out", kg_args.out_file, "Output file (default stdout)");
  kg->add_option("--min-node-mentions", kg_args.thresholds.min_node_mentions,
                 "Minimum mentions for a node")
      ->capture_default_str();
  kg->add_option("--min-node-papers", kg_args.thresholds.min_node_papers,
                 "Minimum distinct papers for a node")
      ->capture_default_str();
  kg->add_option("--min-edge-sentences", kg_args.thresholds.min_edge_sentences,
                 "Minimum co-occurring sentences for an edge")
      ->capture_default_str();
  kg->add_option("--min-edge-papers", kg_args.thresholds.min_edge_papers,
                 "Minimum distinct papers for an edge")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (log_level == "error")
    g_log_level = LogLevel::Error;
  else if (log_level == "warn")
    g_log_level = LogLevel::Warn;

  try {
    if (convert->parsed()) return run_convert(convert_args);
    if (train->parsed()) return run_train(train_args);
    if (tag_cmd->parsed()) return run_tag(tag_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (agree->parsed()) return run_agree(agree_args);
    if (kg->parsed()) return run_kg(kg_args);
  } catch (const tdm::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tdm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
