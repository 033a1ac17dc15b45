#include "corex/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "corex/eval.hpp"
#include "corex/hierarchy.hpp"
#include "corex/persistence.hpp"
#include "corex/pipeline.hpp"
#include "corex/synthetic.hpp"
#include "corex/topics.hpp"

namespace corex::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Everything a subcommand can be configured with; each subcommand binds the
/// subset it uses.
struct Options {
  std::string corpus, vocab, matrix, model, out, labels, label_map, table;
  std::string anchors, layers, format = "text";
  std::string nb_train_matrix, nb_train_labels;
  std::size_t factors = 1;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_iter = 200;
  double tol = 1e-5;
  std::size_t patience = 10;
  double gamma = FitConfig().damping;
  double lambda = 0.5;
  std::optional<std::size_t> freeze_after;
  std::size_t top = 10;
  double threshold = 0.5;
  std::size_t threads = 1;

  // Corpus preparation.
  std::size_t vocab_size = 20000;
  std::size_t min_df = 1;
  std::size_t min_length = 2;
  bool strip = false;
  bool negation = false;

  // Synthetic generator.
  std::size_t words = 10;
  std::string block_sizes, parents;
  double noise = 0.1;
  double parent_noise = 0.1;
  std::size_t docs = 500;
};

/// Output files are collected and only written after the command succeeds.
struct Outputs {
  std::vector<std::pair<fs::path, std::string>> files;
  void add(const fs::path& p, std::string contents) { files.emplace_back(p, std::move(contents)); }
};

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationError(std::string("missing required flag ") + flag);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CorpusOptions corpus_options(const Options& o) {
  CorpusOptions c;
  c.tokenize.min_token_length = o.min_length;
  c.tokenize.negation = o.negation;
  c.strip_boilerplate = o.strip;
  c.vocab_size = o.vocab_size;
  c.min_df = o.min_df;
  return c;
}

std::vector<Document> load_corpus(const Options& o) {
  need(o.corpus, "--corpus");
  return prepare_documents(read_corpus_jsonl(o.corpus), corpus_options(o));
}

/// "--anchors" names a file when one exists at that path, else it is inline.
AnchorSet load_anchors(const Options& o, const Vocabulary* vocab) {
  if (!(o.beta > 0.0)) throw ValidationError("--beta must be positive");
  if (o.anchors.empty()) return AnchorSet(o.beta);
  if (!vocab) throw ValidationError("--anchors requires --vocab to resolve terms");
  std::error_code ec;
  std::string text = fs::is_regular_file(o.anchors, ec) ? read_text(o.anchors) : o.anchors;
  auto entries = parse_anchor_spec(text);
  auto resolved = resolve_anchors(entries, *vocab, o.beta);
  if (!resolved.unknown.empty()) {
    std::string list;
    for (const auto& t : resolved.unknown) list += (list.empty() ? "" : ", ") + t;
    throw ValidationError("anchor terms not in the vocabulary: " + list);
  }
  return resolved.anchors;
}

FitConfig fit_config(const Options& o, const Vocabulary* vocab) {
  FitConfig c;
  c.n_factors = o.factors;
  c.max_iter = o.max_iter;
  c.tol = o.tol;
  c.patience = o.patience;
  c.seed = o.seed;
  c.damping = o.gamma;
  c.smoothing = o.lambda;
  c.freeze_structure_after = o.freeze_after;
  c.threads = o.threads;
  c.anchors = load_anchors(o, vocab);
  return c;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ValidationError(std::string("bad value in ") + flag + ": '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError(std::string(flag) + " is empty");
  return out;
}

std::map<std::string, std::size_t> parse_label_map(const std::string& text) {
  std::map<std::string, std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.rfind('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("bad --label-map item '" + item + "'");
    std::string value = item.substr(eq + 1);
    std::size_t used = 0;
    long long f = -1;
    try {
      f = std::stoll(value, &used);
    } catch (const std::exception&) {
    }
    if (f < 0 || used != value.size()) throw ValidationError("bad factor in --label-map item '" + item + "'");
    if (!out.emplace(item.substr(0, eq), static_cast<std::size_t>(f)).second) {
      throw ValidationError("label listed twice in --label-map: " + item.substr(0, eq));
    }
  }
  if (out.empty()) throw ValidationError("--label-map is empty");
  return out;
}

std::string vocab_text(const Vocabulary& v) {
  std::ostringstream s;
  write_vocabulary(s, v);
  return s.str();
}

std::string matrix_text(const SparseBinaryMatrix& m) {
  std::ostringstream s;
  write_matrix(s, m);
  return s.str();
}

std::string model_bytes(const LatentFactorModel& model) {
  std::ostringstream s(std::ios::binary);
  write_model(s, model);
  return s.str();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string scores_text(const DenseMatrix& scores) {
  std::string out = "#rows=" + std::to_string(scores.rows()) + " cols=" + std::to_string(scores.cols()) + "\n";
  for (std::size_t l = 0; l < scores.rows(); ++l) {
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (j) out.push_back('\t');
      out += format_double(scores(l, j));
    }
    out.push_back('\n');
  }
  return out;
}

LatentFactorModel load_checked_model(const Options& o, const SparseBinaryMatrix* data) {
  need(o.model, "--model");
  auto model = load_model(o.model);
  if (data && data->n_cols() != model.n_words) {
    throw DataError("matrix has " + std::to_string(data->n_cols()) + " columns but the model expects " +
                    std::to_string(model.n_words));
  }
  return model;
}

// Subcommands. Each returns the metadata fields specific to it.

json cmd_vocab(const Options& o, Outputs& outs) {
  need(o.out, "--out");
  auto docs = load_corpus(o);
  auto opts = corpus_options(o);
  auto vocab = build_vocabulary(docs, opts.tokenize, opts.vocab_size, opts.min_df);
  outs.add(o.out, vocab_text(vocab));
  return {{"documents", docs.size()}, {"terms", vocab.size()}};
}

json cmd_vectorize(const Options& o, Outputs& outs) {
  need(o.out, "--out");
  need(o.vocab, "--vocab");
  auto docs = load_corpus(o);
  auto vocab = read_vocabulary(o.vocab);
  auto matrix = vectorize(docs, vocab, corpus_options(o).tokenize);
  outs.add(o.out, matrix_text(matrix));
  return {{"documents", matrix.n_rows()}, {"terms", matrix.n_cols()}, {"nnz", matrix.nnz()}};
}

json cmd_fit(const Options& o, Outputs& outs) {
  need(o.out, "--out");
  need(o.matrix, "--matrix");
  std::optional<Vocabulary> vocab;
  if (!o.vocab.empty()) vocab = read_vocabulary(o.vocab);
  auto config = fit_config(o, vocab ? &*vocab : nullptr);
  auto data = read_matrix(o.matrix);
  if (vocab && vocab->size() != data.n_cols()) throw DataError("vocabulary and matrix widths differ");
  validate(config, data.n_cols());
  auto result = fit(data, config);
  outs.add(o.out, model_bytes(result.model));
  outs.add(o.out + ".report.json", fit_report_to_json(result.report).dump(2) + "\n");
  return {{"config", config_to_json(config)}, {"report", fit_report_to_json(result.report)}};
}

json cmd_topics(const Options& o, Outputs& outs) {
  need(o.out, "--out");
  need(o.vocab, "--vocab");
  if (o.format != "text" && o.format != "json") throw ValidationError("--format must be text or json");
  auto model = load_checked_model(o, nullptr);
  auto vocab = read_vocabulary(o.vocab);
  if (vocab.size() != model.n_words) throw DataError("vocabulary does not match the model");
  auto topics = all_topics(model, model.mi, o.top);
  outs.add(o.out, o.format == "json" ? topics_to_string(topics, vocab) : topics_to_text(topics, vocab));
  return {{"top", o.top}, {"format", o.format}};
}

json cmd_score(const Options& o, Outputs& outs) {
  need(o.out, "--out");
  need(o.matrix, "--matrix");
  auto data = read_matrix(o.matrix);
  auto model = load_checked_model(o, &data);
  outs.add(o.out, scores_text(score_documents(model, data, o.threads)));
  return {{"documents", data.n_rows()}};
}

json cmd_eval(const Options& o, Outputs& outs) {
  need(o.out, "--out");
  need(o.matrix, "--matrix");
  need(o.labels, "--labels");
  need(o.label_map, "--label-map");
  if (!(o.threshold >= 0.0 && o.threshold <= 1.0)) throw ValidationError("--threshold must lie in [0, 1]");
  if (o.nb_train_matrix.empty() != o.nb_train_labels.empty()) {
    throw ValidationError("--nb-train-matrix and --nb-train-labels go together");
  }
  auto label_map = parse_label_map(o.label_map);
  auto data = read_matrix(o.matrix);
  auto model = load_checked_model(o, &data);
  auto docs = read_corpus_jsonl(o.labels);
  if (docs.size() != data.n_rows()) throw DataError("--labels and --matrix differ in document count");
  auto truths = label_truths(docs);

  std::optional<std::map<std::string, std::vector<double>>> baseline;
  if (!o.nb_train_matrix.empty()) {
    auto train = read_matrix(o.nb_train_matrix);
    auto train_docs = read_corpus_jsonl(o.nb_train_labels);
    if (train_docs.size() != train.n_rows()) throw DataError("NB training labels and matrix differ in length");
    if (train.n_cols() != data.n_cols()) throw DataError("NB training matrix width differs");
    auto train_truths = label_truths(train_docs);
    baseline.emplace();
    for (const auto& [label, factor] : label_map) {
      std::vector<int> y(train.n_rows(), 0);
      for (const auto& t : train_truths) {
        if (t.name == label) y = t.truth;
      }
      (*baseline)[label] = nb_predict(nb_fit(train, y), data).positive;
    }
  }
  auto scores = score_documents(model, data, o.threads);
  auto report = evaluate(scores, truths, label_map, o.threshold, baseline ? &*baseline : nullptr);
  outs.add(o.out, metrics_to_string(report));
  auto table = metrics_to_table(report);
  if (!o.table.empty()) outs.add(o.table, table);
  return {{"threshold", o.threshold}, {"table", table}};
}

json cmd_tree(const Options& o, Outputs& outs) {
  need(o.out, "--out");
  need(o.matrix, "--matrix");
  need(o.vocab, "--vocab");
  need(o.layers, "--layers");
  auto layers = parse_size_list(o.layers, "--layers");
  auto vocab = read_vocabulary(o.vocab);
  auto config = fit_config(o, &vocab);
  config.n_factors = layers.front();
  auto data = read_matrix(o.matrix);
  if (vocab.size() != data.n_cols()) throw DataError("vocabulary and matrix widths differ");
  validate(config, data.n_cols());
  auto stack = fit_hierarchy(data, layers, config);
  auto tree = export_tree(stack, vocab, o.top);
  outs.add(o.out, tree_to_dot(tree));
  outs.add(o.out + ".json", tree_to_json(tree).dump(2) + "\n");
  json reports = json::array();
  for (const auto& layer : stack.layers) reports.push_back(fit_report_to_json(layer.report));
  return {{"config", config_to_json(config)}, {"layers", layers}, {"reports", reports}};
}

json cmd_synth(const Options& o, Outputs& outs) {
  need(o.out, "--out");
  SyntheticSpec spec;
  spec.n_factors = o.factors;
  spec.words_per_factor = o.words;
  if (!o.block_sizes.empty()) spec.block_sizes = parse_size_list(o.block_sizes, "--block-sizes");
  spec.noise = o.noise;
  spec.n_docs = o.docs;
  spec.seed = o.seed;
  spec.parent_noise = o.parent_noise;
  if (!o.parents.empty()) {
    std::stringstream ss(o.parents);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "-") {
        spec.parent.push_back(std::nullopt);
        continue;
      }
      std::size_t used = 0;
      std::size_t p = 0;
      try {
        p = std::stoull(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (item.empty() || used != item.size()) throw ValidationError("bad --parents item '" + item + "'");
      spec.parent.push_back(p);
      spec.n_parents = std::max(spec.n_parents, p + 1);
    }
  }
  auto corpus = generate_synthetic(spec);
  auto docs = synthetic_documents(corpus);
  fs::path dir(o.out);
  std::string jsonl;
  for (const auto& d : docs) {
    jsonl += json{{"id", d.id}, {"text", d.text}, {"labels", d.labels}}.dump() + "\n";
  }
  outs.add(dir / "corpus.jsonl", jsonl);
  outs.add(dir / "vocab.txt", vocab_text(corpus.vocab));
  outs.add(dir / "matrix.txt", matrix_text(corpus.matrix));
  outs.add(dir / "truth.json", json{{"word_factor", corpus.word_factor}}.dump() + "\n");
  return {{"documents", docs.size()}, {"words", corpus.vocab.size()}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Anchored CorEx topic models", "corex"};
  app.require_subcommand(1);

  auto corpus_flags = [&](CLI::App* s) {
    s->add_option("--corpus", o.corpus, "Corpus JSON-lines file");
    s->add_option("--min-length", o.min_length, "Minimum token length");
    s->add_flag("--strip-boilerplate", o.strip, "Remove newsgroup headers, quotes and signatures");
    s->add_flag("--negation", o.negation, "Rewrite the token after not/no as not_<token>");
  };
  auto fit_flags = [&](CLI::App* s) {
    s->add_option("--matrix", o.matrix, "Document-term matrix file");
    s->add_option("--vocab", o.vocab, "Vocabulary file (needed to resolve anchors)");
    s->add_option("--factors", o.factors, "Number of latent factors");
    s->add_option("--anchors", o.anchors, "term:factor[:strength],... or a file with one per line");
    s->add_option("--beta", o.beta, "Default anchor strength");
    s->add_option("--seed", o.seed, "Random seed");
    s->add_option("--max-iter", o.max_iter, "Iteration cap");
    s->add_option("--tol", o.tol, "Convergence tolerance on the TC bound");
    s->add_option("--patience", o.patience, "Iterations below tolerance before stopping");
    s->add_option("--gamma", o.gamma, "Damping of connection updates, in (0, 1]");
    s->add_option("--lambda", o.lambda, "Smoothing pseudo-counts");
    s->add_option("--freeze-after", o.freeze_after, "Freeze connections after this many iterations");
    s->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    s->add_option("--out", o.out, "Output path");
  };

  auto* vocab = app.add_subcommand("vocab", "Build a vocabulary from a corpus");
  corpus_flags(vocab);
  vocab->add_option("--size", o.vocab_size, "Vocabulary cap (most frequent terms)");
  vocab->add_option("--min-df", o.min_df, "Minimum document frequency");
  vocab->add_option("--out", o.out, "Output vocabulary file");

  auto* vectorize_cmd = app.add_subcommand("vectorize", "Turn a corpus into a binary matrix");
  corpus_flags(vectorize_cmd);
  vectorize_cmd->add_option("--vocab", o.vocab, "Vocabulary file");
  vectorize_cmd->add_option("--out", o.out, "Output matrix file");

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model");
  fit_flags(fit_cmd);

  auto* topics = app.add_subcommand("topics", "Export the top words of every factor");
  topics->add_option("--model", o.model, "Model file");
  topics->add_option("--vocab", o.vocab, "Vocabulary file");
  topics->add_option("--top", o.top, "Terms per topic");
  topics->add_option("--format", o.format, "text or json");
  topics->add_option("--out", o.out, "Output file");

  auto* score = app.add_subcommand("score", "Score documents with a fitted model");
  score->add_option("--model", o.model, "Model file");
  score->add_option("--matrix", o.matrix, "Document-term matrix file");
  score->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  score->add_option("--out", o.out, "Output score file");

  auto* eval = app.add_subcommand("eval", "Evaluate factors as label classifiers");
  eval->add_option("--model", o.model, "Model file");
  eval->add_option("--matrix", o.matrix, "Document-term matrix of the evaluation documents");
  eval->add_option("--labels", o.labels, "Corpus JSON-lines file with the documents' labels (row-aligned)");
  eval->add_option("--label-map", o.label_map, "label=factor,... pairs to evaluate");
  eval->add_option("--threshold", o.threshold, "Decision threshold on p(y=1|x)");
  eval->add_option("--nb-train-matrix", o.nb_train_matrix, "Training matrix for the naive Bayes baseline");
  eval->add_option("--nb-train-labels", o.nb_train_labels, "Training labels (JSON-lines) for the baseline");
  eval->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  eval->add_option("--table", o.table, "Also write the text table here");
  eval->add_option("--out", o.out, "Output metrics JSON");

  auto* tree = app.add_subcommand("tree", "Fit stacked layers and export the topic tree");
  fit_flags(tree);
  tree->add_option("--layers", o.layers, "Comma-separated factor counts per layer, e.g. 40,3,1");
  tree->add_option("--top", o.top, "Words per layer-0 factor in the tree");

  auto* synth = app.add_subcommand("synth", "Generate a block-structured synthetic corpus");
  synth->add_option("--factors", o.factors, "Number of blocks");
  synth->add_option("--words", o.words, "Words per block");
  synth->add_option("--block-sizes", o.block_sizes, "Comma-separated block sizes (overrides --words)");
  synth->add_option("--noise", o.noise, "Word flip probability");
  synth->add_option("--docs", o.docs, "Number of documents");
  synth->add_option("--seed", o.seed, "Random seed");
  synth->add_option("--parents", o.parents, "Parent per block, '-' for none, e.g. -,0,0");
  synth->add_option("--parent-noise", o.parent_noise, "Probability a block disagrees with its parent");
  synth->add_option("--out", o.out, "Output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  Outputs outs;
  try {
    json details;
    if (name == "vocab") details = cmd_vocab(o, outs);
    else if (name == "vectorize") details = cmd_vectorize(o, outs);
    else if (name == "fit") details = cmd_fit(o, outs);
    else if (name == "topics") details = cmd_topics(o, outs);
    else if (name == "score") details = cmd_score(o, outs);
    else if (name == "eval") details = cmd_eval(o, outs);
    else if (name == "tree") details = cmd_tree(o, outs);
    else details = cmd_synth(o, outs);

    json meta{{"tool", "corex"}, {"version", kToolVersion}, {"command", name}, {"arguments", args}};
    json files = json::array();
    for (const auto& [path, contents] : outs.files) files.push_back(path.string());
    meta["outputs"] = files;
    meta["details"] = details;
    if (name == "synth") {
      fs::create_directories(o.out);
      outs.add(fs::path(o.out) / "synth.meta.json", meta.dump(2) + "\n");
    } else {
      outs.add(o.out + ".meta.json", meta.dump(2) + "\n");
    }
    for (const auto& [path, contents] : outs.files) {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_file_atomic(path, contents);
    }
    if (name == "eval") out << details["table"].get<std::string>();
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace corex::cli
