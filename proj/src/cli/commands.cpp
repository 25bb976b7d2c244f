#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "dsch/cli.hpp"
#include "dsch/config.hpp"
#include "dsch/dataset.hpp"
#include "dsch/io.hpp"
#include "dsch/seeds.hpp"
#include "dsch/training.hpp"

namespace dsch::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

ordered_json epoch_json(const EpochRecord& r) {
  ordered_json j;
  j["epoch"] = r.epoch;
  j["loss_total"] = r.loss_total;
  j["loss_L1"] = r.loss_l1;
  j["loss_L2"] = r.loss_l2;
  j["gmm_loglik"] = r.gmm_loglik ? ordered_json(*r.gmm_loglik) : ordered_json(nullptr);
  j["estep_seconds"] = r.estep_seconds;
  j["mstep_seconds"] = r.mstep_seconds;
  return j;
}

ordered_json report_json(const RetrievalReport& r, bool self_excluded) {
  ordered_json j;
  j["map_at_k"] = r.map_at_k;
  j["k"] = r.k;
  j["query_count"] = r.query_count;
  j["database_count"] = r.database_count;
  j["self_excluded"] = self_excluded;
  ordered_json pk = ordered_json::array();
  for (const auto& [k, p] : r.precision_at_k) pk.push_back({{"k", k}, {"precision", p}});
  j["precision_at_k"] = pk;
  ordered_json pr = ordered_json::array();
  for (const auto& [rec, prec] : r.pr_curve) pr.push_back({{"recall", rec}, {"precision", prec}});
  j["pr_curve"] = pr;
  return j;
}

/// Shortest text that reads back to the same double.
std::string csv_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Report JSON at `path`, curves next to it as <stem>_pr.csv and <stem>_precision.csv.
void write_report(const std::string& path, const RetrievalReport& r, bool self_excluded) {
  io::write_text(path, report_json(r, self_excluded).dump(2) + "\n");
  const fs::path p(path);
  const fs::path stem = p.parent_path() / p.stem();
  std::string pr = "recall,precision\n";
  for (const auto& [rec, prec] : r.pr_curve) pr += csv_number(rec) + "," + csv_number(prec) + "\n";
  io::write_text(stem.string() + "_pr.csv", pr);
  std::string pk = "k,precision\n";
  for (const auto& [k, prec] : r.precision_at_k) pk += std::to_string(k) + "," + csv_number(prec) + "\n";
  io::write_text(stem.string() + "_precision.csv", pk);
}

LabelSet load_labels(const std::string& path, std::size_t expected_rows, std::size_t classes = 0) {
  const auto lists = io::read_label_lists(path);
  if (lists.size() != expected_rows) {
    throw ContractError(path + ": " + std::to_string(lists.size()) + " label lines for " +
                        std::to_string(expected_rows) + " samples");
  }
  return LabelSet::from_lists(lists, classes);
}

std::size_t max_class(const std::vector<std::vector<int>>& lists) {
  std::size_t c = 0;
  for (const auto& row : lists)
    for (int v : row) c = std::max(c, static_cast<std::size_t>(v) + 1);
  return c;
}

RunConfig load_config(const std::string& path) { return path.empty() ? RunConfig{} : RunConfig::load(path); }

TrainResult train_with_log(const Matrix& features, const TrainConfig& cfg, const std::string& log_path) {
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::binary | std::ios::trunc);
    if (!log) throw FormatError(log_path, 0, "cannot open log for writing");
  }
  const EpochObserver observer = [&](const EpochRecord& r) {
    if (log.is_open()) log << epoch_json(r).dump() << '\n' << std::flush;
  };
  try {
    return run_em(features, cfg, observer);
  } catch (const DivergenceError& e) {
    if (!log_path.empty()) {
      ordered_json dump;
      dump["epoch"] = e.epoch();
      dump["batch"] = e.batch();
      dump["loss"] = std::isfinite(e.loss()) ? ordered_json(e.loss()) : ordered_json(nullptr);
      dump["indices"] = e.indices();
      io::write_text(log_path + ".divergence.json", dump.dump(2) + "\n");
    }
    throw;
  }
}

// -- subcommands -------------------------------------------------------------

struct TrainArgs {
  std::string features, config, out, log;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config);
  const std::string features_path = a.features.empty() ? cfg.features : a.features;
  if (features_path.empty()) throw ContractError("train: no feature file given");
  const Matrix features = io::read_features(features_path);
  const TrainResult result = train_with_log(features, cfg.train, a.log);
  io::write_model(a.out, result.model);
  out << "trained " << cfg.train.epochs << " epochs on " << features.rows() << " samples -> " << a.out << "\n";
  return kExitOk;
}

struct EncodeArgs {
  std::string model, features, out;
};

int cmd_encode(const EncodeArgs& a, std::ostream& out) {
  const HashModel model = io::read_model(a.model);
  const Matrix features = io::read_features(a.features);
  if (features.cols() != model.input_dim()) {
    throw ContractError(a.features + ": feature dimension " + std::to_string(features.cols()) +
                        " does not match model input " + std::to_string(model.input_dim()));
  }
  const BinaryCodes codes = encode_binary(model, features);
  io::write_codes(a.out, codes);
  out << "encoded " << codes.size() << " x " << codes.code_length() << " bits -> " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string query_codes, query_labels, db_codes, db_labels, out;
  std::size_t k = 5000;
  std::vector<std::size_t> precision_k{100, 500, 1000, 5000};
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const BinaryCodes qc = io::read_codes(a.query_codes);
  const BinaryCodes dc = io::read_codes(a.db_codes);
  if (qc.code_length() != dc.code_length()) {
    throw ContractError("eval: code length mismatch (" + a.query_codes + ": " + std::to_string(qc.code_length()) +
                        ", " + a.db_codes + ": " + std::to_string(dc.code_length()) + ")");
  }
  const auto ql_lists = io::read_label_lists(a.query_labels);
  const auto dl_lists = io::read_label_lists(a.db_labels);
  const std::size_t classes = std::max(max_class(ql_lists), max_class(dl_lists));
  const LabelSet ql = load_labels(a.query_labels, qc.size(), classes);
  const LabelSet dl = load_labels(a.db_labels, dc.size(), classes);

  EvalOptions opts;
  opts.map_k = a.k;
  opts.precision_ks = a.precision_k;
  opts.exclude_self = io::files_identical(a.query_codes, a.db_codes);
  const RetrievalReport report = evaluate({qc, ql}, {dc, dl}, opts);
  write_report(a.out, report, opts.exclude_self);
  out << "MAP@" << a.k << " = " << report.map_at_k << (opts.exclude_self ? " (self excluded)" : "") << "\n";
  return kExitOk;
}

struct StructureArgs {
  std::string model, features, config, out;
  bool covariances = false;
  std::size_t top = 5;
};

int cmd_structure(const StructureArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config);
  const HashModel model = io::read_model(a.model);
  const Matrix features = io::read_features(a.features);
  const CodeMatrix codes = encode_relaxed(model, features);
  StructureOptions sopts;
  sopts.gmm.diagonal = cfg.train.diagonal_covariance;
  const ComponentStructure s =
      build_structure(codes, cfg.train.m1, cfg.train.m2, derive_seed(cfg.train.seed, SeedStream::Gmm), sopts);

  auto rows = [](const Matrix& m) {
    ordered_json arr = ordered_json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
      arr.push_back(row);
    }
    return arr;
  };
  ordered_json doc;
  doc["n"] = codes.rows();
  doc["r"] = codes.cols();
  doc["m1"] = cfg.train.m1;
  doc["m2"] = cfg.train.m2;
  doc["gmm_loglik"] = s.fine.final_loglik();
  doc["gmm_iterations"] = s.fine.iterations;
  ordered_json fine;
  fine["priors"] = std::vector<double>(s.fine.priors.data(), s.fine.priors.data() + s.fine.priors.size());
  fine["means"] = rows(s.fine.means);
  if (a.covariances) {
    ordered_json covs = ordered_json::array();
    for (const Matrix& c : s.fine.covariances) covs.push_back(rows(c));
    fine["covariances"] = covs;
  }
  doc["fine"] = fine;
  ordered_json coarse;
  coarse["priors"] = std::vector<double>(s.coarse.priors.data(), s.coarse.priors.data() + s.coarse.priors.size());
  coarse["means"] = rows(s.coarse.means);
  coarse["membership"] = s.coarse.membership;
  doc["coarse"] = coarse;

  ordered_json top = ordered_json::array();
  const auto k = static_cast<Index>(std::min<std::size_t>(a.top, static_cast<std::size_t>(s.fine_assign.cols())));
  for (Index i = 0; i < s.fine_assign.rows(); ++i) {
    std::vector<Index> idx(static_cast<std::size_t>(s.fine_assign.cols()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index x, Index y) { return s.fine_assign(i, x) > s.fine_assign(i, y); });
    ordered_json entry = ordered_json::array();
    for (Index t = 0; t < k; ++t) {
      entry.push_back({{"component", idx[static_cast<std::size_t>(t)]},
                       {"p", s.fine_assign(i, idx[static_cast<std::size_t>(t)])}});
    }
    top.push_back(entry);
  }
  doc["top_fine_assignments"] = top;
  io::write_text(a.out, doc.dump(2) + "\n");
  out << "structure: " << cfg.train.m1 << " fine / " << cfg.train.m2 << " coarse components -> " << a.out << "\n";
  return kExitOk;
}

struct SweepArgs {
  std::string features, config, grid, out;
  double m1_scale = 0.01;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config);
  const std::string features_path = a.features.empty() ? cfg.features : a.features;
  if (features_path.empty()) throw ContractError("sweep: no feature file given");
  if (cfg.labels.empty()) throw ContractError("sweep: config must name 'labels' for evaluation");

  std::vector<Index> m1s;
  std::vector<double> gammas{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> lambdas{cfg.train.lambda};
  if (!a.grid.empty()) {
    const std::string text = io::read_text(a.grid);
    nlohmann::json g;
    try {
      g = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(a.grid, e.byte, e.what());
    }
    for (const auto& [key, value] : g.items()) {
      if (key != "m1" && key != "gamma" && key != "lambda") throw ContractError(a.grid + ": unknown grid key '" + key + "'");
    }
    try {
      if (g.contains("m1")) m1s = g["m1"].get<std::vector<Index>>();
      if (g.contains("gamma")) gammas = g["gamma"].get<std::vector<double>>();
      if (g.contains("lambda")) lambdas = g["lambda"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ContractError(a.grid + ": " + e.what());
    }
  }
  if (m1s.empty()) {
    for (Index base : {100, 500, 1000, 1500, 2000}) {
      m1s.push_back(std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(base) * a.m1_scale))));
    }
  }

  const Matrix train = io::read_features(features_path);
  const auto train_lists = io::read_label_lists(cfg.labels);
  const bool own_queries = !cfg.query_features.empty();
  Matrix queries;
  std::vector<std::vector<int>> query_lists;
  if (own_queries) {
    if (cfg.query_labels.empty()) throw ContractError("sweep: query_features given without query_labels");
    queries = io::read_features(cfg.query_features);
    query_lists = io::read_label_lists(cfg.query_labels);
  }
  const std::size_t classes = std::max(max_class(train_lists), max_class(query_lists));
  const LabelSet train_labels = load_labels(cfg.labels, static_cast<std::size_t>(train.rows()), classes);
  const LabelSet query_labels =
      own_queries ? load_labels(cfg.query_labels, static_cast<std::size_t>(queries.rows()), classes) : train_labels;

  fs::create_directories(a.out);
  std::string csv = "m1,gamma,m2,lambda,map,status\n";
  std::size_t run = 0, failed = 0;
  for (Index m1 : m1s) {
    for (double gamma : gammas) {
      for (double lambda : lambdas) {
        const Index m2 = std::max<Index>(1, static_cast<Index>(std::llround(gamma * static_cast<double>(m1))));
        TrainConfig t = cfg.train;
        t.m1 = m1;
        t.m2 = m2;
        t.lambda = lambda;
        std::string map_cell, status = "ok";
        try {
          EvalOptions eval = cfg.eval_options();
          RetrievalReport report;
          if (own_queries) {
            report = ablation_run(train, train_labels, queries, query_labels, t, t.variant, eval);
          } else {
            eval.exclude_self = true;
            t.validate();
            const TrainResult trained = run_em(train, t);
            report = evaluate({trained.codes, train_labels}, {trained.codes, train_labels}, eval);
          }
          map_cell = csv_number(report.map_at_k);
          write_report((fs::path(a.out) / ("run_" + std::to_string(run) + ".json")).string(), report, !own_queries);
        } catch (const std::exception& e) {
          status = std::string("failed: ") + e.what();
          for (char& ch : status)
            if (ch == ',' || ch == '\n') ch = ';';
          ++failed;
        }
        csv += std::to_string(m1) + "," + csv_number(gamma) + "," + std::to_string(m2) + "," + csv_number(lambda) +
               "," + map_cell + "," + status + "\n";
        out << "run " << run << ": m1=" << m1 << " m2=" << m2 << " lambda=" << lambda << " -> "
            << (map_cell.empty() ? status : map_cell) << "\n";
        ++run;
      }
    }
  }
  io::write_text((fs::path(a.out) / "sweep.csv").string(), csv);
  out << run << " runs, " << failed << " failed -> " << (fs::path(a.out) / "sweep.csv").string() << "\n";
  return kExitOk;
}

struct SynthArgs {
  SynthParams params;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SyntheticData data = make_gaussian_clusters(a.params);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  auto lists = [](const std::vector<int>& labels) {
    std::vector<std::vector<int>> l;
    for (int c : labels) l.push_back({c});
    return l;
  };
  io::write_features((dir / "train.feat").string(), data.train);
  io::write_label_lists((dir / "train.labels").string(), lists(data.train_labels));
  io::write_features((dir / "query.feat").string(), data.queries);
  io::write_label_lists((dir / "query.labels").string(), lists(data.query_labels));
  out << "synth: " << a.params.clusters << " clusters, " << a.params.train << " train / " << a.params.queries
      << " query samples in d=" << a.params.dim << " -> " << a.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic-component hashing: train, encode, evaluate, inspect"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a hash model with the EM loop");
  t->add_option("--features", train.features, "DSCHFEAT training features (defaults to config 'features')");
  t->add_option("--config", train.config, "JSON run configuration");
  t->add_option("--out", train.out, "Output DSCHMODL model file")->required();
  t->add_option("--log", train.log, "Output JSON-lines training log");

  EncodeArgs encode;
  auto* e = app.add_subcommand("encode", "Encode features to packed binary codes");
  e->add_option("--model", encode.model)->required();
  e->add_option("--features", encode.features)->required();
  e->add_option("--out", encode.out, "Output DSCHCODE file")->required();

  EvalArgs eval;
  auto* v = app.add_subcommand("eval", "Hamming-ranking evaluation");
  v->add_option("--query-codes", eval.query_codes)->required();
  v->add_option("--query-labels", eval.query_labels)->required();
  v->add_option("--db-codes", eval.db_codes)->required();
  v->add_option("--db-labels", eval.db_labels)->required();
  v->add_option("--k", eval.k, "MAP depth")->capture_default_str();
  v->add_option("--precision-k", eval.precision_k, "Depths for precision@K")->delimiter(',');
  v->add_option("--out", eval.out, "Output report JSON")->required();

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Grid over (m1, gamma, lambda) with m2 = round(gamma * m1)");
  s->add_option("--features", sweep.features);
  s->add_option("--config", sweep.config);
  s->add_option("--grid", sweep.grid, "JSON grid {\"m1\": [...], \"gamma\": [...], \"lambda\": [...]}");
  s->add_option("--m1-scale", sweep.m1_scale, "Scale for the default m1 grid")->capture_default_str();
  s->add_option("--out", sweep.out, "Output directory")->required();

  StructureArgs structure;
  auto* st = app.add_subcommand("structure", "Dump the component structure of encoded features");
  st->add_option("--model", structure.model)->required();
  st->add_option("--features", structure.features)->required();
  st->add_option("--config", structure.config);
  st->add_option("--out", structure.out)->required();
  st->add_flag("--with-covariances", structure.covariances);
  st->add_option("--top", structure.top, "Fine assignments listed per sample")->capture_default_str();

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Generate Gaussian-cluster fixtures");
  sy->add_option("--clusters", synth.params.clusters)->capture_default_str();
  sy->add_option("--n", synth.params.train, "Training samples")->capture_default_str();
  sy->add_option("--queries", synth.params.queries)->capture_default_str();
  sy->add_option("--d", synth.params.dim)->capture_default_str();
  sy->add_option("--sigma", synth.params.sigma)->capture_default_str();
  sy->add_option("--seed", synth.params.seed)->capture_default_str();
  sy->add_option("--out-dir", synth.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*t) return cmd_train(train, out);
    if (*e) return cmd_encode(encode, out);
    if (*v) return cmd_eval(eval, out);
    if (*s) return cmd_sweep(sweep, out);
    if (*st) return cmd_structure(structure, out);
    if (*sy) return cmd_synth(synth, out);
  } catch (const FormatError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  } catch (const ContractError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  } catch (const NumericError& ex) {
    err << "numeric failure: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace dsch::cli
