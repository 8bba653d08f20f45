#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "seqpoison/attack.hpp"
#include "seqpoison/dataset.hpp"
#include "seqpoison/error.hpp"
#include "seqpoison/eval.hpp"
#include "seqpoison/experiment.hpp"
#include "seqpoison/influence.hpp"
#include "seqpoison/model.hpp"
#include "seqpoison/oracle.hpp"
#include "seqpoison/trainer.hpp"

namespace py = pybind11;
using namespace seqpoison;

namespace {

std::vector<Sequence> corpus_items(const Corpus& c) {
  std::vector<Sequence> out;
  out.reserve(c.sequences.size());
  for (const auto& s : c.sequences) out.push_back(s.items);
  return out;
}

Corpus make_corpus(const std::vector<Sequence>& seqs, int item_count) {
  Corpus c;
  c.item_count = item_count;
  for (std::size_t u = 0; u < seqs.size(); ++u) {
    c.sequences.push_back({static_cast<UserId>(u), seqs[u]});
    c.user_labels.push_back(std::to_string(u));
  }
  return c;
}

py::dict report_dict(const MetricsReport& r) {
  return py::module_::import("json").attr("loads")(report_to_json(r).dump());
}

}  // namespace

PYBIND11_MODULE(_seqpoison, m) {
  m.doc() = "Decayed-bag sequential recommender with influence-guided poisoning attacks";
  m.attr("__version__") = "0.1.0";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<ConditioningError>(m, "ConditioningError", base.ptr());
  py::register_exception<ContractionError>(m, "ContractionError", base.ptr());
  py::register_exception<RefusalError>(m, "RefusalError", base.ptr());
  py::register_exception<EmptyReportError>(m, "EmptyReportError", base.ptr());

  py::class_<SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init<>())
      .def_readwrite("n_users", &SyntheticConfig::n_users)
      .def_readwrite("n_items", &SyntheticConfig::n_items)
      .def_readwrite("n_clusters", &SyntheticConfig::n_clusters)
      .def_readwrite("seq_len_mean", &SyntheticConfig::seq_len_mean)
      .def_readwrite("in_cluster_prob", &SyntheticConfig::in_cluster_prob)
      .def_readwrite("seed", &SyntheticConfig::seed);

  py::class_<SplitDataset>(m, "SplitDataset")
      .def(py::init([](const std::vector<Sequence>& seqs, int item_count) {
             return split_leave_two(make_corpus(seqs, item_count));
           }),
           py::arg("sequences"), py::arg("item_count"))
      .def_readonly("train", &SplitDataset::train)
      .def_readonly("valid_item", &SplitDataset::valid_item)
      .def_readonly("test_item", &SplitDataset::test_item)
      .def_property_readonly("popularity", [](const SplitDataset& d) { return d.catalog.popularity; })
      .def_property_readonly("user_count", &SplitDataset::user_count)
      .def_property_readonly("item_count", &SplitDataset::item_count);

  m.def(
      "generate_synthetic",
      [](const SyntheticConfig& c) {
        const Corpus corpus = generate_synthetic(c);
        return py::make_tuple(corpus_items(corpus), corpus.item_count);
      },
      py::arg("config"), "Returns (sequences, item_count).");
  m.def(
      "parse_sequences",
      [](const std::string& text) {
        const Corpus corpus = parse_sequences(text);
        return py::make_tuple(corpus_items(corpus), corpus.item_count);
      },
      py::arg("text"));
  m.def(
      "format_sequences",
      [](const std::vector<Sequence>& seqs, int item_count) { return format_sequences(make_corpus(seqs, item_count)); },
      py::arg("sequences"), py::arg("item_count"));
  m.def(
      "popularity_buckets",
      [](const SplitDataset& d) {
        const auto b = popularity_buckets(d);
        py::dict out;
        out["head"] = b.head;
        out["middle"] = b.middle;
        out["tail"] = b.tail;
        return out;
      },
      py::arg("dataset"));

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<int, int, double, ParamVector>(), py::arg("items"), py::arg("dim"), py::arg("decay"),
           py::arg("values"))
      .def_property_readonly("item_count", &ModelParams::item_count)
      .def_property_readonly("dim", &ModelParams::dim)
      .def_property_readonly("decay", &ModelParams::decay)
      .def_property_readonly("values", [](const ModelParams& p) { return p.values(); })
      .def_property_readonly("in_embed", [](const ModelParams& p) { return RowMatrix(p.in_embed()); })
      .def_property_readonly("out_embed", [](const ModelParams& p) { return RowMatrix(p.out_embed()); })
      .def("with_values", &ModelParams::with_values, py::arg("values"))
      .def("__eq__", [](const ModelParams& a, const ModelParams& b) { return a == b; });

  m.def("init_params", &init_params, py::arg("items"), py::arg("dim"), py::arg("scale"), py::arg("decay"),
        py::arg("seed"));
  m.def(
      "logits", [](const ModelParams& p, const Sequence& seq, std::size_t t) { return logits(p, seq, t); },
      py::arg("params"), py::arg("seq"), py::arg("t"));
  m.def(
      "sequence_loss", [](const ModelParams& p, const Sequence& seq) { return sequence_loss(p, seq); },
      py::arg("params"), py::arg("seq"));
  m.def(
      "loss_gradient", [](const ModelParams& p, const Sequence& seq) { return loss_gradient(p, seq); },
      py::arg("params"), py::arg("seq"));
  m.def("hvp", &hvp, py::arg("params"), py::arg("seqs"), py::arg("v"));
  m.def("dense_hessian", &dense_hessian, py::arg("params"), py::arg("seqs"), py::arg("cap") = kDenseParamCap);
  m.def(
      "encode_checkpoint", [](const ModelParams& p) { return py::bytes(encode_checkpoint(p)); }, py::arg("params"));
  m.def(
      "decode_checkpoint", [](const py::bytes& b) { return decode_checkpoint(std::string(b)); }, py::arg("data"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("tolerance", &TrainConfig::tolerance)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay);

  m.def(
      "train",
      [](const SplitDataset& d, const ModelParams& init, const TrainConfig& c) {
        const TrainResult r = train(d, init, c);
        py::list log;
        for (const auto& e : r.log) log.append(py::make_tuple(e.epoch, e.mean_train_loss, e.grad_norm));
        return py::make_tuple(r.params, log);
      },
      py::arg("dataset"), py::arg("init"), py::arg("config"), "Returns (params, [(epoch, loss, grad_norm), ...]).");

  m.def("attack_loss", &attack_loss, py::arg("params"), py::arg("dataset"), py::arg("target"));
  m.def("attack_loss_grad", &attack_loss_grad, py::arg("params"), py::arg("dataset"), py::arg("target"));
  m.def("damped_solve", &damped_solve, py::arg("hessian"), py::arg("s"), py::arg("damping"));
  m.def("influence_score", &influence_score, py::arg("grad_diff"), py::arg("stilde"));
  m.def("candidate_grad_diff", &candidate_grad_diff, py::arg("params"), py::arg("x_u"), py::arg("x_pol"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static("parse", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def("set", &set_config_value, py::arg("key"), py::arg("value"))
      .def("validate", &ExperimentConfig::validate)
      .def_readwrite("seed", &ExperimentConfig::seed);

  m.def(
      "run_attack",
      [](const std::string& method, const ModelParams& theta_hat, const SplitDataset& d, ItemId target, int K,
         const ExperimentConfig& cfg) {
        const PollutedDataset p = run_attack(method, theta_hat, d, attack_config(cfg, target, K, theta_hat, d), cfg.target_prob);
        return py::make_tuple(p.sequences, format_injection_log(p));
      },
      py::arg("method"), py::arg("theta_hat"), py::arg("dataset"), py::arg("target"), py::arg("K"),
      py::arg("config") = ExperimentConfig{}, "Returns (polluted training prefixes, injection-log CSV).");

  m.def("rank_in_scores", &rank_in_scores, py::arg("scores"), py::arg("item"));
  m.def(
      "target_metrics",
      [](const ModelParams& p, const SplitDataset& d, ItemId target, const std::vector<int>& cutoffs,
         bool exclude_interacted) { return report_dict(target_metrics(p, d, target, cutoffs, exclude_interacted)); },
      py::arg("params"), py::arg("dataset"), py::arg("target"), py::arg("cutoffs"),
      py::arg("exclude_interacted") = true);
  m.def(
      "rec_metrics",
      [](const ModelParams& p, const SplitDataset& d, const std::vector<int>& cutoffs, const std::string& split) {
        if (split != "valid" && split != "test") throw ArgumentError("split must be 'valid' or 'test'");
        return report_dict(rec_metrics(p, d, cutoffs, split == "valid" ? HeldOut::Valid : HeldOut::Test));
      },
      py::arg("params"), py::arg("dataset"), py::arg("cutoffs"), py::arg("split") = "test");

  m.def(
      "fd_gradient",
      [](const ModelParams& p, const Sequence& seq, double step) { return oracle::fd_gradient(p, seq, step); },
      py::arg("params"), py::arg("seq"), py::arg("step") = oracle::kDefaultStep);
  m.def("spearman", &oracle::spearman, py::arg("a"), py::arg("b"));

  m.def("cmd_gen_data", &cmd_gen_data, py::arg("config"), py::arg("out"));
  m.def("cmd_train", &cmd_train, py::arg("config"), py::arg("out"));
  m.def("cmd_attack", &cmd_attack, py::arg("config"), py::arg("out"));
  m.def("cmd_evaluate", &cmd_evaluate, py::arg("config"), py::arg("out"));
  m.def(
      "cmd_sweep",
      [](const ExperimentConfig& c, const std::filesystem::path& out, const std::string& axis,
         const std::vector<double>& values) { return cmd_sweep(c, out, parse_axis(axis), values); },
      py::arg("config"), py::arg("out"), py::arg("axis"), py::arg("values"));
}
