// JSON text crosses the boundary for structured values; the Python package decodes it.
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "metsfuse/cohort/io.hpp"
#include "metsfuse/cohort/labeler.hpp"
#include "metsfuse/cohort/split.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/eval/cross_validate.hpp"
#include "metsfuse/eval/metrics.hpp"
#include "metsfuse/explain/lime.hpp"
#include "metsfuse/explain/pfi.hpp"
#include "metsfuse/models/fusion.hpp"
#include "metsfuse/models/loss.hpp"
#include "metsfuse/synth/generator.hpp"

namespace py = pybind11;
using namespace metsfuse;
using nlohmann::json;

namespace {

std::vector<cohort::DailyRecord> records_of(const std::string& text) {
  std::vector<cohort::DailyRecord> out;
  for (const auto& r : json::parse(text)) out.push_back(cohort::record_from_json(r));
  return out;
}

std::string records_text(std::span<const cohort::DailyRecord> records) {
  json a = json::array();
  for (const auto& r : records) a.push_back(cohort::to_json(r));
  return a.dump();
}

std::string generate(const std::string& spec_json) {
  auto spec = spec_json.empty() ? synth::CohortSpec{} : synth::CohortSpec::parse(spec_json);
  auto c = synth::generate(spec);
  json panels = json::array();
  for (const auto& p : c.panels) panels.push_back(cohort::to_json(p));
  return json{{"panels", panels}, {"records", json::parse(records_text(c.records))}}.dump();
}

std::string label_mets(const std::string& panel_json) {
  auto panel = cohort::panel_from_json(json::parse(panel_json));
  panel.validate();
  auto l = cohort::label_mets(panel);
  return json{{"is_mets", l.is_mets},
              {"count", l.count()},
              {"adiposity", l.criteria[0]},
              {"glycemia", l.criteria[1]},
              {"blood_pressure", l.criteria[2]},
              {"lipids", l.criteria[3]}}
      .dump();
}

std::string split(const std::string& records_json, const cohort::SubjectLabels& labels, double test_fraction, int k,
                  std::uint64_t seed, const std::string& mode) {
  if (mode != "subject" && mode != "record") throw ConfigError("mode must be \"subject\" or \"record\"");
  auto records = records_of(records_json);
  auto m = mode == "subject" ? cohort::SplitMode::Subject : cohort::SplitMode::Record;
  return cohort::split(records, labels, test_fraction, k, seed, m).to_json().dump();
}

std::string cross_validate(const std::string& records_json, const cohort::SubjectLabels& labels,
                           const std::string& plan_json, const std::string& architecture,
                           const std::string& hyperparams_json, const std::string& encoder_json, double target_ratio,
                           const std::vector<std::string>& features, std::size_t jobs) {
  auto records = records_of(records_json);
  eval::CvConfig cfg;
  cfg.architecture = models::parse_architecture(architecture);
  if (!hyperparams_json.empty()) cfg.hp = models::HyperParams::from_json(json::parse(hyperparams_json));
  if (!encoder_json.empty()) corpus::from_json(json::parse(encoder_json), cfg.encoder);
  cfg.target_ratio = target_ratio;
  if (!features.empty()) {
    std::vector<cohort::PhysioFeature> fs;
    for (const auto& f : features) fs.push_back(cohort::parse_physio_feature(f));
    cfg.features = cohort::make_feature_spec(fs);
  }
  cfg.jobs = jobs;
  auto plan = cohort::SplitPlan::from_json(json::parse(plan_json));
  py::gil_scoped_release release;
  return eval::cross_validate(records, labels, plan, cfg).to_json().dump();
}

std::string lime_text(const explain::TextClassifier& classify, const std::string& text, std::size_t samples,
                      double kernel_width, double ridge, std::uint64_t seed) {
  explain::LimeConfig cfg{samples, kernel_width, ridge, seed};
  return explain::lime_text(classify, text, cfg).to_json().dump();
}

class Model {
 public:
  explicit Model(std::unique_ptr<models::FusionModel> m) : m_(std::move(m)) {}
  static Model load(const std::string& path) { return Model(models::FusionModel::load(path)); }

  std::string architecture() const { return std::string(models::to_string(m_->architecture())); }
  std::size_t parameter_count() const { return m_->parameter_count(); }
  std::string hyperparams() const { return m_->hyperparams().to_json().dump(); }

  std::vector<double> predict(const std::string& records_json) const {
    auto records = records_of(records_json);
    std::vector<int> unused(records.size(), 0);
    return m_->predict(m_->prepare(records, unused));
  }

  std::string pfi(const std::string& records_json, const std::vector<int>& labels, std::size_t repetitions,
                  std::uint64_t seed) const {
    auto records = records_of(records_json);
    explain::PfiConfig cfg;
    cfg.repetitions = repetitions;
    cfg.seed = seed;
    py::gil_scoped_release release;
    return explain::pfi(*m_, records, labels, cfg).to_json().dump();
  }

 private:
  std::shared_ptr<models::FusionModel> m_;
};

}  // namespace

PYBIND11_MODULE(_metsfuse, m) {
  m.doc() = "Bindings for the metsfuse library";
#ifdef METSFUSE_VERSION
  m.attr("__version__") = METSFUSE_VERSION;
#endif

  auto value_error = py::handle(PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", value_error);
  py::register_exception<ConfigError>(m, "ConfigError", value_error);
  py::register_exception<ShapeError>(m, "ShapeError", value_error);
  py::register_exception<LeakageError>(m, "LeakageError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("default_spec", [] { return synth::CohortSpec{}.to_json().dump(); });
  m.def("generate", &generate, py::arg("spec_json") = "");
  m.def("label_mets", &label_mets, py::arg("panel_json"));
  m.def("split", &split, py::arg("records_json"), py::arg("labels"), py::arg("test_fraction") = 0.25,
        py::arg("k") = 3, py::arg("seed") = 0, py::arg("mode") = "subject");
  m.def("cross_validate", &cross_validate, py::arg("records_json"), py::arg("labels"), py::arg("plan_json"),
        py::arg("architecture") = "TS_HCL", py::arg("hyperparams_json") = "", py::arg("encoder_json") = "",
        py::arg("target_ratio") = 0.5, py::arg("features") = std::vector<std::string>{}, py::arg("jobs") = 1);

  m.def("auroc", [](const std::vector<double>& s, const std::vector<int>& y) { return eval::auroc(s, y); });
  m.def("auroc_trapezoid",
        [](const std::vector<double>& s, const std::vector<int>& y) { return eval::auroc_trapezoid(s, y); });
  m.def(
      "evaluate",
      [](const std::vector<double>& s, const std::vector<int>& y, double threshold) {
        return eval::evaluate(s, y, threshold).to_json().dump();
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
  m.def(
      "contrastive_loss",
      [](const std::vector<double>& zi, const std::vector<double>& zj, int yi, int yj, double epsilon,
         bool classical) { return models::contrastive_loss(zi, zj, yi, yj, epsilon, classical); },
      py::arg("zi"), py::arg("zj"), py::arg("yi"), py::arg("yj"), py::arg("epsilon") = 0.5,
      py::arg("classical") = false);

  m.def("lime_text", &lime_text, py::arg("classify"), py::arg("text"), py::arg("samples") = 1000,
        py::arg("kernel_width") = 0.75, py::arg("ridge") = 1e-3, py::arg("seed") = 0);

  py::class_<Model>(m, "Model")
      .def_static("load", &Model::load, py::arg("path"))
      .def_property_readonly("architecture", &Model::architecture)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("hyperparams_json", &Model::hyperparams)
      .def("predict", &Model::predict, py::arg("records_json"))
      .def("pfi", &Model::pfi, py::arg("records_json"), py::arg("labels"), py::arg("repetitions") = 50,
           py::arg("seed") = 0);
}
