// Python bindings. Structured values cross the boundary as JSON text; the
// gensim_engine package turns them into dicts.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gensim/correction.hpp"
#include "gensim/error.hpp"
#include "gensim/experiments.hpp"
#include "gensim/service.hpp"
#include "gensim/simulation.hpp"

namespace py = pybind11;
using namespace gensim;
using nlohmann::json;

namespace {

std::string events_json(const Simulation& sim, std::uint64_t after, std::size_t limit) {
  std::string out = "[";
  for (const auto& e : sim.events().since(after, limit)) {
    if (out.size() > 1) out += ',';
    out += e.to_json_line();
  }
  return out + "]";
}

json oracle_label(Simulation& sim, FeedbackStore& store, std::size_t sample, double revise_below) {
  OracleJudge oracle;
  EvaluateOptions options;
  options.sample = sample;
  options.seed = sim.config().seed;
  options.lanes = sim.config().workers;
  const auto events = sim.events().all();
  FeedbackStore scored;
  auto series = evaluate_rounds(events, JudgeConfig{}, oracle, options, &scored);
  JudgeConfig reviser{JudgeConfig::default_rubric(), JudgeMode::revise};
  for (const auto& fb : scored.scores()) {
    store.add_score(fb);
    if (fb.s >= revise_below) continue;
    try {
      judge_revise(*sim.events().at(fb.event_seq), reviser, oracle, &store);
    } catch (const ConflictError&) {
    }
  }
  json out = json::array();
  for (const auto& r : series) out.push_back(r.to_json());
  return out;
}

}  // namespace

PYBIND11_MODULE(_gensim, m) {
  m.doc() = "gensim simulation engine";

  // Later registrations are tried first, so subclasses follow their bases.
  auto& base = py::register_exception<Error>(m, "GensimError");
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<NotFoundError>(m, "NotFoundError", base);
  py::register_exception<ConflictError>(m, "ConflictError", base);
  auto& backend = py::register_exception<BackendError>(m, "BackendError", base);
  py::register_exception<TransportError>(m, "TransportError", backend);
  py::register_exception<ProtocolError>(m, "ProtocolError", backend);

  py::class_<Simulation>(m, "Simulation")
      .def(py::init([](const std::string& config) {
             return std::make_unique<Simulation>(SimulationConfig::from_json(json::parse(config)));
           }),
           py::arg("config_json"))
      .def_static(
          "restore",
          [](const std::string& path, std::optional<std::string> event_log) {
            return Simulation::restore(path, nullptr, std::move(event_log));
          },
          py::arg("path"), py::arg("event_log") = py::none())
      .def(
          "run_round", [](Simulation& s) { return s.run_round().to_json().dump(); },
          py::call_guard<py::gil_scoped_release>())
      .def(
          "run",
          [](Simulation& s, std::optional<std::uint64_t> rounds) {
            json out = json::array();
            for (const auto& r : s.run(rounds)) out.push_back(r.to_json());
            return out.dump();
          },
          py::arg("rounds") = py::none(), py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("current_round", &Simulation::current_round)
      .def_property_readonly("finished", &Simulation::finished)
      .def_property_readonly("agent_count", &Simulation::agent_count)
      .def("config_json", [](const Simulation& s) { return s.config().to_json().dump(); })
      .def("events_json", &events_json, py::arg("after") = 0, py::arg("limit") = 0)
      .def("checkpoint", [](const Simulation& s, const std::string& path) { s.checkpoint(path); })
      .def("submit_intervention",
           [](Simulation& s, const std::string& j) { s.submit_intervention(Intervention::from_json(json::parse(j))); })
      .def(
          "interview",
          [](Simulation& s, std::uint64_t id, const std::string& q) { return s.interview(AgentId{id}, q).to_json().dump(); },
          py::call_guard<py::gil_scoped_release>())
      .def("search", [](const Simulation& s, const std::string& q) {
        json out = json::array();
        for (const auto& p : s.search(q)) out.push_back(p.to_json());
        return out.dump();
      });

  py::class_<FeedbackStore>(m, "FeedbackStore")
      .def(py::init<>())
      .def(
          "add_score",
          [](FeedbackStore& st, const Simulation& sim, std::uint64_t seq, double s) {
            auto e = sim.events().at(seq);
            if (!e) throw NotFoundError("event_seq " + std::to_string(seq) + " not found");
            st.add_score({seq, e->q, e->a, s, FeedbackSource::human});
          },
          py::arg("sim"), py::arg("event_seq"), py::arg("s"))
      .def(
          "add_revision",
          [](FeedbackStore& st, const Simulation& sim, std::uint64_t seq, const std::string& a_prime) {
            auto e = sim.events().at(seq);
            if (!e) throw NotFoundError("event_seq " + std::to_string(seq) + " not found");
            st.add_revision({seq, e->q, a_prime, FeedbackSource::human}, e->a);
          },
          py::arg("sim"), py::arg("event_seq"), py::arg("a_prime"))
      .def_property_readonly("score_count", &FeedbackStore::score_count)
      .def_property_readonly("revision_count", &FeedbackStore::revision_count)
      .def("export_sft", [](const FeedbackStore& st, const std::string& path) { return export_sft_dataset(st.revisions(), path); })
      .def("export_reward",
           [](const FeedbackStore& st, const std::string& path) { return export_reward_dataset(st.scores(), path); });

  m.def(
      "oracle_label",
      [](Simulation& sim, FeedbackStore& store, std::size_t sample, double revise_below) {
        py::gil_scoped_release release;
        return oracle_label(sim, store, sample, revise_below).dump();
      },
      py::arg("sim"), py::arg("store"), py::arg("sample") = 100, py::arg("revise_below") = 5.0);

  m.def(
      "validate_dataset",
      [](const std::string& path, const std::string& kind) { return validate_dataset(path, dataset_kind_from_string(kind)); },
      py::arg("path"), py::arg("kind"));

  m.def(
      "trigger_external_finetune",
      [](const std::string& path, const std::string& endpoint, const std::string& method) {
        return trigger_external_finetune(path, endpoint, method);
      },
      py::arg("dataset_path"), py::arg("endpoint"), py::arg("method") = "sft", py::call_guard<py::gil_scoped_release>());

  m.def("fluctuation", [](const std::vector<std::vector<double>>& dists) {
    std::vector<RatingDistribution> in;
    for (const auto& d : dists) {
      if (d.size() != kRatingCount) throw ValidationError("each distribution needs " + std::to_string(kRatingCount) + " values");
      RatingDistribution r{};
      std::copy(d.begin(), d.end(), r.begin());
      in.push_back(r);
    }
    auto f = fluctuation(in);
    return f.to_json().dump();
  });

  m.def(
      "run_fluctuation_experiment",
      [](const std::string& config) {
        auto c = FluctuationConfig::from_json(json::parse(config));
        py::gil_scoped_release release;
        json out = json::array();
        for (const auto& r : run_fluctuation_experiment(c)) out.push_back(r.to_json());
        return out.dump();
      },
      py::arg("config_json") = "{}");

  m.def(
      "run_scaling_benchmark",
      [](const std::string& config) {
        auto c = ScalingConfig::from_json(json::parse(config));
        py::gil_scoped_release release;
        json out = json::array();
        for (const auto& cell : run_scaling_benchmark(c)) out.push_back(cell.to_json());
        return out.dump();
      },
      py::arg("config_json") = "{}");

  py::class_<Service>(m, "Service")
      .def(py::init([](const std::string& data_dir, std::optional<std::string> token) {
             ServiceOptions o;
             o.data_dir = data_dir;
             o.token = std::move(token);
             return std::make_unique<Service>(o);
           }),
           py::arg("data_dir") = "gensim-data", py::arg("token") = py::none())
      .def("start", &Service::start, py::arg("host") = "127.0.0.1", py::arg("port") = 0,
           py::call_guard<py::gil_scoped_release>())
      .def("stop", &Service::stop, py::call_guard<py::gil_scoped_release>());
}
