#include <pybind11/pybind11.h>

#include <exception>
#include <filesystem>
#include <string>

#include "gce/app.hpp"
#include "gce/config.hpp"

namespace py = pybind11;

namespace {

struct Result {
  std::string report;
  std::string csv;
};

template <typename Run>
Result released(Run&& run) {
  gce::RunOutput out;
  {
    py::gil_scoped_release release;
    out = run();
  }
  return {out.report.dump(2), out.csv};
}

gce::RunOptions options(unsigned threads) {
  gce::RunOptions opt;
  opt.par.threads = threads;
  return opt;
}

}  // namespace

PYBIND11_MODULE(_gce, m) {
  static py::handle err = py::exception<std::exception>(m, "GceError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const py::error_already_set&) {
      throw;
    } catch (const py::builtin_exception&) {
      throw;
    } catch (const std::exception& e) {
      py::set_error(err, gce::error_record(e).dump().c_str());
    }
  });

  py::class_<Result>(m, "Result")
      .def_readonly("report", &Result::report)
      .def_readonly("csv", &Result::csv);

  m.def("version", &gce::version);

  m.def(
      "analyze",
      [](const std::string& config, const std::string& base_dir, unsigned threads) {
        return released([&] {
          const auto j = gce::parse_config_text(config);
          return gce::run_analyze(gce::analyze_config_from_json(j, base_dir), options(threads));
        });
      },
      py::arg("config"), py::arg("base_dir") = "", py::arg("threads") = 1);

  m.def(
      "simulate",
      [](const std::string& config, unsigned threads) {
        return released([&] {
          const auto j = gce::parse_config_text(config);
          return gce::run_simulate(gce::simulate_config_from_json(j), options(threads));
        });
      },
      py::arg("config"), py::arg("threads") = 1);

  m.def(
      "truth",
      [](const std::string& config, unsigned threads) {
        return released([&] {
          const auto j = gce::parse_config_text(config);
          return gce::run_truth(gce::truth_config_from_json(j), options(threads));
        });
      },
      py::arg("config"), py::arg("threads") = 1);
}
