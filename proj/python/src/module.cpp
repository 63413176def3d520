#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "gdl/cli/cli.hpp"
#include "gdl/core/alloc.hpp"
#include "gdl/core/error.hpp"
#include "gdl/diagnostics/gradcheck_suite.hpp"
#include "gdl/surface/decimate.hpp"
#include "gdl/surface/geometry.hpp"
#include "gdl/surface/mesh.hpp"
#include "gdl/training/checkpoint.hpp"
#include "gdl/training/registry.hpp"
#include "gdl/training/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using gdl::surface::SurfaceMesh;

namespace {

py::array_t<double> vertices_array(const SurfaceMesh& m) {
  py::array_t<double> a({static_cast<py::ssize_t>(m.vertices.size()), py::ssize_t{3}});
  auto v = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    for (int k = 0; k < 3; ++k) v(i, k) = m.vertices[i][k];
  return a;
}

py::array_t<std::uint32_t> faces_array(const SurfaceMesh& m) {
  py::array_t<std::uint32_t> a({static_cast<py::ssize_t>(m.faces.size()), py::ssize_t{3}});
  auto f = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.faces.size(); ++i)
    for (int k = 0; k < 3; ++k) f(i, k) = m.faces[i][k];
  return a;
}

SurfaceMesh make_mesh(const py::array_t<double, py::array::c_style | py::array::forcecast>& vertices,
                      const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& faces,
                      const std::map<std::string, std::vector<double>>& channels) {
  if (vertices.ndim() != 2 || vertices.shape(1) != 3) throw gdl::DimensionError("vertices must be (n, 3)");
  if (faces.ndim() != 2 || faces.shape(1) != 3) throw gdl::DimensionError("faces must be (m, 3)");
  SurfaceMesh m;
  auto v = vertices.unchecked<2>();
  for (py::ssize_t i = 0; i < v.shape(0); ++i) m.vertices.push_back({v(i, 0), v(i, 1), v(i, 2)});
  auto f = faces.unchecked<2>();
  for (py::ssize_t i = 0; i < f.shape(0); ++i) {
    gdl::surface::Face face{};
    for (int k = 0; k < 3; ++k) {
      if (f(i, k) < 0) throw gdl::IndexRangeError("negative vertex index");
      face[k] = static_cast<std::uint32_t>(f(i, k));
    }
    m.faces.push_back(face);
  }
  m.channels = channels;
  gdl::surface::validate_mesh(m);
  return m;
}

class Model {
 public:
  explicit Model(const fs::path& path) : checkpoint_(gdl::training::read_checkpoint(path)) {
    model_ = gdl::training::restore_model(checkpoint_);
  }

  std::string architecture() const { return model_->architecture(); }
  std::string config() const { return model_->config_json().dump(); }
  std::vector<std::string> channels() const { return model_->preprocessing().channels; }
  std::size_t epoch() const { return checkpoint_.metadata.epoch; }
  double best_val_mae() const { return checkpoint_.metadata.best_val_mae; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : model_->parameters()) n += p.value.numel();
    return n;
  }

  std::vector<double> predict(const std::vector<SurfaceMesh>& meshes) {
    const std::size_t budget = model_->preprocessing().decimate;
    std::vector<std::unique_ptr<gdl::model::Sample>> owned;
    std::vector<const gdl::model::Sample*> samples;
    for (const auto& mesh : meshes) {
      if (budget > 0 && mesh.vertex_count() > budget) {
        owned.push_back(model_->prepare(gdl::surface::decimate_mesh(mesh, budget)));
      } else {
        owned.push_back(model_->prepare(mesh));
      }
      samples.push_back(owned.back().get());
    }
    return gdl::training::predict(*model_, samples);
  }

  py::dict evaluate(const fs::path& manifest_path, const std::string& split) {
    const auto manifest = gdl::surface::read_manifest(manifest_path);
    const auto scans =
        gdl::training::load_split(manifest, gdl::surface::parse_split(split), model_->preprocessing().decimate);
    const auto report = gdl::training::evaluate(*model_, scans);
    py::list rows;
    for (const auto& r : report.rows) {
      py::dict d;
      d["subject_id"] = r.subject_id;
      d["scan_id"] = r.scan_id;
      d["target"] = r.target;
      d["prediction"] = r.prediction;
      d["abs_error"] = r.abs_error;
      rows.append(d);
    }
    py::dict out;
    out["mae"] = report.mae;
    out["std"] = report.std;
    out["rows"] = rows;
    return out;
  }

 private:
  gdl::training::Checkpoint checkpoint_;
  std::unique_ptr<gdl::model::Regressor> model_;
};

}  // namespace

PYBIND11_MODULE(_gdl, m) {
  m.doc() = "Native core of the gdl package";
  gdl::tune_allocator();

  static py::exception<gdl::Error> base(m, "GdlError", PyExc_RuntimeError);
  static py::exception<gdl::CheckpointError> ckpt(m, "CheckpointError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const gdl::ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const gdl::DimensionError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const gdl::CheckpointError& e) {
      py::set_error(ckpt, e.what());
    } catch (const gdl::Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<SurfaceMesh>(m, "Mesh")
      .def(py::init(&make_mesh), py::arg("vertices"), py::arg("faces"),
           py::arg("channels") = std::map<std::string, std::vector<double>>{})
      .def_property_readonly("vertices", &vertices_array)
      .def_property_readonly("faces", &faces_array)
      .def_property_readonly("channels", [](const SurfaceMesh& s) { return s.channels; })
      .def_property_readonly("vertex_count", &SurfaceMesh::vertex_count)
      .def_property_readonly("face_count", &SurfaceMesh::face_count)
      .def("euler_characteristic", &gdl::surface::euler_characteristic)
      .def("is_closed", &gdl::surface::is_closed)
      .def("decimate", &gdl::surface::decimate_mesh, py::arg("target_vertices"))
      .def("vertex_areas", &gdl::surface::vertex_areas)
      .def("mean_curvature", &gdl::surface::mean_curvature)
      .def("write_off", py::overload_cast<const fs::path&, const SurfaceMesh&>(&gdl::surface::write_off),
           py::arg("path"))
      .def("__repr__", [](const SurfaceMesh& s) {
        return "<Mesh " + std::to_string(s.vertex_count()) + " vertices, " + std::to_string(s.face_count()) +
               " faces>";
      });

  m.def("load_mesh", &gdl::surface::load_mesh, py::arg("mesh_file"), py::arg("feature_file") = py::none());
  m.def("icosphere", &gdl::surface::make_icosphere, py::arg("level"), py::arg("radius") = 1.0);
  m.def("architectures", &gdl::training::architectures);

  py::class_<Model>(m, "Model")
      .def(py::init<const fs::path&>(), py::arg("checkpoint"))
      .def_property_readonly("architecture", &Model::architecture)
      .def_property_readonly("config_json", &Model::config)
      .def_property_readonly("channels", &Model::channels)
      .def_property_readonly("epoch", &Model::epoch)
      .def_property_readonly("best_val_mae", &Model::best_val_mae)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("predict", &Model::predict, py::arg("meshes"))
      .def("evaluate", &Model::evaluate, py::arg("manifest"), py::arg("split") = "test");

  m.def(
      "gradcheck",
      [](bool negative_control) {
        py::list rows;
        for (const auto& r : gdl::diagnostics::run_gradcheck_suite(negative_control)) {
          py::dict d;
          d["item"] = r.name;
          d["max_rel_error"] = r.max_rel_error;
          d["seconds"] = r.seconds;
          d["pass"] = r.pass;
          rows.append(d);
        }
        return rows;
      },
      py::arg("negative_control") = false);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"gdl"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = gdl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
