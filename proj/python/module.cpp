/*
 * Copyright 2026 The bttree Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bttree/check.hpp"
#include "bttree/map.hpp"

namespace py = pybind11;

namespace {

using MapT = bttree::Map<std::uint64_t, std::uint64_t, 32, 32>;

bttree::Options make_options(const std::string& sync, int retry_limit, int prealloc_count,
                             bool canary) {
    bttree::Options o;
    o.sync = bttree::sync_policy_from_string(sync);
    o.retry_limit = retry_limit;
    o.prealloc_count = prealloc_count;
    o.canary = canary;
    return o;
}

}  // namespace

PYBIND11_MODULE(_bttree, m) {
    m.doc() = "Concurrent ordered map with cache-line-sized unordered leaves, "
              "weak rebalancing, and optimistic synchronization.";

    py::class_<MapT>(m, "Map")
        .def(py::init([](const std::string& sync, int retry_limit, int prealloc_count,
                         bool canary) {
                 return std::make_unique<MapT>(
                     make_options(sync, retry_limit, prealloc_count, canary));
             }),
             py::arg("sync") = "seqlock", py::arg("retry_limit") = 2,
             py::arg("prealloc_count") = 6, py::arg("canary") = false)
        .def(
            "search", [](const MapT& m, std::uint64_t k) { return m.search(k); }, py::arg("key"),
            py::call_guard<py::gil_scoped_release>(),
            "Value stored under key, or None.")
        .def(
            "insert",
            [](MapT& m, std::uint64_t k, std::uint64_t v) { return m.insert(k, v); },
            py::arg("key"), py::arg("value"), py::call_guard<py::gil_scoped_release>(),
            "Upsert; returns the previous value when the key was present.")
        .def(
            "remove", [](MapT& m, std::uint64_t k) { return m.remove(k); }, py::arg("key"),
            py::call_guard<py::gil_scoped_release>(),
            "Removes the key; returns the removed value when it was present.")
        .def(
            "successor",
            [](const MapT& m, std::uint64_t k) { return m.successor(k); }, py::arg("key"),
            py::call_guard<py::gil_scoped_release>(),
            "Smallest (key, value) with key strictly greater than the probe.")
        .def(
            "predecessor",
            [](const MapT& m, std::uint64_t k) { return m.predecessor(k); }, py::arg("key"),
            py::call_guard<py::gil_scoped_release>(),
            "Largest (key, value) with key strictly less than the probe.")
        .def("size", &MapT::size)
        .def("height", &MapT::height)
        .def("check", [](const MapT& m) { return bttree::conformance::check_tree(m); },
             "Structural invariant violations (empty list when well-formed).")
        .def("__len__", &MapT::size)
        .def("__contains__",
             [](const MapT& m, std::uint64_t k) { return m.search(k).has_value(); })
        .def("items", [](const MapT& m) {
            std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
            std::uint64_t k = 0;
            while (auto next = m.successor(k)) {
                out.push_back(*next);
                k = next->first;
            }
            return out;
        });

    m.attr("LEAF_CAPACITY") = MapT::leaf_capacity;
    m.attr("INTERNAL_FANOUT") = MapT::internal_fanout;
}
