# Licensed to the Apache Software Foundation (ASF) under one
# or more contributor license agreements.  See the NOTICE file
# distributed with this work for additional information
# regarding copyright ownership.  The ASF licenses this file
# to you under the Apache License, Version 2.0 (the
# "License"); you may not use this file except in compliance
# with the License.  You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing,
# software distributed under the License is distributed on an
# "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, either express or implied.  See the License for the
# specific language governing permissions and limitations
# under the License.
"""Python front end over the C++ accelerator model.

Configs, layers and reports cross the boundary as JSON; these wrappers take
and return plain dicts.
"""
import json

from . import _core
from ._core import AccelError, bandwidth_roof, pipe_stages

__all__ = [
    "AccelError",
    "bandwidth_roof",
    "check_floorplan",
    "compile_layer",
    "default_config",
    "fallback",
    "load_workload",
    "normalize_config",
    "pipe_stages",
    "search",
    "simulate",
    "static_dram_bytes",
]


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def default_config():
    return json.loads(_core.default_config())


def normalize_config(cfg):
    """Validate a (possibly partial) config and fill in defaults."""
    return json.loads(_core.normalize_config(_dump(cfg)))


def load_workload(path):
    with open(path, encoding="utf-8") as f:
        return json.loads(_core.normalize_workload(f.read()))


def search(layer, cfg=None):
    """Best tiling for a conv or dense layer."""
    return json.loads(_core.search(_dump(layer), _dump(cfg or {})))


def fallback(layer, cfg=None):
    return json.loads(_core.fallback(_dump(layer), _dump(cfg or {})))


def compile_layer(layer, cfg=None, eliminate=True):
    """Instruction stream as a JSON-lines string."""
    return _core.compile_layer(_dump(layer), _dump(cfg or {}), eliminate)


def static_dram_bytes(stream, cfg=None):
    return _core.static_dram_bytes(stream, _dump(cfg or {}))


def simulate(stream, cfg=None, seed=0, max_cycles=0):
    """Timing run of a JSON-lines stream; returns the report dict."""
    return json.loads(_core.simulate(stream, _dump(cfg or {}), seed, max_cycles))


def check_floorplan(floorplan, tech, min_spacing_um=0.0):
    """List of (kind, a, b, message) tuples."""
    return _core.check_floorplan(_dump(floorplan), _dump(tech), min_spacing_um)
