# Copyright 2026 The dnest Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""ATE estimation under network interference.

Configs are the same JSON documents the command-line tool reads; pass them as
dicts or strings.
"""

import json as _json

from ._core import Graph, Partition, __version__, estimate, two_point_moments
from . import _core

__all__ = [
    "Graph",
    "Partition",
    "__version__",
    "certify",
    "estimate",
    "exact_moments",
    "rideshare_experiment",
    "run_experiment",
    "two_point_moments",
]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def run_experiment(config):
    """Monte Carlo summaries, one dict per (replicate, estimator)."""
    return _core._run_experiment(_text(config))


def exact_moments(config, estimator):
    """Exact expectation/variance by enumerating every assignment (small N only)."""
    return _core._exact_moments(_text(config), estimator)


def certify(config):
    """Exact bias and variance certificates for a small instance."""
    return [_json.loads(c) for c in _core._certify(_text(config))]


def rideshare_experiment(config):
    """Switchback pricing experiment; returns the paired ATE and per-duration summaries."""
    return _core._rideshare(_text(config))
