# Copyright 2026 The mixq Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""Python interface to the mixq core."""

import json as _json

from . import _mixq
from ._mixq import (
    Error,
    FormatError,
    InfeasibleConstraint,
    IoError,
    Network,
    OverflowError,
    TinyMlp,
    ValidationError,
    bops,
    codegen,
    dotp,
    load_network,
    matmul,
    mlp,
    oracle_accuracy,
    pack,
    quantize,
    simulate,
    tiny_mlp,
    unpack,
)

__all__ = [
    "Error", "FormatError", "InfeasibleConstraint", "IoError", "Network",
    "OverflowError", "TinyMlp", "ValidationError", "bops", "codegen", "dotp",
    "explore", "explore_oracle", "fit_proxy", "load_network", "matmul", "mlp",
    "oracle_accuracy", "pack", "predict_latency", "profile", "quantize",
    "simulate", "tiny_mlp", "unpack",
]

QAT_BITS = [1, 2, 4, 8]


def profile(hw, bits=QAT_BITS):
    """Kernel benchmark records for a preset name or hardware config path."""
    return _json.loads(_mixq.profile_json(hw, list(bits)))


def fit_proxy(profile, kind="linear-cbops", seed=0):
    """Fits a latency proxy to a profile dict; returns the model as a dict."""
    return _json.loads(_mixq.fit_proxy_json(_json.dumps(profile), kind, seed))


def _proxy_arg(proxy):
    return "" if proxy is None else _json.dumps(proxy)


def explore_oracle(network, ratio, budget=48, seed=0, bits=QAT_BITS, proxy=None,
                   oracle_seed=0):
    """Search against the synthetic accuracy oracle; returns the result dict."""
    return _json.loads(_mixq.explore_oracle_json(
        network, ratio, budget, seed, list(bits), _proxy_arg(proxy), oracle_seed))


def explore(network, evaluate, ratio, budget=48, seed=0, bits=QAT_BITS, proxy=None):
    """Search with a Python evaluator mapping [(w, a), ...] to accuracy."""
    return _json.loads(_mixq.explore_json(
        network, evaluate, ratio, budget, seed, list(bits), _proxy_arg(proxy)))


def predict_latency(proxy, network, scheme):
    """Proxy latency of a scheme; proxy is a dict from fit_proxy."""
    return _mixq.predict_latency(_json.dumps(proxy), network, scheme)
