# SPDX-License-Identifier: Apache-2.0
"""Class-incremental intent detection experiments."""

import json

from ._core import (
    ConfigError,
    ablation_variants,
    cli,
    cosine_probs,
    cross_entropy,
    dot_scores,
    fkd_loss,
    icml_loss,
    kd_loss,
    memory_quota,
    strategy_names,
    synth_generate,
)
from . import _core

__all__ = [
    "ConfigError",
    "ablation_variants",
    "cli",
    "cosine_probs",
    "cross_entropy",
    "dot_scores",
    "fkd_loss",
    "icml_loss",
    "kd_loss",
    "memory_quota",
    "run",
    "schedule",
    "strategy_names",
    "synth_generate",
]


def run(config=None, **overrides):
    """Run one experiment and return the report as a dict.

    `config` uses the same layout as the `config` block of a report; keyword
    arguments replace top-level keys. `strategy` may be a preset name.
    """
    cfg = dict(config or {})
    cfg.update(overrides)
    return json.loads(_core.run_json(json.dumps(cfg)))


def schedule(config=None, **overrides):
    cfg = dict(config or {})
    cfg.update(overrides)
    return json.loads(_core.schedule_json(json.dumps(cfg)))

