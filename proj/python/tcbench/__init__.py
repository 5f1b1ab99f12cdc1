"""Temporal-consistency workbench for range-azimuth heatmap sequences.

Configs are plain dicts in the same shape as the CLI's JSON config; keys
left out take their defaults.
"""

import json

from . import _tcbench
from ._tcbench import (
    ConfigError,
    DataError,
    FrameSequence,
    SensorGeometry,
    ape,
    fvmd,
    kendall_tau,
    peak_distance,
    pearson,
    psnr,
    read_dataset,
    spearman,
    transform_loss,
    write_dataset,
    xcorr2,
)

__all__ = [
    "ConfigError", "DataError", "FrameSequence", "SensorGeometry", "ablate", "ape",
    "default_config", "degrade", "evaluate", "fuse", "fvmd", "kendall_tau",
    "peak_distance", "pearson", "psnr", "read_dataset", "run", "simulate", "slam",
    "spearman", "transform_loss", "write_dataset", "xcorr2",
]


def _text(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_tcbench.default_config())


def simulate(config=None):
    return _tcbench.simulate(_text(config))


def degrade(seq, config=None, seed=0):
    return _tcbench.degrade(seq, _text(config), seed)


def fuse(seq, config=None, truth=None):
    return _tcbench.fuse(seq, _text(config), truth)


def slam(seq, config=None):
    """Scan-matched trajectory as an (N, 4) array of t, x, y, theta."""
    return _tcbench.slam(seq, _text(config))


def evaluate(pred, ref, config=None):
    return json.loads(_tcbench.evaluate(pred, ref, _text(config)))


def run(config=None):
    """All seeds of one configuration, metrics averaged."""
    return json.loads(_tcbench.run(_text(config)))


def ablate(config):
    return json.loads(_tcbench.ablate(_text(config)))
