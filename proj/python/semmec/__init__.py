"""Semantic-aware multi-task offloading: environment, training and oracle."""

import json

from . import _semmec
from ._semmec import ConfigError, mann_kendall

__all__ = [
    "ConfigError",
    "Env",
    "evaluate_checkpoint",
    "evaluate_local",
    "freeze_instance",
    "mann_kendall",
    "normalize_config",
    "oracle",
    "train",
]


def _dump(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return json.dumps(config)


def normalize_config(config=None):
    """Validated config with all defaults filled in."""
    return json.loads(_semmec.normalize_config(_dump(config)))


class Env(_semmec.Env):
    def __init__(self, config=None, seed=1):
        super().__init__(_dump(config), seed)


def evaluate_local(config=None, runs=200, seed=1000):
    return _semmec.evaluate_local(_dump(config), runs, seed)


def train(method, config=None, seed=1):
    """Returns (checkpoint dict, training log)."""
    ckpt, log = _semmec.train(method, _dump(config), seed)
    return json.loads(ckpt), log


def evaluate_checkpoint(checkpoint, runs=200, seed=1000):
    return _semmec.evaluate_checkpoint(_dump(checkpoint), runs, seed)


def freeze_instance(config=None, seed=1):
    return json.loads(_semmec.freeze_instance(_dump(config), seed))


def oracle(instance, aware=True, threads=1):
    return _semmec.oracle(_dump(instance), aware, threads)
