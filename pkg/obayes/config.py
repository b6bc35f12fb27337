# Configuration for obayes.
# Copyright (C) 2026  The obayes developers
#
# This file is part of obayes.
#
# obayes is free software: you can redistribute it and/or modify
# it under the terms of the GNU Lesser General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
"""Experiment configuration.

Values are merged in this order, later ones win: built-in defaults, a JSON
config file, the environment (OBAYES_THREADS), command line flags.

"""
from dataclasses import dataclass, fields, replace
import json
import logging
import os

from obayes.exception import ValidationError

__all__ = ("ExperimentConfig", "default_threads", "load_config",
           "environment_overrides", "build_config")

logger = logging.getLogger(__name__)

THREADS_VARIABLE = "OBAYES_THREADS"
CRITERIA = ("omd", "cmd")
FORMATS = ("csv", "json")


def _threads_from(environ):
    value = environ.get(THREADS_VARIABLE)
    if value is None or not value.strip():
        return None
    try:
        threads = int(value)
    except ValueError:
        raise ValidationError("%s must be an integer, got %r"
                              % (THREADS_VARIABLE, value))
    if threads < 1:
        raise ValidationError("%s must be at least 1" % THREADS_VARIABLE)
    return threads


def default_threads(environ=None):
    """Return OBAYES_THREADS, else min(4, number of CPUs)."""
    environ = os.environ if environ is None else environ
    threads = _threads_from(environ)
    if threads is None:
        threads = min(4, os.cpu_count() or 1)
    return threads


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one obayes run.

    This object has the following attributes:

    interaction_order -- 2 or 3.
    prior -- Model space prior text, "beta:a,b" or "pi:v".
    criterion -- "omd" (objective) or "cmd" (conventional).
    gamma -- Prior scale of the conventional approach.
    pi -- Prior activity probability of the conventional approach.
    n_star -- Number of follow-up runs.
    top_k -- Number of follow-up designs reported.
    prob_floor -- Models below this probability are left out of the search.
    with_block -- Add a block column to the model matrices.
    seed -- Seed of synthetic data and random exchange starts.
    threads -- Worker threads of the exhaustive search.
    chunk_size -- Designs evaluated at once.
    max_designs -- Limit of the exhaustive search.
    exchange -- Use the coordinate exchange search.
    exchange_starts -- Random starts of the exchange search.
    single_runs -- Report the criterion of each single candidate run.
    output_format -- "csv" or "json".
    out_dir -- Report directory, None for console output only.
    candidates -- Path of a candidate run table, None for the full factorial.

    """
    interaction_order: int = 2
    prior: str = "beta:1,1"
    criterion: str = "omd"
    gamma: float = 2.0
    pi: float = 0.25
    n_star: int = 4
    top_k: int = 5
    prob_floor: float = 0.0
    with_block: bool = False
    seed: int = 0
    threads: int = 1
    chunk_size: int = 2048
    max_designs: int = 5000000
    exchange: bool = False
    exchange_starts: int = 20
    single_runs: bool = False
    output_format: str = "csv"
    out_dir: str = None
    candidates: str = None

    def __post_init__(self):
        if self.interaction_order not in (2, 3):
            raise ValidationError("interaction order must be 2 or 3")
        if self.criterion not in CRITERIA:
            raise ValidationError("criterion must be one of %s"
                                  % ", ".join(CRITERIA))
        if self.output_format not in FORMATS:
            raise ValidationError("format must be one of %s"
                                  % ", ".join(FORMATS))
        if not self.gamma > 0.0:
            raise ValidationError("gamma must be positive")
        if not 0.0 < self.pi < 1.0:
            raise ValidationError("pi must lie in (0, 1)")
        if not 0.0 <= self.prob_floor < 1.0:
            raise ValidationError("prob_floor must lie in [0, 1)")
        for name in ("n_star", "top_k", "threads", "chunk_size",
                     "max_designs", "exchange_starts"):
            if getattr(self, name) < 1:
                raise ValidationError("%s must be at least 1" % name)

    @property
    def objective(self):
        """Return True for the objective approach."""
        return self.criterion == "omd"

    def updated(self, **values):
        """Return a copy with the given non-None values replaced."""
        values = dict((k, v) for (k, v) in values.items() if v is not None)
        _check_keys(values)
        return replace(self, **values)

    def to_dict(self):
        return dict((f.name, getattr(self, f.name)) for f in fields(self))


def _check_keys(values, source="configuration"):
    known = set(f.name for f in fields(ExperimentConfig))
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValidationError("unknown %s keys: %s"
                              % (source, ", ".join(unknown)))


def load_config(filename):
    """Return dict of settings read from a flat JSON object file.

    Raise ValidationError on unreadable files, bad JSON or unknown keys.

    """
    try:
        with open(filename) as fd:
            values = json.load(fd)
    except OSError as err:
        raise ValidationError("cannot read config file %s: %s"
                              % (filename, err.strerror))
    except ValueError as err:
        raise ValidationError("config file %s is not valid JSON: %s"
                              % (filename, err))
    if not isinstance(values, dict):
        raise ValidationError("config file %s must hold a JSON object"
                              % filename)
    _check_keys(values, "config file")
    logger.debug("read %d settings from %s", len(values), filename)
    return values


def environment_overrides(environ=None):
    """Return dict of settings taken from the environment."""
    environ = os.environ if environ is None else environ
    threads = _threads_from(environ)
    return {} if threads is None else {"threads": threads}


def build_config(filename=None, flags=None, environ=None):
    """Return the ExperimentConfig of defaults, file, environment and flags.

    filename -- JSON config file or None.
    flags -- dict of command line values; None values are ignored.
    environ -- Mapping used instead of os.environ.

    """
    values = {"threads": default_threads(environ)}
    if filename is not None:
        values.update(load_config(filename))
    values.update(environment_overrides(environ))
    if flags:
        values.update((k, v) for (k, v) in flags.items() if v is not None)
    _check_keys(values)
    try:
        return ExperimentConfig(**values)
    except TypeError as err:
        raise ValidationError("invalid configuration: %s" % err)
