# Two-level factorial designs, model spaces and candidate runs for obayes.
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
"""Coded design matrices, factor-activity models and candidate runs.

All designs are coded -1/+1. A model is fully determined by its set of
active factors and the interaction order (effect forcing): it contains every
main effect and every interaction among the active factors up to that order.

"""
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement, islice
from math import comb
import logging
import string

import numpy as np
import pandas as pd

from obayes.exception import DesignSpaceOverflow, ValidationError

__all__ = (
    "FactorSpace", "DesignTable", "FactorModel", "ModelMatrix",
    "CandidateTable", "CandidateDesign", "model_terms", "term_columns",
    "build_model_matrix", "enumerate_models", "enumerate_candidate_runs",
    "run_index", "count_followup_designs", "enumerate_followup_designs",
    "iter_design_chunks", "NULL_LABEL",
)

logger = logging.getLogger(__name__)

MAX_FACTORS = 16
RANK_TOLERANCE = 1e-10
DEFAULT_NAMES = string.ascii_uppercase[:MAX_FACTORS]
# "null" and "NA" read back as missing values from CSV
NULL_LABEL = "intercept"


def _frozen(array, dtype=float):
    """Return a read-only copy of array."""
    array = np.array(array, dtype=dtype)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class FactorSpace:
    """Set of k two-level factors and the interaction order of its models.

    This object has the following attributes:

    k -- Number of factors, 1 <= k <= 16.
    names -- Tuple with k unique factor labels. Default is A, B, C, ...
    interaction_order -- 2 or 3, the highest interaction order in a model.

    """
    k: int
    names: tuple = None
    interaction_order: int = 2

    def __post_init__(self):
        if not 1 <= self.k <= MAX_FACTORS:
            raise ValidationError("need 1 to %d factors, got %d"
                                  % (MAX_FACTORS, self.k))
        if self.interaction_order not in (2, 3):
            raise ValidationError("interaction order must be 2 or 3, got %r"
                                  % (self.interaction_order,))
        names = self.names
        if names is None:
            names = tuple(DEFAULT_NAMES[:self.k])
        names = tuple(str(name) for name in names)
        if len(names) != self.k:
            raise ValidationError("%d factor names given for %d factors"
                                  % (len(names), self.k))
        if len(set(names)) != self.k:
            raise ValidationError("factor names must be unique")
        if NULL_LABEL in names:
            raise ValidationError("%r is reserved for the null model"
                                  % (NULL_LABEL,))
        object.__setattr__(self, "names", names)

    def with_order(self, interaction_order):
        """Return the same factors with another interaction order."""
        return FactorSpace(self.k, self.names, interaction_order)

    def index(self, name):
        """Return the 0-based index of the factor called name."""
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError("unknown factor %r" % (name,))


@dataclass(frozen=True, eq=False)
class DesignTable:
    """Coded two-level design with responses.

    This object has the following attributes:

    runs -- n x k array with entries -1/+1.
    y -- Array with n responses.
    names -- Tuple with the k factor names.
    block -- None or tuple of n labels with exactly two distinct values.

    """
    runs: np.ndarray
    y: np.ndarray
    names: tuple
    block: tuple = None

    def __post_init__(self):
        runs = np.asarray(self.runs, dtype=float)
        if runs.ndim != 2:
            raise ValidationError("design runs must form a matrix")
        bad = np.argwhere((runs != 1.0) & (runs != -1.0))
        if len(bad):
            (row, col) = bad[0]
            raise ValidationError("factor levels must be -1 or +1",
                                  row=int(row) + 1,
                                  column=self.names[col]
                                  if col < len(self.names) else None)
        y = np.asarray(self.y, dtype=float).ravel()
        if len(y) != runs.shape[0]:
            raise ValidationError("%d responses given for %d runs"
                                  % (len(y), runs.shape[0]))
        if not np.all(np.isfinite(y)):
            row = int(np.argmin(np.isfinite(y)))
            raise ValidationError("response is not a finite number",
                                  row=row + 1, column="y")
        if len(self.names) != runs.shape[1]:
            raise ValidationError("%d factor names given for %d columns"
                                  % (len(self.names), runs.shape[1]))
        block = self.block
        if block is not None:
            block = tuple(str(label) for label in block)
            if len(block) != len(y):
                raise ValidationError("%d block labels given for %d runs"
                                      % (len(block), len(y)))
            if len(set(block)) != 2:
                raise ValidationError("block column needs exactly two "
                                      "distinct labels, got %d"
                                      % len(set(block)))
        object.__setattr__(self, "runs", _frozen(runs))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "block", block)

    @property
    def n(self):
        """Return the number of runs."""
        return self.runs.shape[0]

    @property
    def k(self):
        """Return the number of factors."""
        return self.runs.shape[1]

    def space(self, interaction_order=2):
        """Return the FactorSpace of this design."""
        return FactorSpace(self.k, self.names, interaction_order)

    def block_column(self):
        """Return the block labels coded -1/+1 by order of appearance."""
        if self.block is None:
            raise ValidationError("design has no block column")
        first = self.block[0]
        return np.array([-1.0 if label == first else 1.0
                         for label in self.block])

    def run_numbers(self):
        """Return the 1-based full-factorial run number of each run."""
        return [run_index(row) for row in self.runs]

    def is_full_factorial(self):
        """Return True, if every one of the 2^k runs occurs exactly once."""
        if self.n != 2 ** self.k:
            return False
        return len(set(self.run_numbers())) == self.n

    def with_responses(self, y):
        """Return a copy of this design with other responses."""
        return DesignTable(self.runs, y, self.names, self.block)

    def concat(self, other, labels=("screening", "followup")):
        """Return this design followed by other, tagged with block labels.

        other -- DesignTable with the same factor names.
        labels -- Block labels for the runs of self and other.

        Raise ValidationError, if the factor names differ.

        """
        if tuple(other.names) != tuple(self.names):
            raise ValidationError("factor names differ: %s vs %s"
                                  % (",".join(self.names),
                                     ",".join(other.names)))
        if other.n == 0:
            return self
        runs = np.vstack((self.runs, other.runs))
        y = np.concatenate((self.y, other.y))
        block = (labels[0],) * self.n + (labels[1],) * other.n
        return DesignTable(runs, y, self.names, block)


def model_terms(active, interaction_order):
    """Return the canonical term list for a set of active factors.

    Mains in factor order, then pairs, then (for order 3) triples, each in
    lexicographic order. Every term is a tuple of increasing factor indices.

    active -- Iterable with 0-based factor indices.
    interaction_order -- 2 or 3.

    """
    active = sorted(set(active))
    terms = []
    for size in range(1, interaction_order + 1):
        terms.extend(combinations(active, size))
    return tuple(terms)


@dataclass(frozen=True)
class FactorModel:
    """Factor-activity model under effect forcing.

    This object has the following attributes:

    space -- The FactorSpace the model lives in.
    active -- Sorted tuple of active factor indices.
    terms -- Canonical tuple of terms, see model_terms.

    """
    space: FactorSpace
    active: tuple
    terms: tuple = field(init=False, repr=False)

    def __post_init__(self):
        active = tuple(sorted(set(int(i) for i in self.active)))
        if active and not 0 <= active[0] <= active[-1] < self.space.k:
            raise ValidationError("active factor index out of range")
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "terms",
                           model_terms(active, self.space.interaction_order))

    @property
    def f(self):
        """Return the number of active factors."""
        return len(self.active)

    @property
    def t(self):
        """Return the number of model terms."""
        return len(self.terms)

    @property
    def label(self):
        """Return the factor string, e.g. "B,D,E", or NULL_LABEL."""
        if not self.active:
            return NULL_LABEL
        return ",".join(self.space.names[i] for i in self.active)

    def term_labels(self):
        """Return the terms as strings such as "A", "BD"."""
        names = self.space.names
        return ["".join(names[i] for i in term) for term in self.terms]

    def __contains__(self, factor):
        """Return True, if factor (index or name) is active."""
        if isinstance(factor, str):
            factor = self.space.index(factor)
        return factor in self.active


@dataclass(frozen=True, eq=False)
class ModelMatrix:
    """Model matrix [X0 Xi] of a model on a design.

    Terms aliased on the design with X0 or with earlier terms are left out
    of Xi, so Xi is a column basis and t is the column rank of the model.

    This object has the following attributes:

    x0 -- n x t0 matrix of columns common to all models.
    xi -- n x t matrix of the terms kept.
    terms -- The terms kept, a subsequence of the model's terms.
    aliased -- The terms left out as aliased.
    rank_ok -- True, if [X0 Xi] has full column rank before reduction
               and df >= 1.
    admissible -- True, if X0 has full column rank and n > t0 plus the
                  number of model terms before reduction.
    df -- Residual degrees of freedom n - t0 - t.

    """
    x0: np.ndarray
    xi: np.ndarray
    terms: tuple
    aliased: tuple
    rank_ok: bool
    admissible: bool
    df: int

    @property
    def t0(self):
        return self.x0.shape[1]

    @property
    def t(self):
        return self.xi.shape[1]

    @property
    def n(self):
        return self.x0.shape[0]

    @property
    def z(self):
        """Return the full model matrix [X0 Xi]."""
        return np.hstack((self.x0, self.xi))


def term_columns(runs, terms):
    """Return the matrix of elementwise products of run columns per term.

    runs -- m x k array coded -1/+1.
    terms -- Sequence of index tuples.

    """
    runs = np.asarray(runs, dtype=float)
    columns = np.ones((runs.shape[0], len(terms)))
    for (col, term) in enumerate(terms):
        for factor in term:
            columns[:, col] *= runs[:, factor]
    return columns


def _full_rank(z):
    """Return the numerical rank of z, relative tolerance RANK_TOLERANCE."""
    if z.shape[1] == 0:
        return 0
    singular = np.linalg.svd(z, compute_uv=False)
    if singular[0] == 0.0:
        return 0
    return int(np.sum(singular > RANK_TOLERANCE * singular[0]))


def _column_basis(x0, xi):
    """Return indices of the columns of xi that raise the rank of x0.

    Columns are taken greedily in order, so main effects win over the
    interactions they are aliased with.

    """
    kept = []
    rank = _full_rank(x0)
    for col in range(xi.shape[1]):
        trial = np.hstack((x0, xi[:, kept + [col]]))
        if _full_rank(trial) > rank:
            kept.append(col)
            rank += 1
    return kept


def build_model_matrix(design, model, with_block=False):
    """Return the ModelMatrix of model on design.

    Terms aliased with X0 or with earlier terms are left out, see
    ModelMatrix.

    design -- DesignTable.
    model -- FactorModel over the design's factors.
    with_block -- If True, X0 gets the -1/+1 coded block column.

    Raise ValidationError on a factor space mismatch or a missing block.

    """
    if model.space.k != design.k:
        raise ValidationError("model has %d factors, design has %d"
                              % (model.space.k, design.k))
    x0 = np.ones((design.n, 1))
    if with_block:
        x0 = np.column_stack((x0, design.block_column()))
    xi = term_columns(design.runs, model.terms)
    kept = _column_basis(x0, xi)
    terms = tuple(model.terms[c] for c in kept)
    aliased = tuple(term for (c, term) in enumerate(model.terms)
                    if c not in kept)
    xi = np.ascontiguousarray(xi[:, kept])
    df = design.n - x0.shape[1] - xi.shape[1]
    x0_ok = _full_rank(x0) == x0.shape[1]
    rank_ok = x0_ok and not aliased and df >= 1
    admissible = x0_ok and design.n > x0.shape[1] + len(model.terms)
    x0.flags.writeable = False
    xi.flags.writeable = False
    return ModelMatrix(x0, xi, terms, aliased, rank_ok, admissible, df)


def enumerate_models(space, design, with_block=False):
    """Return list of (FactorModel, ModelMatrix) for the admissible models.

    All 2^k factor subsets are visited by size, then lexicographically. A
    model is kept when n > t0 plus its number of terms; terms aliased on
    the design are then reduced to a column basis. The null model comes
    first.

    space -- FactorSpace (gives the interaction order).
    design -- DesignTable.
    with_block -- Add the block column to X0.

    Raise ValidationError, if the null model itself is not admissible.

    """
    admissible = []
    (dropped, reduced) = (0, 0)
    for size in range(space.k + 1):
        for active in combinations(range(space.k), size):
            model = FactorModel(space, active)
            matrix = build_model_matrix(design, model, with_block)
            if matrix.admissible:
                admissible.append((model, matrix))
                if matrix.aliased:
                    reduced += 1
                    logger.debug("model %s: aliased terms %s left out",
                                 model.label,
                                 ",".join(_term_label(space, term)
                                          for term in matrix.aliased))
            elif not active:
                raise ValidationError("null model is not estimable on a "
                                      "design with %d runs" % design.n)
            else:
                dropped += 1
    if reduced:
        logger.info("%d models reduced to their column rank", reduced)
    if dropped:
        logger.warning("%d of %d models dropped as not estimable "
                       "(too many terms for %d runs)", dropped, 2 ** space.k,
                       design.n)
    logger.info("%d admissible models with interactions up to order %d",
                len(admissible), space.interaction_order)
    return admissible


def _term_label(space, term):
    return "".join(space.names[i] for i in term)


def run_index(row):
    """Return the 1-based Yates run number of a -1/+1 row.

    The first factor alternates fastest: run 2 is (+, -, -, ...).

    """
    number = 0
    for (j, level) in enumerate(row):
        if level > 0:
            number |= 1 << j
    return number + 1


@dataclass(frozen=True, eq=False)
class CandidateTable:
    """Runs from which follow-up designs are drawn.

    This object has the following attributes:

    runs -- c x k array coded -1/+1.
    numbers -- Tuple with the run number reported for each row.
    names -- Tuple with the factor names.

    """
    runs: np.ndarray
    numbers: tuple
    names: tuple

    def __post_init__(self):
        runs = np.asarray(self.runs, dtype=float)
        if runs.ndim != 2 or runs.shape[0] == 0:
            raise ValidationError("candidate table is empty")
        if np.any((runs != 1.0) & (runs != -1.0)):
            raise ValidationError("candidate levels must be -1 or +1")
        numbers = tuple(int(number) for number in self.numbers)
        if len(numbers) != runs.shape[0]:
            raise ValidationError("%d run numbers for %d candidates"
                                  % (len(numbers), runs.shape[0]))
        if len(set(numbers)) != len(numbers):
            raise ValidationError("candidate run numbers must be unique")
        object.__setattr__(self, "runs", _frozen(runs))
        object.__setattr__(self, "numbers", numbers)
        object.__setattr__(self, "names", tuple(self.names))

    def __len__(self):
        return self.runs.shape[0]

    def position(self, number):
        """Return the 0-based row of the run with the given number."""
        try:
            return self.numbers.index(int(number))
        except ValueError:
            raise ValidationError("no candidate run numbered %r" % (number,))

    def to_frame(self):
        """Return the table as pandas.DataFrame with a "run" column."""
        frame = pd.DataFrame(self.runs.astype(int), columns=list(self.names))
        frame.insert(0, "run", list(self.numbers))
        return frame


def enumerate_candidate_runs(space):
    """Return the 2^k full factorial as CandidateTable in Yates order.

    space -- FactorSpace.

    """
    count = 2 ** space.k
    index = np.arange(count)[:, None]
    bits = (index >> np.arange(space.k)[None, :]) & 1
    runs = 2 * bits - 1
    return CandidateTable(runs, tuple(range(1, count + 1)), space.names)


@dataclass(frozen=True)
class CandidateDesign:
    """Multiset of follow-up runs with its criterion score.

    This object has the following attributes:

    run_indices -- Sorted tuple of run numbers (repetitions allowed).
    score -- Criterion value or None.

    """
    run_indices: tuple
    score: float = None

    def __post_init__(self):
        object.__setattr__(self, "run_indices",
                           tuple(sorted(int(i) for i in self.run_indices)))

    @property
    def n_star(self):
        return len(self.run_indices)

    @property
    def label(self):
        """Return the run numbers separated by spaces."""
        return " ".join(str(i) for i in self.run_indices)


def count_followup_designs(c, n_star):
    """Return the number of multisets of size n_star from c items."""
    if c < 1 or n_star < 1:
        raise ValidationError("need at least one candidate and one run")
    return comb(c + n_star - 1, n_star)


def enumerate_followup_designs(c, n_star, limit=None):
    """Yield every CandidateDesign of size n_star drawn from c candidates.

    Run indices are 1-based; designs come in lexicographic order.

    c -- Number of candidate runs.
    n_star -- Number of follow-up runs.
    limit -- If given, the largest number of designs allowed.

    Raise DesignSpaceOverflow, if the count exceeds limit.

    """
    count = count_followup_designs(c, n_star)
    if limit is not None and count > limit:
        raise DesignSpaceOverflow(count, limit)
    for indices in combinations_with_replacement(range(1, c + 1), n_star):
        yield CandidateDesign(indices)


def iter_design_chunks(c, n_star, chunk_size):
    """Yield the multisets as int arrays of 0-based rows, chunk_size at once.

    Chunk boundaries depend only on c, n_star and chunk_size.

    """
    source = combinations_with_replacement(range(c), n_star)
    while True:
        chunk = list(islice(source, chunk_size))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.intp)
