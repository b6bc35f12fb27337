# Model discrimination criteria and follow-up design search for obayes.
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
"""Posterior predictive summaries, KL divergences and the MD criterion.

For n* follow-up runs with model matrix Z*, model M_i predicts

    y* | sigma^2 ~ N(Z* gamma_i, sigma^2 V_i*),  V_i* = I + Z* G_i Z*'

and the MD criterion is the posterior weighted sum over ordered pairs i != j
of KL(m_i, m_j), with E[1/sigma^2 | y, M_i] = df_i / SSE_i. The log
determinant terms cancel over the symmetric pair sum and are left out.

"""
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import time

import numpy as np
from scipy import linalg

from obayes.exception import (DegenerateDataError, DesignSpaceOverflow,
                              NumericalError, ValidationError)
from obayes.factorial import (CandidateDesign, count_followup_designs,
                              iter_design_chunks, term_columns)
from obayes.posterior import OBJECTIVE

__all__ = (
    "PredictiveSummary", "CriterionScore", "followup_matrix",
    "predictive_summary", "design_summaries", "kl_gaussian", "kl_predictive",
    "criterion_weights", "md_score", "omd_score", "cmd_score",
    "DesignEvaluator", "search_followup", "exchange_search",
    "single_run_scores",
)

logger = logging.getLogger(__name__)

# numerical slack for nonnegativity of a KL divergence
PAIR_SLACK = 1e-9
# float64 elements of one M x M x B x n* pair tensor
PAIR_BUDGET = 2 ** 24


@dataclass(frozen=True, eq=False)
class PredictiveSummary:
    """Posterior predictive of n* follow-up runs under one model.

    This object has the following attributes:

    y_hat_star -- Predictive mean, n* values.
    v_star -- n* x n* scale matrix, I + Z* G Z*'.
    sse -- Residual sum of squares of the model.
    df -- Residual degrees of freedom of the model.

    """
    y_hat_star: np.ndarray
    v_star: np.ndarray
    sse: float
    df: int

    @property
    def n_star(self):
        return len(self.y_hat_star)


@dataclass(frozen=True)
class CriterionScore:
    """Criterion value of a follow-up design.

    This object has the following attributes:

    design -- CandidateDesign (carries the same score).
    value -- Criterion value in nats.
    criterion -- "omd" or "cmd".

    """
    design: CandidateDesign
    value: float
    criterion: str = "omd"


def followup_matrix(fit, runs):
    """Return the follow-up model matrix of a fitted model.

    Common columns are the intercept and, for a blocked fit, the block
    column at the follow-up level (+1). Model columns are the terms kept in
    the fit's model matrix, so a model reduced for aliasing predicts with
    the same basis it was fitted with.

    fit -- ModelFit.
    runs -- m x k array coded -1/+1.

    """
    runs = np.atleast_2d(np.asarray(runs, dtype=float))
    common = np.ones((runs.shape[0], fit.matrix.t0))
    return np.hstack((common, term_columns(runs, fit.matrix.terms)))


def predictive_summary(summary, z_star):
    """Return the PredictiveSummary of a fitted model at z_star.

    summary -- OlsSummary or ConjugateSummary.
    z_star -- n* x (t0 + t) follow-up model matrix in the fit's term order.

    Raise ValidationError on a dimension mismatch.

    """
    z_star = np.atleast_2d(np.asarray(z_star, dtype=float))
    if z_star.shape[1] != len(summary.gamma_hat):
        raise ValidationError("follow-up matrix has %d columns, model has %d"
                              % (z_star.shape[1], len(summary.gamma_hat)))
    v_star = np.eye(z_star.shape[0]) + z_star @ summary.gram_inv @ z_star.T
    v_star = 0.5 * (v_star + v_star.T)
    return PredictiveSummary(z_star @ summary.gamma_hat, v_star,
                             summary.sse, summary.df)


def design_summaries(posterior, candidates, design):
    """Return one PredictiveSummary per posterior model for a design.

    candidates -- CandidateTable the design's run numbers refer to.
    design -- CandidateDesign.

    """
    rows = [candidates.position(number) for number in design.run_indices]
    runs = candidates.runs[rows]
    return [predictive_summary(fit.summary, followup_matrix(fit, runs))
            for fit in posterior.fits]


def _cholesky(matrix, what):
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        raise DegenerateDataError("%s is not symmetric positive definite"
                                  % what)


def _log_det(lower):
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def kl_gaussian(mu0, sigma0, mu1, sigma1):
    """Return KL(N(mu0, sigma0) || N(mu1, sigma1)).

    Raise DegenerateDataError, if a covariance matrix is not SPD.

    """
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    lower0 = _cholesky(np.atleast_2d(sigma0), "Sigma0")
    lower1 = _cholesky(np.atleast_2d(sigma1), "Sigma1")
    whitened = linalg.solve_triangular(lower1, lower0, lower=True)
    shift = linalg.solve_triangular(lower1, mu1 - mu0, lower=True)
    return 0.5 * (float(np.sum(whitened ** 2)) + float(shift @ shift)
                  + _log_det(lower1) - _log_det(lower0) - len(mu0))


def _pair_parts(pred_i, pred_j):
    """Return (trace, quadratic form, log det ratio) for a model pair."""
    if pred_i.n_star != pred_j.n_star:
        raise ValidationError("predictives have %d and %d follow-up runs"
                              % (pred_i.n_star, pred_j.n_star))
    lower_i = _cholesky(pred_i.v_star, "V_i*")
    lower_j = _cholesky(pred_j.v_star, "V_j*")
    whitened = linalg.solve_triangular(lower_j, lower_i, lower=True)
    shift = linalg.solve_triangular(
        lower_j, pred_i.y_hat_star - pred_j.y_hat_star, lower=True)
    return (float(np.sum(whitened ** 2)), float(shift @ shift),
            _log_det(lower_j) - _log_det(lower_i))


def kl_predictive(pred_i, pred_j, include_log_det=True):
    """Return KL(m(.|y, M_i) || m(.|y, M_j)) of two predictive summaries.

    include_log_det -- If False, drop log(|V_j*| / |V_i*|) as in the
                       criterion sum.

    Raise DegenerateDataError, if model i fits its data exactly.

    """
    if not pred_i.sse > 0.0:
        raise DegenerateDataError("saturated model has no posterior for "
                                  "sigma^2 (SSE = 0)")
    (trace, quad, log_ratio) = _pair_parts(pred_i, pred_j)
    value = trace + pred_i.df / pred_i.sse * quad - pred_i.n_star
    if include_log_det:
        value += log_ratio
    return 0.5 * value


def criterion_weights(posterior, prob_floor=0.0):
    """Return the model weights used by the MD criterion.

    Models below prob_floor get weight zero, the rest are renormalized.

    Raise ValidationError, if no model reaches prob_floor.

    """
    probs = np.where(posterior.probs >= prob_floor, posterior.probs, 0.0)
    total = np.sum(probs)
    if not total > 0.0:
        raise ValidationError("no model has posterior probability >= %g"
                              % prob_floor)
    return probs / total


def md_score(weights, summaries, saturated=None):
    """Return the MD criterion for given weights and predictive summaries.

    saturated -- Optional flags; saturated models are skipped as i.

    """
    if saturated is None:
        saturated = [not s.sse > 0.0 for s in summaries]
    total = 0.0
    for (i, pred_i) in enumerate(summaries):
        if weights[i] == 0.0 or saturated[i]:
            continue
        for (j, pred_j) in enumerate(summaries):
            if i == j or weights[j] == 0.0:
                continue
            pair = kl_predictive(pred_i, pred_j, include_log_det=False)
            total += weights[i] * weights[j] * pair
    return total


def _score(posterior, summaries, design, criterion, prob_floor):
    weights = criterion_weights(posterior, prob_floor)
    saturated = [fit.saturated or not s.sse > 0.0
                 for (fit, s) in zip(posterior.fits, summaries)]
    value = md_score(weights, summaries, saturated)
    return CriterionScore(CandidateDesign(design.run_indices, value),
                          value, criterion)


def omd_score(posterior, summaries, design, prob_floor=0.0):
    """Return the OMD CriterionScore of a design.

    posterior -- Objective ModelPosterior.
    summaries -- PredictiveSummary per posterior model, see design_summaries.
    design -- CandidateDesign.

    """
    return _score(posterior, summaries, design, "omd", prob_floor)


def cmd_score(posterior, summaries, design, prob_floor=0.0):
    """Return the CMD CriterionScore of a design.

    posterior -- Conventional ModelPosterior (fixed pi, gamma sigma prior).
    summaries -- Conventional PredictiveSummary per model.
    design -- CandidateDesign.

    """
    return _score(posterior, summaries, design, "cmd", prob_floor)


class DesignEvaluator(object):
    """Vectorized criterion evaluation over batches of follow-up designs.

    Per model the predictive means and a square root of the scale matrix are
    precomputed at every candidate run, so a batch of designs only needs
    gathers and n* x n* algebra.

    This object has the following attributes:

    criterion -- "omd" or "cmd".
    candidates -- The CandidateTable.
    weights -- Weights of the models kept.
    labels -- Labels of the models kept.

    """

    def __init__(self, posterior, candidates, prob_floor=0.0):
        """Initialize the DesignEvaluator.

        posterior -- ModelPosterior (objective gives OMD, conventional CMD).
        candidates -- CandidateTable.
        prob_floor -- Ignore models below this posterior probability.

        """
        self.criterion = "omd" if posterior.approach == OBJECTIVE else "cmd"
        self.candidates = candidates
        weights = criterion_weights(posterior, prob_floor)
        keep = [i for i in range(len(posterior)) if weights[i] > 0.0]
        self.weights = weights[keep]
        self.labels = [posterior.fits[i].model.label for i in keep]
        self._means = []
        self._roots = []
        scale = []
        for i in keep:
            fit = posterior.fits[i]
            summary = fit.summary
            z_candidates = followup_matrix(fit, candidates.runs)
            self._means.append(z_candidates @ summary.gamma_hat)
            root = _cholesky(summary.gram_inv, "(Z'Z)^-1")
            self._roots.append(z_candidates @ root)
            if fit.saturated or not summary.sse > 0.0:
                logger.warning("model %s fits exactly; left out as first "
                               "model of the criterion pairs",
                               fit.model.label)
                scale.append(0.0)
            else:
                scale.append(summary.df / summary.sse)
        self._means = np.array(self._means)
        self._scale = np.array(scale)
        pair_weight = np.outer(self.weights * (self._scale > 0.0),
                               self.weights)
        np.fill_diagonal(pair_weight, 0.0)
        self._pair_weight = pair_weight
        logger.info("%s criterion over %d models and %d candidate runs",
                    self.criterion.upper(), len(keep), len(candidates))

    def scores(self, rows):
        """Return criterion values for a batch of designs.

        Large batches are split so the pair tensors stay below PAIR_BUDGET
        elements.

        rows -- B x n* integer array of 0-based candidate rows.

        """
        rows = np.atleast_2d(np.asarray(rows, dtype=np.intp))
        models = len(self._roots)
        step = max(1, PAIR_BUDGET // (models * models * rows.shape[1]))
        if len(rows) <= step:
            return self._scores(rows)
        return np.concatenate([self._scores(rows[start:start + step])
                               for start in range(0, len(rows), step)])

    def _scores(self, rows):
        (count, n_star) = rows.shape
        models = len(self._roots)
        scale_star = np.empty((models, count, n_star, n_star))
        means = np.empty((models, count, n_star))
        identity = np.eye(n_star)
        for (m, root) in enumerate(self._roots):
            gathered = root[rows]
            scale_star[m] = identity + gathered @ gathered.transpose(0, 2, 1)
            means[m] = self._means[m][rows]
        inverse = np.linalg.inv(scale_star)
        trace = np.einsum("jbkl,iblk->ijb", inverse, scale_star)
        diff = means[:, None, :, :] - means[None, :, :, :]
        quad = np.einsum("ijbk,jbkl,ijbl->ijb", diff, inverse, diff)
        pair = 0.5 * (trace + self._scale[:, None, None] * quad - n_star)
        # single pair terms may be negative, symmetric sums may not
        symmetric = pair + pair.transpose(1, 0, 2)
        worst = float(np.min(symmetric))
        if worst < -PAIR_SLACK * max(1.0, float(np.max(symmetric))):
            raise NumericalError("negative symmetric divergence %g" % worst)
        return np.einsum("ij,ijb->b", self._pair_weight, pair)

    def design(self, rows, value):
        """Return CriterionScore for 0-based rows and their value."""
        numbers = [self.candidates.numbers[r] for r in rows]
        value = float(value)
        return CriterionScore(CandidateDesign(numbers, value), value,
                              self.criterion)


def _order_key(score):
    return (-score.value, score.design.run_indices)


def _best_of_batch(evaluator, rows, top_k):
    values = evaluator.scores(rows)
    if len(values) > top_k:
        threshold = np.partition(values, len(values) - top_k)[-top_k]
        picked = np.flatnonzero(values >= threshold)
    else:
        picked = np.arange(len(values))
    found = [evaluator.design(rows[i], values[i]) for i in picked]
    return sorted(found, key=_order_key)[:top_k]


def _merge(best, found, top_k):
    return sorted(best + found, key=_order_key)[:top_k]


def search_followup(posterior, candidates, n_star, top_k=5, prob_floor=0.0,
                    threads=1, chunk_size=2048, max_designs=None):
    """Return the top_k follow-up designs of an exhaustive search.

    Every multiset of n_star candidate runs is scored. The ranking is by
    score, ties broken by the sorted run numbers, and does not depend on
    threads: chunk boundaries are fixed by chunk_size.

    posterior -- ModelPosterior; objective gives OMD, conventional CMD.
    candidates -- CandidateTable.
    n_star -- Number of follow-up runs.
    top_k -- Number of designs to return.
    prob_floor -- Ignore models below this posterior probability.
    threads -- Worker threads evaluating chunks.
    chunk_size -- Designs per chunk.
    max_designs -- Raise DesignSpaceOverflow above this many designs.

    """
    if top_k < 1:
        raise ValidationError("top_k must be at least 1")
    count = count_followup_designs(len(candidates), n_star)
    if max_designs is not None and count > max_designs:
        raise DesignSpaceOverflow(count, max_designs)
    evaluator = DesignEvaluator(posterior, candidates, prob_floor)
    logger.info("scoring %d designs of %d runs from %d candidates",
                count, n_star, len(candidates))
    started = time.time()
    chunks = iter_design_chunks(len(candidates), n_star, chunk_size)
    best = []
    if threads <= 1:
        for rows in chunks:
            best = _merge(best, _best_of_batch(evaluator, rows, top_k),
                          top_k)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pending = deque()
            for rows in chunks:
                pending.append(pool.submit(_best_of_batch, evaluator, rows,
                                           top_k))
                if len(pending) >= 2 * threads:
                    best = _merge(best, pending.popleft().result(), top_k)
            while pending:
                best = _merge(best, pending.popleft().result(), top_k)
    logger.debug("search took %.2f s", time.time() - started)
    if best:
        logger.info("best design %s with %s %.4f", best[0].design.label,
                    evaluator.criterion.upper(), best[0].value)
    return best


def exchange_search(posterior, candidates, n_star, top_k=5, prob_floor=0.0,
                    starts=20, seed=0, max_rounds=100):
    """Return the top_k designs met by a coordinate exchange search.

    Not exhaustive. From each random start every position of the design is
    replaced by the best candidate run until no exchange improves.

    starts -- Number of random starting designs.
    seed -- Seed of the numpy random generator.
    max_rounds -- Limit on improvement rounds per start.

    """
    evaluator = DesignEvaluator(posterior, candidates, prob_floor)
    c = len(candidates)
    rng = np.random.default_rng(seed)
    visited = {}
    logger.warning("exchange search over %d starts is not exhaustive",
                   starts)
    for start in range(starts):
        current = np.sort(rng.integers(0, c, size=n_star))
        value = float(evaluator.scores(current[None, :])[0])
        visited[tuple(current)] = value
        for _ in range(max_rounds):
            improved = False
            for position in range(n_star):
                trial = np.repeat(current[None, :], c, axis=0)
                trial[:, position] = np.arange(c)
                trial.sort(axis=1)
                values = evaluator.scores(trial)
                for (rows, score) in zip(trial, values):
                    visited[tuple(rows)] = float(score)
                best = max(range(c),
                           key=lambda i: (values[i], [-r for r in trial[i]]))
                if values[best] > value + PAIR_SLACK:
                    (current, value) = (trial[best], float(values[best]))
                    improved = True
            if not improved:
                break
        logger.debug("exchange start %d ended at %.6g", start, value)
    found = [evaluator.design(rows, score)
             for (rows, score) in visited.items()]
    return sorted(found, key=_order_key)[:top_k]


def single_run_scores(posterior, candidates, prob_floor=0.0):
    """Return the criterion value of every single candidate run."""
    evaluator = DesignEvaluator(posterior, candidates, prob_floor)
    rows = np.arange(len(candidates))[:, None]
    return [evaluator.design(r, v)
            for (r, v) in zip(rows, evaluator.scores(rows))]
