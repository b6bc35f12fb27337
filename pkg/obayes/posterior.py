# Posterior model probabilities for obayes.
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
"""Model-space priors, Bayes factors and posterior model probabilities.

Two approaches are supported:

objective -- beta-binomial (or fixed pi) prior on model space and the robust
             hierarchical g-prior, whose Bayes factor against the null model
             has a closed form in terms of 2F1.
conventional -- fixed pi prior on model space, p(beta0, sigma) ~ 1/sigma and
                independent N(0, gamma^2 sigma^2) priors on the model terms.

Everything is combined in log space.

"""
from dataclasses import dataclass
import logging
import math
import re

import numpy as np
import pandas as pd
from scipy import linalg

from obayes import specfun
from obayes.exception import (ConvergenceError, DegenerateDataError,
                              ValidationError)
from obayes.factorial import enumerate_models

__all__ = (
    "ModelSpacePrior", "OlsSummary", "ConjugateSummary", "ModelFit",
    "ModelPosterior", "fit_ols", "prior_odds", "sse_ratio", "robust_log_bf",
    "conventional_fit", "conventional_log_ml", "reference_log_ml",
    "model_posterior", "factor_activity", "objective_posterior",
    "conventional_posterior",
)

logger = logging.getLogger(__name__)

# SSE_i / SSE_0 below this counts as a saturated fit
Q_FLOOR = 1e-12

OBJECTIVE = "objective"
CONVENTIONAL = "conventional"

_PRIOR_TEXT = re.compile(r"""
    ^\s*(?:
        beta:\s*(?P<a>[^,\s]+)\s*,\s*(?P<b>[^,\s]+)
      | pi:\s*(?P<pi>[^,\s]+)
    )\s*$
""", re.VERBOSE)


@dataclass(frozen=True)
class ModelSpacePrior:
    """Prior on the space of factor-activity models.

    This object has the following attributes:

    kind -- "beta_binomial" or "fixed_pi".
    a, b -- Beta hyperparameters (beta_binomial).
    pi -- Prior probability that a factor is active (fixed_pi).

    """
    kind: str = "beta_binomial"
    a: float = 1.0
    b: float = 1.0
    pi: float = None

    def __post_init__(self):
        if self.kind == "beta_binomial":
            if not (self.a > 0 and self.b > 0):
                raise ValidationError("beta prior needs a, b > 0")
        elif self.kind == "fixed_pi":
            if self.pi is None or not 0.0 < self.pi < 1.0:
                raise ValidationError("fixed pi prior needs 0 < pi < 1")
        else:
            raise ValidationError("unknown model space prior %r"
                                  % (self.kind,))

    @classmethod
    def beta_binomial(cls, a=1.0, b=1.0):
        return cls("beta_binomial", float(a), float(b))

    @classmethod
    def fixed_pi(cls, pi):
        return cls("fixed_pi", pi=float(pi))

    @classmethod
    def parse(cls, text, k=None):
        """Return prior from "beta:a,b" or "pi:v".

        b may be written "k+1" (or "k+<int>"), resolved against k.

        Raise ValidationError on malformed text.

        """
        match = _PRIOR_TEXT.match(text)
        if not match:
            raise ValidationError("prior must be 'beta:a,b' or 'pi:v', got %r"
                                  % (text,))
        try:
            if match.group("pi") is not None:
                return cls.fixed_pi(float(match.group("pi")))
            a = float(match.group("a"))
            b = match.group("b")
            if b.startswith("k"):
                if k is None:
                    raise ValidationError("prior %r needs the factor count"
                                          % (text,))
                b = k + int(b[1:] or 0)
            return cls.beta_binomial(a, float(b))
        except ValueError:
            raise ValidationError("malformed number in prior %r" % (text,))

    def log_prior(self, f, k):
        """Return log P(M) for a model with f of k factors active."""
        if self.kind == "fixed_pi":
            return f * math.log(self.pi) + (k - f) * math.log1p(-self.pi)
        return (specfun.log_beta(self.a + f, self.b + k - f)
                - specfun.log_beta(self.a, self.b))

    def log_prior_odds(self, f, k):
        """Return log P(M) / P(M_0) for a model with f of k factors active."""
        if not 0 <= f <= k:
            raise ValidationError("%d active factors out of %d" % (f, k))
        if self.kind == "fixed_pi":
            return f * (math.log(self.pi) - math.log1p(-self.pi))
        return (specfun.log_beta(self.a + f, self.b + k - f)
                - specfun.log_beta(self.a, self.b + k))

    def __str__(self):
        if self.kind == "fixed_pi":
            return "pi:%g" % self.pi
        return "beta:%g,%g" % (self.a, self.b)


def prior_odds(model, prior):
    """Return the prior odds P(model) / P(null model)."""
    return math.exp(prior.log_prior_odds(model.f, model.space.k))


@dataclass(frozen=True, eq=False)
class OlsSummary:
    """Least squares fit of a model matrix.

    This object has the following attributes:

    sse -- Residual sum of squares.
    df -- Residual degrees of freedom n - t0 - t.
    gamma_hat -- Coefficient estimates, common columns first.
    gram_inv -- (Z'Z)^-1 for Z = [X0 Xi].

    """
    sse: float
    df: int
    gamma_hat: np.ndarray
    gram_inv: np.ndarray


@dataclass(frozen=True, eq=False)
class ConjugateSummary:
    """Posterior of a model under the conventional normal prior.

    Same attributes as OlsSummary with the ridge-type quantities: gamma_hat
    is the posterior mean, gram_inv is (Z'Z + D)^-1 with D = gamma^-2 on the
    model terms, sse is the shrunk residual sum of squares and df = n - t0.

    """
    sse: float
    df: int
    gamma_hat: np.ndarray
    gram_inv: np.ndarray
    log_ml: float


def fit_ols(matrix, y):
    """Return OlsSummary of y regressed on matrix.z, via a QR factorization.

    Raise DegenerateDataError, if the model matrix is not admissible.

    """
    if not matrix.admissible:
        raise DegenerateDataError("model matrix has dependent common "
                                  "columns or no residual degrees of "
                                  "freedom")
    y = np.asarray(y, dtype=float)
    z = matrix.z
    (q, r) = linalg.qr(z, mode="economic")
    gamma_hat = linalg.solve_triangular(r, q.T @ y)
    residual = y - z @ gamma_hat
    r_inv = linalg.solve_triangular(r, np.eye(r.shape[0]))
    return OlsSummary(sse=float(residual @ residual), df=matrix.df,
                      gamma_hat=gamma_hat, gram_inv=r_inv @ r_inv.T)


def sse_ratio(ols_i, ols_0):
    """Return Q = SSE_i / SSE_0.

    Raise DegenerateDataError, if SSE_0 is zero.

    """
    if not ols_0.sse > 0.0:
        raise DegenerateDataError("null model fits the responses exactly "
                                  "(all responses identical?)")
    return ols_i.sse / ols_0.sse


def robust_log_bf(ols_i, ols_0, t_i, t0, n):
    """Return log BF_i0 under the robust hierarchical g-prior.

    ols_i -- OlsSummary of model i.
    ols_0 -- OlsSummary of the null model.
    t_i -- Number of model terms, 0 for the null model.
    t0 -- Number of common columns.
    n -- Number of runs.

    A saturated fit (SSE_i = 0) is evaluated at Q = 1e-12 and logged.

    """
    if t_i == 0:
        return 0.0
    if n <= t_i + t0:
        raise ValidationError("need n > t_i + t0, got n=%d, t_i=%d, t0=%d"
                              % (n, t_i, t0))
    q = sse_ratio(ols_i, ols_0)
    if q < Q_FLOOR:
        logger.warning("saturated fit (SSE ratio %.3g); Bayes factor "
                       "evaluated at Q=%g", q, Q_FLOOR)
        q = Q_FLOOR
    ratio = (n + 1.0) / (t_i + t0)
    a = (t_i + 1) / 2.0
    b = (n - t0) / 2.0
    c = (t_i + 3) / 2.0
    z = (1.0 - 1.0 / q) / ratio
    try:
        log_f = specfun.log_hyp2f1(a, b, c, z)
    except ConvergenceError:
        logger.warning("2F1 series slow at z=%g, using extended precision", z)
        log_f = specfun.log_hyp2f1_extended(a, b, c, z)
    return (-0.5 * t_i * math.log(ratio) - b * math.log(q)
            - math.log(t_i + 1.0) + log_f)


def conventional_fit(matrix, y, gamma):
    """Return ConjugateSummary under the conventional gamma-sigma prior.

    p(beta0, sigma) ~ 1/sigma, each model term ~ N(0, gamma^2 sigma^2).

    Raise ValidationError for gamma <= 0.

    """
    if not gamma > 0.0:
        raise ValidationError("gamma must be positive, got %r" % (gamma,))
    y = np.asarray(y, dtype=float)
    z = matrix.z
    (n, t0, t) = (matrix.n, matrix.t0, matrix.t)
    penalty = np.zeros(t0 + t)
    penalty[t0:] = gamma ** -2.0
    try:
        factor = linalg.cho_factor(z.T @ z + np.diag(penalty))
    except linalg.LinAlgError:
        raise DegenerateDataError("common columns are collinear")
    mean = linalg.cho_solve(factor, z.T @ y)
    residual = y - z @ mean
    shrunk_sse = float(residual @ residual + mean @ (penalty * mean))
    if not shrunk_sse > 0.0:
        raise DegenerateDataError("null model fits the responses exactly "
                                  "(all responses identical?)")
    log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
    half = 0.5 * (n - t0)
    log_ml = (-half * math.log(2.0 * math.pi)
              - t * math.log(gamma) - 0.5 * log_det
              + specfun.log_gamma(half) - math.log(2.0)
              - half * math.log(0.5 * shrunk_sse))
    gram_inv = linalg.cho_solve(factor, np.eye(t0 + t))
    return ConjugateSummary(sse=shrunk_sse, df=n - t0, gamma_hat=mean,
                            gram_inv=gram_inv, log_ml=log_ml)


def conventional_log_ml(matrix, y, gamma):
    """Return the log marginal likelihood under the conventional prior."""
    return conventional_fit(matrix, y, gamma).log_ml


def reference_log_ml(matrix, y):
    """Return the gamma -> infinity limit of conventional_log_ml + t log gamma.

    This is the marginal likelihood under the flat prior
    sigma^-(1+t) (2 pi)^(-t/2) on (gamma, sigma).

    """
    ols = fit_ols(matrix, y)
    if not ols.sse > 0.0:
        raise DegenerateDataError("model fits the responses exactly")
    half = 0.5 * (matrix.n - matrix.t0)
    (sign, log_det) = np.linalg.slogdet(matrix.z.T @ matrix.z)
    return (-half * math.log(2.0 * math.pi) - 0.5 * log_det
            + specfun.log_gamma(half) - math.log(2.0)
            - half * math.log(0.5 * ols.sse))


@dataclass(frozen=True, eq=False)
class ModelFit:
    """One admissible model with its fit and evidence.

    This object has the following attributes:

    model -- FactorModel.
    matrix -- ModelMatrix on the analysed design.
    summary -- OlsSummary (objective) or ConjugateSummary (conventional).
    log_bf -- log Bayes factor against the null model.
    q -- SSE_i / SSE_0.
    saturated -- True, if the model fits the data exactly.

    """
    model: object
    matrix: object
    summary: object
    log_bf: float
    q: float = 1.0
    saturated: bool = False


@dataclass(frozen=True, eq=False)
class ModelPosterior:
    """Posterior distribution over the admissible model space.

    This object has the following attributes:

    fits -- Tuple of ModelFit in enumeration order, null model first.
    prior -- The ModelSpacePrior.
    log_prior_odds -- Array with log P_i0 per model.
    probs -- Array with P(M_i | y) per model.
    approach -- "objective" or "conventional".

    """
    fits: tuple
    prior: ModelSpacePrior
    log_prior_odds: np.ndarray
    probs: np.ndarray
    approach: str = OBJECTIVE

    def __len__(self):
        return len(self.fits)

    @property
    def space(self):
        return self.fits[0].model.space

    @property
    def models(self):
        return [fit.model for fit in self.fits]

    @property
    def log_bf(self):
        return np.array([fit.log_bf for fit in self.fits])

    def prob(self, label):
        """Return the posterior probability of the model labelled label."""
        for (fit, prob) in zip(self.fits, self.probs):
            if fit.model.label == label:
                return float(prob)
        raise KeyError(label)

    def ranking(self):
        """Return model positions sorted by posterior probability."""
        return sorted(range(len(self.fits)), key=lambda i: -self.probs[i])

    def top(self, count=5):
        """Return list of (label, probability) of the count best models."""
        return [(self.fits[i].model.label, float(self.probs[i]))
                for i in self.ranking()[:count]]

    def to_frame(self):
        """Return the posterior report as pandas.DataFrame."""
        rows = []
        for i in self.ranking():
            fit = self.fits[i]
            rows.append({
                "model": fit.model.label,
                "f": fit.model.f,
                "t": fit.matrix.t,
                "prior_odds": math.exp(self.log_prior_odds[i]),
                "log_bf": fit.log_bf,
                "posterior_prob": float(self.probs[i]),
                "q": fit.q,
                "saturated": fit.saturated,
            })
        return pd.DataFrame(rows, columns=["model", "f", "t", "prior_odds",
                                           "log_bf", "posterior_prob", "q",
                                           "saturated"])


def model_posterior(fits, prior, approach=OBJECTIVE):
    """Return the ModelPosterior for fitted models and a model space prior.

    fits -- Sequence of ModelFit including the null model.
    prior -- ModelSpacePrior.
    approach -- Label stored with the result.

    Raise ValidationError, if fits is empty or lacks the null model.

    """
    fits = tuple(fits)
    if not fits:
        raise ValidationError("empty model space")
    if not any(fit.model.f == 0 for fit in fits):
        raise ValidationError("model space must contain the null model")
    k = fits[0].model.space.k
    log_odds = np.array([prior.log_prior_odds(fit.model.f, k)
                         for fit in fits])
    log_weight = log_odds + np.array([fit.log_bf for fit in fits])
    log_weight -= np.max(log_weight)
    weight = np.exp(log_weight)
    probs = weight / np.sum(weight)
    log_odds.flags.writeable = False
    probs.flags.writeable = False
    return ModelPosterior(fits, prior, log_odds, probs, approach)


def factor_activity(posterior):
    """Return dict factor name -> posterior probability of being active."""
    space = posterior.space
    activity = dict((name, 0.0) for name in space.names)
    for (fit, prob) in zip(posterior.fits, posterior.probs):
        for factor in fit.model.active:
            activity[space.names[factor]] += float(prob)
    for name in activity:
        activity[name] = min(activity[name], 1.0)
    return activity


def _null_fit(admissible, y):
    (null_model, null_matrix) = admissible[0]
    ols_0 = fit_ols(null_matrix, y)
    scale = max(float(np.dot(y, y)), 1.0)
    if ols_0.sse <= 1e-20 * scale:
        raise DegenerateDataError("all responses are identical (SSE_0 = 0)")
    return ols_0


def objective_posterior(design, space, prior=None, with_block=False):
    """Return the objective ModelPosterior of a design.

    design -- DesignTable.
    space -- FactorSpace with the interaction order.
    prior -- ModelSpacePrior, default beta-binomial (1, 1).
    with_block -- Include the block column in X0.

    """
    prior = ModelSpacePrior.beta_binomial() if prior is None else prior
    admissible = enumerate_models(space, design, with_block)
    ols_0 = _null_fit(admissible, design.y)
    fits = []
    for (model, matrix) in admissible:
        ols = ols_0 if model.f == 0 else fit_ols(matrix, design.y)
        q = sse_ratio(ols, ols_0)
        log_bf = robust_log_bf(ols, ols_0, matrix.t, matrix.t0, design.n)
        logger.debug("model %s: t=%d Q=%.6g log BF=%.6g",
                     model.label, matrix.t, q, log_bf)
        fits.append(ModelFit(model, matrix, ols, log_bf, q, q < Q_FLOOR))
    return model_posterior(fits, prior, OBJECTIVE)


def conventional_posterior(design, space, gamma=2.0, pi=0.25,
                           with_block=False):
    """Return the conventional ModelPosterior of a design.

    design -- DesignTable.
    space -- FactorSpace with the interaction order.
    gamma -- Prior scale of the model terms in units of sigma.
    pi -- Prior probability that a factor is active.
    with_block -- Include the block column in X0.

    """
    admissible = enumerate_models(space, design, with_block)
    ols_0 = _null_fit(admissible, design.y)
    conjugate = [conventional_fit(matrix, design.y, gamma)
                 for (model, matrix) in admissible]
    base = conjugate[0].log_ml
    fits = []
    for ((model, matrix), summary) in zip(admissible, conjugate):
        ols = ols_0 if model.f == 0 else fit_ols(matrix, design.y)
        q = sse_ratio(ols, ols_0)
        fits.append(ModelFit(model, matrix, summary, summary.log_ml - base,
                             q, q < Q_FLOOR))
    return model_posterior(fits, ModelSpacePrior.fixed_pi(pi), CONVENTIONAL)
