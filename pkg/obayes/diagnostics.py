# Posterior diagnostics for obayes.
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
"""Heterogeneity of posteriors, factorial contrasts and the robust prior.

The robust g-prior has density

    p(g) = 1/2 r^(1/2) (1 + g)^(-3/2),  g > r - 1,  r = (1 + n) / (t + t0)

which is uniform in v = (1 + g)^(-1/2) on (0, r^(-1/2)]. All integrals over
g are carried out in v.

"""
from dataclasses import dataclass
from itertools import combinations
import logging
import math

import numpy as np
import pandas as pd
from scipy import integrate, linalg, stats

from obayes.exception import ConvergenceError, ValidationError
from obayes.factorial import (DesignTable, FactorModel, build_model_matrix,
                              enumerate_candidate_runs, term_columns)
from obayes.posterior import factor_activity, fit_ols, sse_ratio

__all__ = (
    "HeterogeneityReport", "DivergenceCurve", "shannon_heterogeneity",
    "cv_factor_activity", "heterogeneity_report", "factorial_contrasts",
    "contrast_plot_data", "robust_g_density", "robust_log_bf_quadrature",
    "robust_shrinkage", "robust_vs_reference_check",
)

logger = logging.getLogger(__name__)

QUAD_TOLERANCE = 1e-10
GRID_POINTS = 257


@dataclass(frozen=True)
class HeterogeneityReport:
    """Dispersion summaries of a model posterior.

    This object has the following attributes:

    shannon_normalized -- Normalized Shannon index in [0, 1].
    cv_factors -- Coefficient of variation of factor activity.
    model_count -- Number of admissible models.

    """
    shannon_normalized: float
    cv_factors: float
    model_count: int

    def to_dict(self):
        return {"shannon_normalized": self.shannon_normalized,
                "cv_factors": self.cv_factors,
                "model_count": self.model_count}


def shannon_heterogeneity(posterior):
    """Return -sum p ln p / ln M over the M admissible models.

    posterior -- ModelPosterior or a sequence of probabilities.

    Raise ValidationError for fewer than two models.

    """
    probs = np.asarray(getattr(posterior, "probs", posterior), dtype=float)
    if len(probs) < 2:
        raise ValidationError("Shannon index needs at least two models")
    return float(stats.entropy(probs) / math.log(len(probs)))


def cv_factor_activity(activity):
    """Return population SD over mean of per-factor activity probabilities.

    activity -- dict name -> probability, or a sequence of probabilities.

    Raise ValidationError, if the mean activity is zero.

    """
    if isinstance(activity, dict):
        activity = list(activity.values())
    values = np.asarray(activity, dtype=float)
    if len(values) == 0 or not np.mean(values) > 0.0:
        raise ValidationError("coefficient of variation needs a positive "
                              "mean activity")
    return float(np.std(values) / np.mean(values))


def heterogeneity_report(posterior):
    """Return the HeterogeneityReport of a ModelPosterior."""
    return HeterogeneityReport(shannon_heterogeneity(posterior),
                               cv_factor_activity(factor_activity(posterior)),
                               len(posterior))


def factorial_contrasts(design, order=None):
    """Return list of (term, contrast) of a full 2^k factorial.

    contrast = column . y / 2^(k - 1) for every term up to order, in the
    canonical term order (mains, then pairs, ...).

    design -- DesignTable holding each of the 2^k runs once.
    order -- Highest interaction order, default k.

    Raise ValidationError on a design that is not a full factorial.

    """
    if not design.is_full_factorial():
        raise ValidationError("contrasts need a complete 2^%d factorial, "
                              "got %d runs" % (design.k, design.n))
    order = design.k if order is None else int(order)
    if not 1 <= order <= design.k:
        raise ValidationError("contrast order must be 1 to %d" % design.k)
    terms = []
    for size in range(1, order + 1):
        terms.extend(combinations(range(design.k), size))
    columns = term_columns(design.runs, terms)
    values = columns.T @ design.y / 2.0 ** (design.k - 1)
    labels = ["".join(design.names[i] for i in term) for term in terms]
    return [(label, float(value)) for (label, value) in zip(labels, values)]


def contrast_plot_data(contrasts):
    """Return normal probability plot data as pandas.DataFrame.

    Columns: term, contrast, position (i - 0.5) / m, quantile. Rows are
    sorted by contrast.

    """
    frame = pd.DataFrame(contrasts, columns=["term", "contrast"])
    frame = frame.sort_values(["contrast", "term"], kind="mergesort")
    frame = frame.reset_index(drop=True)
    m = len(frame)
    frame["position"] = (np.arange(1, m + 1) - 0.5) / m
    frame["quantile"] = stats.norm.ppf(frame["position"])
    return frame


def _ratio(n, t, t0):
    if not (t >= 0 and t0 >= 1 and n > t + t0):
        raise ValidationError("need n > t + t0, got n=%d, t=%d, t0=%d"
                              % (n, t, t0))
    return (1.0 + n) / (t + t0)


def robust_g_density(g, n, t, t0):
    """Return the robust prior density of g for a model with t terms."""
    r = _ratio(n, t, t0)
    g = np.asarray(g, dtype=float)
    inside = g > r - 1.0
    safe = np.where(inside, 1.0 + g, 1.0)
    return np.where(inside, 0.5 * math.sqrt(r) * safe ** -1.5, 0.0)


def _log_weight(v, q, t, half):
    """Return log of v^t (v^2 + (1 - v^2) Q)^(-half)."""
    v = np.asarray(v, dtype=float)
    return t * np.log(v) - half * np.log(v * v + (1.0 - v * v) * q)


def _integrate(function, upper, peak, what):
    points = [peak] if 0.0 < peak < upper else None
    (value, error) = integrate.quad(function, 0.0, upper, points=points,
                                    epsabs=QUAD_TOLERANCE,
                                    epsrel=QUAD_TOLERANCE, limit=200)
    if error > 1e-6 * max(abs(value), 1e-300):
        raise ConvergenceError("quadrature of %s did not converge "
                               "(estimate %g, error %g)"
                               % (what, value, error))
    return value


def _v_integrals(q, t, t0, n, moment):
    """Return (log normalizer, E[moment(v)]) under the g posterior."""
    r = _ratio(n, t, t0)
    upper = r ** -0.5
    half = 0.5 * (n - t0)
    grid = np.geomspace(upper * 1e-8, upper, GRID_POINTS)
    log_weight = _log_weight(grid, q, t, half)
    shift = float(np.max(log_weight))
    peak = float(grid[np.argmax(log_weight)])

    def weight(v):
        if v <= 0.0:
            return 0.0
        return math.exp(float(_log_weight(v, q, t, half)) - shift)

    mass = _integrate(weight, upper, peak, "the g posterior")
    if not mass > 0.0:
        raise ConvergenceError("g posterior has no mass")
    mean = None
    if moment is not None:
        mean = _integrate(lambda v: weight(v) * moment(v), upper, peak,
                          "a g posterior moment") / mass
    return (math.log(mass) + shift + 0.5 * math.log(r), mean)


def robust_log_bf_quadrature(q, t, t0, n):
    """Return log BF_i0 of the robust prior by quadrature over g.

    BF = integral of (1 + g)^((n - t0 - t) / 2) (1 + g Q)^(-(n - t0) / 2)
    against the robust prior density; a reference for the closed form.

    """
    if t == 0:
        return 0.0
    if not q > 0.0:
        raise ValidationError("SSE ratio must be positive")
    return _v_integrals(q, t, t0, n, None)[0]


def robust_shrinkage(q, t, t0, n):
    """Return the posterior mean of g / (1 + g) under the robust prior."""
    if t == 0:
        return 0.0
    return _v_integrals(q, t, t0, n, lambda v: 1.0 - v * v)[1]


@dataclass(frozen=True)
class DivergenceCurve:
    """KL divergences of the reference from the robust predictive.

    This object has the following attributes:

    sizes -- Tuple of run counts n.
    divergences -- Tuple of KL values, one per size.

    """
    sizes: tuple
    divergences: tuple

    def is_decreasing_in_trend(self, slack=1.1):
        """Return True, if every value is below slack times its predecessor.
        """
        values = self.divergences
        return all(b < slack * a for (a, b) in zip(values, values[1:]))

    def converged(self, tolerance=0.05):
        """Return True, if the last divergence is below tolerance."""
        return self.divergences[-1] < tolerance

    def minimum_is_last(self):
        return self.divergences[-1] == min(self.divergences)

    def to_frame(self):
        return pd.DataFrame({"n": list(self.sizes),
                             "kl": list(self.divergences)})


def _replicate(base, n):
    if n % base.shape[0]:
        raise ValidationError("%d runs are not a replicate of %d base runs"
                              % (n, base.shape[0]))
    return np.tile(base, (n // base.shape[0], 1))


def _robust_vs_reference(design, model, z_star_runs):
    """Return KL(reference predictive || robust predictive) for one design.

    The robust predictive is an approximation: instead of the mixture over
    g, the model terms are shrunk by the posterior mean of g / (1 + g) and
    the reference df and SSE are kept. The divergence measures how fast
    that shrinkage vanishes, not the exact g-mixture distance.

    """
    matrix = build_model_matrix(design, model)
    if not matrix.admissible:
        raise ValidationError("model %s is not estimable on %d runs"
                              % (model.label, design.n))
    ols = fit_ols(matrix, design.y)
    null = build_model_matrix(design, FactorModel(model.space, ()))
    q = sse_ratio(ols, fit_ols(null, design.y))
    shrink = robust_shrinkage(q, matrix.t, matrix.t0, design.n)
    x0 = matrix.x0
    project = linalg.lstsq(x0, matrix.xi)[0]
    xi_perp = matrix.xi - x0 @ project
    gram_perp = linalg.inv(xi_perp.T @ xi_perp)
    beta_perp = gram_perp @ xi_perp.T @ design.y
    beta0 = linalg.lstsq(x0, design.y)[0]
    x0_star = np.ones((z_star_runs.shape[0], matrix.t0))
    xi_star = term_columns(z_star_runs, matrix.terms)
    xi_star_perp = xi_star - x0_star @ project
    common = x0_star @ linalg.inv(x0.T @ x0) @ x0_star.T
    n_star = z_star_runs.shape[0]
    robust_mean = x0_star @ beta0 + shrink * (xi_star_perp @ beta_perp)
    robust_v = (np.eye(n_star) + common
                + shrink * xi_star_perp @ gram_perp @ xi_star_perp.T)
    ref_mean = x0_star @ beta0 + xi_star_perp @ beta_perp
    ref_v = np.eye(n_star) + common + xi_star_perp @ gram_perp @ xi_star_perp.T
    robust_lower = linalg.cholesky(robust_v, lower=True)
    ref_lower = linalg.cholesky(ref_v, lower=True)
    whitened = linalg.solve_triangular(robust_lower, ref_lower, lower=True)
    shift = linalg.solve_triangular(robust_lower, ref_mean - robust_mean,
                                    lower=True)
    log_ratio = 2.0 * float(np.sum(np.log(np.diag(robust_lower)))
                            - np.sum(np.log(np.diag(ref_lower))))
    return 0.5 * (float(np.sum(whitened ** 2))
                  + ols.df / ols.sse * float(shift @ shift)
                  + log_ratio - n_star)


def robust_vs_reference_check(model, base_runs=None, sizes=(8, 16, 32, 64),
                              seed=0, beta=1.0, sigma=1.0):
    """Return the DivergenceCurve of robust against reference predictives.

    Synthetic responses y = Z beta + sigma e are drawn for the base design
    replicated up to each size, with every model coefficient equal to beta.
    The robust predictive is moment matched over the posterior of g. The
    follow-up runs are the full 2^k factorial.

    model -- FactorModel with the true active factors.
    base_runs -- Base design, m x k array coded -1/+1; default the full
                 factorial of the model's factors.
    sizes -- Increasing run counts, multiples of the base size.
    seed -- Seed of the numpy random generator.

    """
    space = model.space
    candidates = enumerate_candidate_runs(space)
    base = candidates.runs if base_runs is None else np.asarray(base_runs)
    rng = np.random.default_rng(seed)
    divergences = []
    for n in sizes:
        runs = _replicate(base, n)
        mean = beta * (1.0 + np.sum(term_columns(runs, model.terms), axis=1))
        y = mean + sigma * rng.standard_normal(n)
        design = DesignTable(runs, y, space.names)
        kl = _robust_vs_reference(design, model, candidates.runs)
        logger.debug("n=%d: KL(reference || robust) = %.6g", n, kl)
        divergences.append(kl)
    return DivergenceCurve(tuple(sizes), tuple(divergences))
