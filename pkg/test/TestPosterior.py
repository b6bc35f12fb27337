# Unittests for posterior module.
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
"""Unittests for posterior module."""

from dataclasses import replace
import math
import unittest

import numpy as np
from scipy import integrate

import Mock
from obayes.diagnostics import robust_log_bf_quadrature
from obayes.exception import DegenerateDataError, ValidationError
from obayes.factorial import (DesignTable, FactorModel, FactorSpace,
                              build_model_matrix, enumerate_models)
from obayes.posterior import (ModelSpacePrior, OlsSummary,
                              conventional_log_ml, conventional_posterior,
                              factor_activity, fit_ols, model_posterior,
                              objective_posterior, prior_odds,
                              reference_log_ml, robust_log_bf)


def summary(sse):
    """Return an OlsSummary carrying only an SSE."""
    return OlsSummary(sse, 1, np.zeros(1), np.eye(1))


def conventional_oracle(matrix, y, gamma):
    """Return the conventional log marginal by quadrature over log sigma.

    The intercept is integrated out of N(y | X0 b0, sigma^2 Sigma) with
    Sigma = I + gamma^2 Xi Xi', independent of the closed form.

    """
    (x0, xi, n, t0) = (matrix.x0, matrix.xi, matrix.n, matrix.t0)
    sigma = np.eye(n) + gamma ** 2 * xi @ xi.T
    inverse = np.linalg.inv(sigma)
    gram = x0.T @ inverse @ x0
    proj = x0.T @ inverse @ y
    resid = float(y @ inverse @ y - proj @ np.linalg.solve(gram, proj))
    log_const = (-0.5 * (n - t0) * math.log(2.0 * math.pi)
                 - 0.5 * np.linalg.slogdet(sigma)[1]
                 - 0.5 * np.linalg.slogdet(gram)[1])
    m = n - t0
    peak = 0.5 * math.log(resid / m)
    top = -m * peak - 0.5 * resid * math.exp(-2.0 * peak)

    def integrand(u):
        return math.exp(-m * u - 0.5 * resid * math.exp(-2.0 * u) - top)

    (value, error) = integrate.quad(integrand, peak - 15.0, peak + 15.0,
                                    epsabs=0.0, epsrel=1e-12, limit=200)
    return log_const + top + math.log(value)


class PriorTestCase(unittest.TestCase):
    """Test ModelSpacePrior."""
    def test_beta_binomial_odds(self):
        """Test beta-binomial prior odds with a = b = 1, k = 5."""
        prior = ModelSpacePrior.beta_binomial(1, 1)
        self.assertAlmostEqual(math.exp(prior.log_prior_odds(0, 5)), 1.0)
        self.assertAlmostEqual(math.exp(prior.log_prior_odds(1, 5)), 0.2)
        self.assertAlmostEqual(math.exp(prior.log_prior_odds(5, 5)), 1.0)

    def test_prior_sums_to_one(self):
        """Test the beta-binomial prior sums to one over all models."""
        prior = ModelSpacePrior.beta_binomial(1, 6)
        total = sum(math.comb(5, f) * math.exp(prior.log_prior(f, 5))
                    for f in range(6))
        self.assertAlmostEqual(total, 1.0, places=12)

    def test_fixed_pi(self):
        """Test fixed pi prior odds."""
        prior = ModelSpacePrior.fixed_pi(0.25)
        model = FactorModel(FactorSpace(5), (0, 2))
        self.assertAlmostEqual(prior_odds(model, prior), 1.0 / 9.0)

    def test_parse(self):
        """Test ModelSpacePrior.parse."""
        self.assertEqual(ModelSpacePrior.parse("beta:1,1"),
                         ModelSpacePrior.beta_binomial(1, 1))
        self.assertEqual(ModelSpacePrior.parse("beta:1,k+1", 5).b, 6.0)
        self.assertEqual(ModelSpacePrior.parse("pi:0.25").pi, 0.25)
        self.assertEqual(str(ModelSpacePrior.parse("pi:0.25")), "pi:0.25")

    def test_parse_invalid(self):
        """Test malformed prior texts."""
        for text in ("beta:1", "gamma:1,1", "pi:x", "pi:1.5", "beta:0,1"):
            self.assertRaises(ValidationError, ModelSpacePrior.parse, text, 5)
        self.assertRaises(ValidationError, ModelSpacePrior.parse,
                          "beta:1,k+1")

    def test_odds_range(self):
        """Test more active factors than factors."""
        prior = ModelSpacePrior.beta_binomial()
        self.assertRaises(ValidationError, prior.log_prior_odds, 6, 5)


class OlsTestCase(unittest.TestCase):
    """Test fit_ols."""
    def test_null_sse(self):
        """Test SSE_0 and mean of the reactor screening responses."""
        design = Mock.reactor_screening()
        matrix = build_model_matrix(design,
                                    FactorModel(design.space(), ()))
        ols = fit_ols(matrix, design.y)
        self.assertAlmostEqual(ols.sse, 1903.875, places=8)
        self.assertAlmostEqual(ols.gamma_hat[0], 64.625, places=10)
        self.assertEqual(ols.df, 7)

    def test_orthogonal_estimates(self):
        """Test estimates of an orthogonal design are contrasts / 2."""
        design = Mock.reactor_full()
        model = FactorModel(design.space(), (1,))
        ols = fit_ols(build_model_matrix(design, model), design.y)
        expected = float(design.runs[:, 1] @ design.y) / 32.0
        self.assertAlmostEqual(ols.gamma_hat[1], expected, places=10)
        np.testing.assert_allclose(ols.gram_inv, np.eye(2) / 32.0,
                                   atol=1e-14)

    def test_rank_deficient(self):
        """Test fitting an inadmissible model matrix fails."""
        design = Mock.reactor_screening()
        model = FactorModel(design.space(), (0, 1, 3))
        matrix = build_model_matrix(design, model)
        self.assertRaises(DegenerateDataError, fit_ols, matrix, design.y)


class RobustBayesFactorTestCase(unittest.TestCase):
    """Test robust_log_bf."""
    def test_null(self):
        """Test the null model has BF one."""
        self.assertEqual(robust_log_bf(summary(1.0), summary(1.0), 0, 1, 8),
                         0.0)

    def test_quadrature_oracle(self):
        """Test the closed form against quadrature on 20 random cases."""
        rng = np.random.default_rng(20)
        for i in range(20):
            n = int(rng.integers(6, 33))
            t = int(rng.integers(1, min(8, n - 2) + 1))
            q = float(rng.uniform(0.02, 1.0))
            value = robust_log_bf(summary(q), summary(1.0), t, 1, n)
            expected = robust_log_bf_quadrature(q, t, 1, n)
            self.assertTrue(abs(value - expected) <= 1e-6 * max(1.0,
                                                                abs(expected)),
                            "n=%d t=%d Q=%g: %r != %r"
                            % (n, t, q, value, expected))

    def test_monotone_in_q(self):
        """Test a better fit gives a larger Bayes factor."""
        values = [robust_log_bf(summary(q), summary(1.0), 3, 1, 8)
                  for q in (0.9, 0.5, 0.1, 0.01)]
        self.assertEqual(values, sorted(values))

    def test_saturated(self):
        """Test an exact fit is evaluated at the SSE ratio floor."""
        with self.assertLogs("obayes.posterior", "WARNING"):
            value = robust_log_bf(summary(0.0), summary(4.0), 1, 1, 4)
        self.assertTrue(math.isfinite(value))
        self.assertTrue(value > 0.0)

    def test_no_df(self):
        """Test n <= t + t0 is rejected."""
        self.assertRaises(ValidationError, robust_log_bf, summary(0.5),
                          summary(1.0), 7, 1, 8)

    def test_zero_null_sse(self):
        """Test SSE_0 = 0 is rejected."""
        self.assertRaises(DegenerateDataError, robust_log_bf, summary(0.0),
                          summary(0.0), 1, 1, 8)


class ConventionalTestCase(unittest.TestCase):
    """Test the conventional marginal likelihood."""
    def setUp(self):
        """Setup the tests."""
        self.design = Mock.reactor_screening()
        self.model = FactorModel(self.design.space(), (1, 3))
        self.matrix = build_model_matrix(self.design, self.model)

    def test_quadrature_oracle(self):
        """Test conventional_log_ml against an independent quadrature."""
        for gamma in (0.5, 2.0, 10.0):
            value = conventional_log_ml(self.matrix, self.design.y, gamma)
            expected = conventional_oracle(self.matrix, self.design.y, gamma)
            self.assertTrue(abs(value - expected)
                            <= 1e-6 * max(1.0, abs(expected)))

    def test_reference_limit(self):
        """Test the gamma -> infinity limit is the reference marginal."""
        gamma = 1e6
        value = (conventional_log_ml(self.matrix, self.design.y, gamma)
                 + self.matrix.t * math.log(gamma))
        expected = reference_log_ml(self.matrix, self.design.y)
        self.assertAlmostEqual(value, expected, delta=1e-6)

    def test_null_model(self):
        """Test the null conventional marginal equals the reference one."""
        null = build_model_matrix(self.design,
                                  FactorModel(self.design.space(), ()))
        self.assertAlmostEqual(conventional_log_ml(null, self.design.y, 2.0),
                               reference_log_ml(null, self.design.y),
                               places=10)

    def test_invalid_gamma(self):
        """Test gamma must be positive."""
        self.assertRaises(ValidationError, conventional_log_ml, self.matrix,
                          self.design.y, 0.0)

    def test_posterior(self):
        """Test the conventional posterior is normalized."""
        posterior = conventional_posterior(self.design, self.design.space())
        self.assertAlmostEqual(float(np.sum(posterior.probs)), 1.0,
                               places=12)
        self.assertEqual(posterior.approach, "conventional")
        self.assertEqual(posterior.prior.kind, "fixed_pi")


class ObjectivePosteriorTestCase(unittest.TestCase):
    """Test objective_posterior on the reactor experiment."""
    def setUp(self):
        """Setup the tests."""
        self.design = Mock.reactor_screening()
        self.posterior = objective_posterior(self.design,
                                             self.design.space(2))

    def test_normalized(self):
        """Test posterior probabilities sum to one."""
        self.assertAlmostEqual(float(np.sum(self.posterior.probs)), 1.0,
                               places=12)
        self.assertTrue(np.all(self.posterior.probs >= 0.0))

    def test_top_models(self):
        """Test the top five screening models with 2FI."""
        top = self.posterior.top(5)
        self.assertEqual([label for (label, p) in top][:2],
                         ["intercept", "B,D,E"])
        expected = {"intercept": 0.32, "B,D,E": 0.10, "B": 0.08,
                    "A,D": 0.05, "B,D": 0.05}
        for (label, prob) in expected.items():
            self.assertAlmostEqual(self.posterior.prob(label), prob,
                                   delta=0.01)

    def test_aliased_models(self):
        """Test models with aliased terms enter at their column rank."""
        fits = dict((fit.model.label, fit) for fit in self.posterior.fits)
        for label in ("A,B,D", "A,C,E"):
            self.assertEqual(fits[label].matrix.t, 3)
            self.assertEqual(fits[label].summary.df, 4)
            self.assertTrue(0.0 < self.posterior.prob(label) < 0.06)
        frame = self.posterior.to_frame().set_index("model")
        self.assertEqual(frame.loc["A,B,D", "t"], 3)
        self.assertEqual(len(self.posterior), 26)

    def test_factor_activity(self):
        """Test posterior factor activity with 2FI."""
        activity = factor_activity(self.posterior)
        expected = {"A": 0.28, "B": 0.47, "C": 0.15, "D": 0.39, "E": 0.21}
        self.assertEqual(list(activity), list("ABCDE"))
        for (name, prob) in expected.items():
            self.assertAlmostEqual(activity[name], prob, delta=0.01)

    def test_three_factor_interactions(self):
        """Test the top screening models with 3FI."""
        posterior = objective_posterior(self.design, self.design.space(3))
        self.assertEqual(posterior.top(1)[0][0], "intercept")
        self.assertAlmostEqual(posterior.prob("intercept"), 0.46, delta=0.01)
        self.assertAlmostEqual(posterior.prob("B"), 0.12, delta=0.01)

    def test_combined(self):
        """Test the combined analysis with a block effect."""
        combined = self.design.concat(Mock.reactor_followup())
        posterior = objective_posterior(combined, combined.space(2),
                                        with_block=True)
        self.assertEqual(posterior.top(1)[0][0], "B,D,E")
        self.assertAlmostEqual(posterior.prob("B,D,E"), 0.86, delta=0.02)
        activity = factor_activity(posterior)
        expected = {"A": 0.02, "B": 0.98, "C": 0.02, "D": 0.93, "E": 0.87}
        for (name, prob) in expected.items():
            self.assertAlmostEqual(activity[name], prob, delta=0.02)

    def test_combined_three(self):
        """Test the combined analysis with 3FI and its own follow-up runs."""
        combined = self.design.concat(Mock.reactor_followup_three())
        posterior = objective_posterior(combined, combined.space(3),
                                        with_block=True)
        self.assertEqual(posterior.top(1)[0][0], "intercept")
        self.assertAlmostEqual(posterior.prob("intercept"), 0.27, delta=0.02)
        self.assertAlmostEqual(posterior.prob("B,D,E"), 0.21, delta=0.02)

    def test_response_scale(self):
        """Test the posterior does not depend on the response unit."""
        scaled = self.design.with_responses(self.design.y * 25.4)
        other = objective_posterior(scaled, scaled.space(2))
        np.testing.assert_allclose(other.probs, self.posterior.probs,
                                   rtol=1e-9, atol=1e-12)

    def test_block_coding(self):
        """Test a 0/1 block column gives the SSE of the -1/+1 one."""
        combined = self.design.concat(Mock.reactor_followup())
        for (model, matrix) in enumerate_models(combined.space(2), combined,
                                                with_block=True):
            x0 = np.column_stack((matrix.x0[:, 0],
                                  (matrix.x0[:, 1] + 1.0) / 2.0))
            other = replace(matrix, x0=x0)
            self.assertAlmostEqual(fit_ols(other, combined.y).sse,
                                   fit_ols(matrix, combined.y).sse,
                                   places=8)

    def test_to_frame(self):
        """Test the posterior report frame."""
        frame = self.posterior.to_frame()
        self.assertEqual(list(frame.columns),
                         ["model", "f", "t", "prior_odds", "log_bf",
                          "posterior_prob", "q", "saturated"])
        self.assertEqual(frame["model"].iloc[0], "intercept")
        self.assertEqual(len(frame), len(self.posterior))

    def test_permutation(self):
        """Test posterior probabilities do not depend on run order."""
        order = [3, 1, 7, 0, 5, 2, 6, 4]
        permuted = DesignTable(self.design.runs[order],
                               self.design.y[order], self.design.names)
        other = objective_posterior(permuted, permuted.space(2))
        np.testing.assert_allclose(other.probs, self.posterior.probs,
                                   atol=1e-12)

    def test_shift_invariance(self):
        """Test adding a constant to y leaves the posterior unchanged."""
        shifted = self.design.with_responses(self.design.y + 100.0)
        other = objective_posterior(shifted, shifted.space(2))
        np.testing.assert_allclose(other.probs, self.posterior.probs,
                                   atol=1e-9)

    def test_identical_responses(self):
        """Test all identical responses fail."""
        flat = self.design.with_responses(np.full(8, 5.0))
        self.assertRaises(DegenerateDataError, objective_posterior, flat,
                          flat.space(2))

    def test_saturated_model(self):
        """Test an exact fit is flagged and still scored."""
        design = DesignTable([[-1, -1], [1, -1], [-1, 1], [1, 1]],
                             [1.0, 3.0, 1.0, 3.0], ("A", "B"))
        with self.assertLogs("obayes.posterior", "WARNING"):
            posterior = objective_posterior(design, design.space(2))
        fits = dict((fit.model.label, fit) for fit in posterior.fits)
        self.assertTrue(fits["A"].saturated)
        self.assertFalse(fits["B"].saturated)
        self.assertEqual(posterior.top(1)[0][0], "A")

    def test_model_posterior_needs_null(self):
        """Test a model space without the null model fails."""
        fits = [fit for fit in self.posterior.fits if fit.model.f > 0]
        self.assertRaises(ValidationError, model_posterior, fits,
                          ModelSpacePrior.beta_binomial())
