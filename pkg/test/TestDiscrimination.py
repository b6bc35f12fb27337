# Unittests for discrimination module.
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
"""Unittests for discrimination module."""

import math
import unittest

import numpy as np
from scipy import integrate, stats

import Mock
from obayes import discrimination
from obayes.discrimination import (DesignEvaluator, cmd_score,
                                   criterion_weights, design_summaries,
                                   exchange_search, kl_gaussian,
                                   kl_predictive, omd_score,
                                   predictive_summary, search_followup,
                                   single_run_scores)
from obayes.exception import (DegenerateDataError, DesignSpaceOverflow,
                              ValidationError)
from obayes.factorial import (CandidateDesign, CandidateTable, DesignTable,
                              enumerate_candidate_runs)
from obayes.posterior import conventional_posterior, objective_posterior

BEST_2FI = (11, 15, 26, 29)
BEST_3FI = (4, 10, 11, 28)
TOP_2FI = (BEST_2FI, (15, 15, 29, 30), (11, 15, 26, 30), (11, 15, 29, 30),
           (11, 15, 25, 30))


def screening_posterior(order=2, design=None):
    """Return the objective posterior of the reactor screening design."""
    design = Mock.reactor_screening() if design is None else design
    return objective_posterior(design, design.space(order))


class KLTestCase(unittest.TestCase):
    """Test kl_gaussian and kl_predictive."""
    def test_scalar(self):
        """Test KL(N(0, 1) || N(1, 2)) = log(2) / 2."""
        self.assertAlmostEqual(kl_gaussian([0.0], [[1.0]], [1.0], [[2.0]]),
                               0.5 * math.log(2.0), places=12)

    def test_self(self):
        """Test the divergence of a distribution from itself is zero."""
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        self.assertAlmostEqual(kl_gaussian([1.0, 2.0], sigma, [1.0, 2.0],
                                           sigma), 0.0, places=12)

    def test_not_spd(self):
        """Test a covariance that is not positive definite."""
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])
        self.assertRaises(DegenerateDataError, kl_gaussian, [0, 0],
                          np.eye(2), [0, 0], bad)

    def test_predictive(self):
        """Test predictive divergences are nonnegative and cancel log dets.
        """
        posterior = screening_posterior()
        candidates = enumerate_candidate_runs(posterior.space)
        summaries = design_summaries(posterior, candidates,
                                     CandidateDesign(BEST_2FI))
        for i in range(0, len(summaries), 3):
            for j in range(1, len(summaries), 4):
                if i == j:
                    continue
                (si, sj) = (summaries[i], summaries[j])
                with_det = kl_predictive(si, sj) + kl_predictive(sj, si)
                without = (kl_predictive(si, sj, include_log_det=False)
                           + kl_predictive(sj, si, include_log_det=False))
                self.assertTrue(kl_predictive(si, sj) >= -1e-9)
                self.assertAlmostEqual(with_det, without, delta=1e-9)

    def test_monte_carlo(self):
        """Test kl_gaussian against a sampled estimate of E_f log(f / g)."""
        rng = np.random.default_rng(3)
        (a, b) = (rng.standard_normal((3, 3)), rng.standard_normal((3, 3)))
        (sigma0, sigma1) = (a @ a.T + np.eye(3), b @ b.T + np.eye(3))
        (mu0, mu1) = (rng.standard_normal(3), rng.standard_normal(3))
        x = rng.multivariate_normal(mu0, sigma0, size=1000000)
        log_ratio = (stats.multivariate_normal(mu0, sigma0).logpdf(x)
                     - stats.multivariate_normal(mu1, sigma1).logpdf(x))
        error = np.std(log_ratio) / math.sqrt(len(x))
        self.assertTrue(abs(kl_gaussian(mu0, sigma0, mu1, sigma1)
                            - np.mean(log_ratio)) <= 4.0 * error)

    def test_predictive_quadrature(self):
        """Test kl_predictive averages the Gaussian divergence over sigma^2.
        """
        posterior = screening_posterior()
        candidates = enumerate_candidate_runs(posterior.space)
        summaries = design_summaries(posterior, candidates,
                                     CandidateDesign((3, 8, 8, 30)))
        labels = [fit.model.label for fit in posterior.fits]
        (si, sj) = (summaries[labels.index("A,D")],
                    summaries[labels.index("B,D,E")])
        sigma2 = stats.invgamma(si.df / 2.0, scale=si.sse / 2.0)

        def conditional(s2):
            return sigma2.pdf(s2) * kl_gaussian(si.y_hat_star, s2 * si.v_star,
                                                sj.y_hat_star, s2 * sj.v_star)

        expected = integrate.quad(conditional, 0.0, np.inf, epsabs=1e-12,
                                  epsrel=1e-11, limit=200)[0]
        self.assertAlmostEqual(kl_predictive(si, sj) / expected, 1.0,
                               places=8)

    def test_predictive_mismatch(self):
        """Test predictives of different n* fail."""
        posterior = screening_posterior()
        candidates = enumerate_candidate_runs(posterior.space)
        (first,) = design_summaries(posterior, candidates,
                                    CandidateDesign((1, 2)))[:1]
        (second,) = design_summaries(posterior, candidates,
                                     CandidateDesign((1, 2, 3)))[:1]
        self.assertRaises(ValidationError, kl_predictive, first, second)

    def test_saturated_predictive(self):
        """Test the divergence from an exact fit is undefined."""
        fit = screening_posterior().fits[1]
        summary = predictive_summary(fit.summary, np.ones((1, 2)))
        exact = discrimination.PredictiveSummary(summary.y_hat_star,
                                                 summary.v_star, 0.0, 6)
        self.assertRaises(DegenerateDataError, kl_predictive, exact, summary)

    def test_summary_columns(self):
        """Test predictive_summary checks the matrix width."""
        fit = screening_posterior().fits[1]
        self.assertRaises(ValidationError, predictive_summary, fit.summary,
                          np.ones((2, 5)))


class ScoreTestCase(unittest.TestCase):
    """Test omd_score, cmd_score and DesignEvaluator."""
    def setUp(self):
        """Setup the tests."""
        self.posterior = screening_posterior()
        self.candidates = enumerate_candidate_runs(self.posterior.space)
        self.evaluator = DesignEvaluator(self.posterior, self.candidates)

    def rows(self, numbers):
        return np.array([[self.candidates.position(n) for n in numbers]])

    def test_omd_best(self):
        """Test the OMD value of the best 2FI design."""
        summaries = design_summaries(self.posterior, self.candidates,
                                     CandidateDesign(BEST_2FI))
        score = omd_score(self.posterior, summaries,
                          CandidateDesign(BEST_2FI))
        self.assertEqual(score.criterion, "omd")
        self.assertAlmostEqual(score.value, 69.85, delta=1.0)
        self.assertEqual(score.design.score, score.value)

    def test_aliased_prediction(self):
        """Test a model with aliased terms predicts with its kept terms."""
        # D = AB on the screening runs, so {A,B,D} is fitted on A, B, D
        design = Mock.reactor_screening()
        index = [fit.model.label for fit in self.posterior.fits].index("A,B,D")
        summaries = design_summaries(self.posterior, self.candidates,
                                     CandidateDesign(BEST_2FI))
        rows = [self.candidates.position(n) for n in BEST_2FI]
        z = np.column_stack((np.ones(8), design.runs[:, [0, 1, 3]]))
        z_star = np.column_stack((np.ones(4),
                                  self.candidates.runs[rows][:, [0, 1, 3]]))
        gamma = np.linalg.lstsq(z, design.y, rcond=None)[0]
        gram_inv = np.linalg.inv(z.T @ z)
        np.testing.assert_allclose(summaries[index].y_hat_star,
                                   z_star @ gamma, rtol=1e-10)
        np.testing.assert_allclose(summaries[index].v_star,
                                   np.eye(4) + z_star @ gram_inv @ z_star.T,
                                   rtol=1e-10)
        self.assertEqual(summaries[index].df, 4)

    def test_vectorized(self):
        """Test DesignEvaluator agrees with the pairwise sum."""
        for numbers in (BEST_2FI, (1, 1, 1, 1), (3, 8, 8, 30), (5,)):
            design = CandidateDesign(numbers)
            summaries = design_summaries(self.posterior, self.candidates,
                                         design)
            expected = omd_score(self.posterior, summaries, design).value
            value = self.evaluator.scores(self.rows(design.run_indices))[0]
            self.assertAlmostEqual(value, expected,
                                   delta=1e-9 * max(1.0, expected))

    def test_nonnegative(self):
        """Test criterion values are nonnegative."""
        scores = single_run_scores(self.posterior, self.candidates)
        self.assertEqual(len(scores), 32)
        self.assertTrue(all(score.value >= -1e-9 for score in scores))
        self.assertEqual([s.design.run_indices[0] for s in scores],
                         list(range(1, 33)))

    def test_permutation(self):
        """Test the criterion does not depend on the run order."""
        values = self.evaluator.scores(np.array([[10, 14, 25, 28],
                                                 [28, 25, 14, 10],
                                                 [14, 28, 10, 25]]))
        self.assertAlmostEqual(values[0], values[1], delta=1e-9)
        self.assertAlmostEqual(values[0], values[2], delta=1e-9)

    def test_split_batches(self):
        """Test a batch split to bound memory gives the same values."""
        rows = np.array([[i, j, 31 - j] for i in range(0, 32, 3)
                         for j in range(i, 32, 4)])
        whole = self.evaluator.scores(rows)
        models = len(self.evaluator.labels)
        with Mock.replaced(discrimination,
                           PAIR_BUDGET=models * models * 3 * 7):
            split = self.evaluator.scores(rows)
        self.assertTrue(len(rows) > 7)
        np.testing.assert_allclose(split, whole, rtol=1e-10)

    def test_scale(self):
        """Test the criterion does not depend on the response scale."""
        design = Mock.reactor_screening()
        scaled = design.with_responses(10.0 * design.y - 3.0)
        other = DesignEvaluator(screening_posterior(design=scaled),
                                self.candidates)
        rows = self.rows(BEST_2FI)
        (expected, value) = (self.evaluator.scores(rows)[0],
                             other.scores(rows)[0])
        self.assertAlmostEqual(value, expected, delta=1e-9 * expected)

    def test_weights(self):
        """Test criterion weights with a probability floor."""
        weights = criterion_weights(self.posterior, 0.05)
        self.assertAlmostEqual(float(np.sum(weights)), 1.0, places=12)
        self.assertTrue(np.all((weights == 0.0)
                               | (self.posterior.probs >= 0.05)))
        self.assertRaises(ValidationError, criterion_weights, self.posterior,
                          0.99)

    def test_floor_evaluator(self):
        """Test the evaluator keeps the models above the floor."""
        evaluator = DesignEvaluator(self.posterior, self.candidates, 0.05)
        self.assertEqual(evaluator.labels[0], "intercept")
        self.assertEqual(len(evaluator.labels),
                         int(np.sum(self.posterior.probs >= 0.05)))

    def test_cmd(self):
        """Test CMD scores of the conventional posterior."""
        design = Mock.reactor_screening()
        posterior = conventional_posterior(design, design.space(2))
        summaries = design_summaries(posterior, self.candidates,
                                     CandidateDesign(BEST_2FI))
        score = cmd_score(posterior, summaries, CandidateDesign(BEST_2FI))
        evaluator = DesignEvaluator(posterior, self.candidates)
        self.assertEqual(evaluator.criterion, "cmd")
        self.assertTrue(score.value > 0.0)
        self.assertAlmostEqual(evaluator.scores(self.rows(BEST_2FI))[0],
                               score.value, delta=1e-9 * score.value)

    def test_saturated_excluded(self):
        """Test an exact fit only enters as second model of a pair."""
        design = DesignTable([[-1, -1], [1, -1], [-1, 1], [1, 1]],
                             [1.0, 3.0, 1.0, 3.0], ("A", "B"))
        with self.assertLogs("obayes.posterior", "WARNING"):
            posterior = objective_posterior(design, design.space(2))
        candidates = enumerate_candidate_runs(posterior.space)
        with self.assertLogs("obayes.discrimination", "WARNING"):
            evaluator = DesignEvaluator(posterior, candidates)
        values = evaluator.scores(np.array([[0, 3], [1, 2]]))
        self.assertTrue(np.all(np.isfinite(values)))
        self.assertTrue(np.all(values >= 0.0))


class SearchTestCase(unittest.TestCase):
    """Test search_followup and exchange_search."""
    def setUp(self):
        """Setup the tests."""
        self.posterior = screening_posterior()
        self.candidates = enumerate_candidate_runs(self.posterior.space)

    def test_best_2fi(self):
        """Test the top five OMD follow-up designs with 2FI."""
        best = search_followup(self.posterior, self.candidates, 4, top_k=5,
                               threads=2)
        self.assertEqual(len(best), 5)
        self.assertEqual(best[0].design.run_indices, BEST_2FI)
        self.assertAlmostEqual(best[0].value, 69.85, delta=1.0)
        values = [score.value for score in best]
        self.assertEqual(values, sorted(values, reverse=True))

    def test_top_five_2fi(self):
        """Test the run sets of the five best OMD designs with 2FI."""
        best = search_followup(self.posterior, self.candidates, 4, top_k=5)
        self.assertEqual(best[0].design.run_indices, BEST_2FI)
        self.assertEqual(set(score.design.run_indices for score in best),
                         set(TOP_2FI))
        self.assertTrue(best[0].value - best[-1].value < 1.0)

    def test_best_3fi(self):
        """Test the best OMD follow-up design with 3FI."""
        posterior = screening_posterior(order=3)
        best = search_followup(posterior, self.candidates, 4, top_k=1,
                               threads=2)
        self.assertEqual(best[0].design.run_indices, BEST_3FI)
        self.assertAlmostEqual(best[0].value, 1.5647, delta=0.002)

    def test_deterministic(self):
        """Test serial and threaded searches agree exactly."""
        serial = search_followup(self.posterior, self.candidates, 2,
                                 top_k=10, threads=1, chunk_size=50)
        threaded = search_followup(self.posterior, self.candidates, 2,
                                   top_k=10, threads=3, chunk_size=50)
        self.assertEqual([(s.design.run_indices, s.value) for s in serial],
                         [(s.design.run_indices, s.value) for s in threaded])

    def test_exhaustive_order(self):
        """Test the search returns the overall best designs."""
        best = search_followup(self.posterior, self.candidates, 1, top_k=32)
        single = single_run_scores(self.posterior, self.candidates)
        expected = sorted(single, key=lambda s: (-s.value,
                                                 s.design.run_indices))
        self.assertEqual([s.design.run_indices for s in best],
                         [s.design.run_indices for s in expected])

    def test_single_candidate(self):
        """Test one candidate and one follow-up run."""
        table = CandidateTable([[1, 1, 1, 1, 1]], (32,), tuple("ABCDE"))
        best = search_followup(self.posterior, table, 1)
        self.assertEqual(len(best), 1)
        self.assertEqual(best[0].design.run_indices, (32,))

    def test_overflow(self):
        """Test the exhaustive search limit."""
        self.assertRaises(DesignSpaceOverflow, search_followup,
                          self.posterior, self.candidates, 4,
                          max_designs=1000)

    def test_top_k(self):
        """Test top_k must be positive."""
        self.assertRaises(ValidationError, search_followup, self.posterior,
                          self.candidates, 2, top_k=0)

    def test_exchange(self):
        """Test the exchange search is reproducible and never beats the
        exhaustive search."""
        with self.assertLogs("obayes.discrimination", "WARNING"):
            first = exchange_search(self.posterior, self.candidates, 2,
                                    top_k=3, starts=4, seed=7)
        second = exchange_search(self.posterior, self.candidates, 2,
                                 top_k=3, starts=4, seed=7)
        best = search_followup(self.posterior, self.candidates, 2, top_k=1)
        self.assertEqual([s.design.run_indices for s in first],
                         [s.design.run_indices for s in second])
        self.assertTrue(first[0].value <= best[0].value + 1e-9)
