# Objective-Bayes follow-up designs for two-level screening experiments.
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
"""Posterior model probabilities and follow-up designs for screening.

A typical session:

    >>> from obayes import Experiment
    >>> experiment = Experiment.from_csv("screening.csv")
    >>> experiment.posterior().top(5)
    >>> experiment.followup()[0].design.label
    '11 15 26 29'

"""
import logging

import pandas as pd

from obayes import discrimination, util
from obayes.config import ExperimentConfig
from obayes.diagnostics import (contrast_plot_data, factorial_contrasts,
                                heterogeneity_report)
from obayes.exception import ValidationError
from obayes.factorial import enumerate_candidate_runs
from obayes.posterior import (ModelSpacePrior, conventional_posterior,
                              factor_activity, objective_posterior)

__author__ = "The obayes developers"
__version__ = "0.1.1"
__all__ = ("Experiment", "ExperimentConfig", "followup_frame")

logger = logging.getLogger(__name__)


def followup_frame(scores, exhaustive=True, models_used=None):
    """Return the follow-up report of a list of CriterionScore.

    Columns: rank, runs, score, criterion, n_star, models_used, exhaustive.

    """
    rows = []
    for (rank, score) in enumerate(scores, 1):
        rows.append({
            "rank": rank,
            "runs": score.design.label,
            "score": score.value,
            "criterion": score.criterion,
            "n_star": score.design.n_star,
            "models_used": models_used,
            "exhaustive": exhaustive,
        })
    return pd.DataFrame(rows, columns=["rank", "runs", "score", "criterion",
                                       "n_star", "models_used",
                                       "exhaustive"])


class Experiment(object):
    """Screening experiment and the analyses obayes runs on it.

    This object has the following attributes:

    design -- The DesignTable analysed.
    config -- The ExperimentConfig in use.
    candidates -- CandidateTable of follow-up runs.

    """

    def __init__(self, design, config=None, candidates=None):
        """Initialize the Experiment.

        design -- DesignTable with responses.
        config -- ExperimentConfig, default settings if None.
        candidates -- CandidateTable, default the full 2^k factorial.

        """
        self.design = design
        self.config = ExperimentConfig() if config is None else config
        if candidates is None:
            candidates = enumerate_candidate_runs(self.space)
        elif tuple(candidates.names) != tuple(design.names):
            raise ValidationError("candidate factors do not match the design")
        self.candidates = candidates
        self._posteriors = {}

    def __repr__(self):
        """Return representation of an Experiment."""
        return "<Experiment: %d runs, %d factors>" % (self.design.n,
                                                      self.design.k)

    @classmethod
    def from_csv(cls, filename, config=None, candidates=None):
        """Return an Experiment of a design CSV file."""
        return cls(util.read_design(filename), config, candidates)

    @property
    def space(self):
        """Return the FactorSpace with the configured interaction order."""
        return self.design.space(self.config.interaction_order)

    def prior(self):
        """Return the ModelSpacePrior of the configuration."""
        if not self.config.objective:
            return ModelSpacePrior.fixed_pi(self.config.pi)
        return ModelSpacePrior.parse(self.config.prior, self.design.k)

    def posterior(self, with_block=None):
        """Return the ModelPosterior of the configured approach.

        with_block -- Override of config.with_block.

        """
        if with_block is None:
            with_block = self.config.with_block
        if with_block and self.design.block is None:
            raise ValidationError("blocked analysis needs a block column")
        if with_block not in self._posteriors:
            if self.config.objective:
                posterior = objective_posterior(self.design, self.space,
                                                self.prior(), with_block)
            else:
                posterior = conventional_posterior(
                    self.design, self.space, self.config.gamma,
                    self.config.pi, with_block)
            self._posteriors[with_block] = posterior
        return self._posteriors[with_block]

    def activity(self):
        """Return dict factor name -> posterior activity probability."""
        return factor_activity(self.posterior())

    def activity_frame(self):
        """Return the factor activity report as pandas.DataFrame."""
        activity = self.activity()
        return pd.DataFrame({"factor": list(activity),
                             "activity": list(activity.values())})

    def _search_posterior(self):
        if self.config.with_block:
            logger.info("follow-up search ignores the block column")
        return self.posterior(with_block=False)

    def followup(self):
        """Return list of the best CriterionScore follow-up designs."""
        config = self.config
        posterior = self._search_posterior()
        if config.exchange:
            return discrimination.exchange_search(
                posterior, self.candidates, config.n_star, config.top_k,
                config.prob_floor, config.exchange_starts, config.seed)
        return discrimination.search_followup(
            posterior, self.candidates, config.n_star, config.top_k,
            config.prob_floor, config.threads, config.chunk_size,
            config.max_designs)

    def followup_report(self):
        """Return the follow-up report as pandas.DataFrame."""
        posterior = self._search_posterior()
        weights = discrimination.criterion_weights(posterior,
                                                   self.config.prob_floor)
        return followup_frame(self.followup(), not self.config.exchange,
                              int((weights > 0.0).sum()))

    def single_runs(self):
        """Return the criterion value of each candidate run as DataFrame."""
        scores = discrimination.single_run_scores(
            self._search_posterior(), self.candidates, self.config.prob_floor)
        return pd.DataFrame({"run": [s.design.run_indices[0]
                                     for s in scores],
                             "score": [s.value for s in scores]})

    def combine(self, followup):
        """Return the Experiment of this design followed by followup.

        The combined experiment is analysed with a block column unless the
        follow-up design has no runs.

        """
        combined = self.design.concat(followup)
        config = self.config.updated(with_block=combined.block is not None)
        return Experiment(combined, config, self.candidates)

    def heterogeneity(self):
        """Return the HeterogeneityReport of the posterior."""
        return heterogeneity_report(self.posterior())

    def contrasts(self, order=None):
        """Return the normal plot data of a full factorial design."""
        return contrast_plot_data(factorial_contrasts(self.design, order))
