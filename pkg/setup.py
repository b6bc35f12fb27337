#!/usr/bin/python
# coding: utf-8
#
# Copyright (C) 2026  The obayes developers
from os import path
import re

from setuptools import setup

HERE = path.dirname(path.abspath(__file__))

with open(path.join(HERE, "obayes", "__init__.py")) as fd:
    VERSION = re.search(r'^__version__ = "([^"]+)"', fd.read(), re.M).group(1)

DESCRIPTION = ("Objective Bayesian model selection and follow-up designs "
               "for two-level screening experiments.")
LONG_DESCRIPTION = """\
Objective Bayes follow-up designs for screening experiments
-----------------------------------------------------------

Given a two-level factorial screening experiment, obayes computes posterior
probabilities of factor-activity models and ranks follow-up runs by how well
they discriminate among those models.

Features:
 - Beta-binomial prior on model space and robust hierarchical g-prior
   Bayes factors in closed form.
 - Conventional fixed-pi, gamma-sigma approach for comparison.
 - OMD/CMD model discrimination criteria with exhaustive (threaded) or
   coordinate exchange search over candidate runs.
 - Combined screening and follow-up analysis with a block effect.
 - Shannon heterogeneity, factor-activity dispersion and contrast plot data.

This version requires Python 3.8 or later.
"""

CLASSIFIERS = [
    "Programming Language :: Python",
    "Programming Language :: Python :: 3",
    "Development Status :: 4 - Beta",
    "Environment :: Console",
    "Intended Audience :: Science/Research",
    "License :: OSI Approved :: "\
        "GNU Library or Lesser General Public License (LGPL)",
    "Operating System :: OS Independent",
    "Topic :: Scientific/Engineering :: Mathematics",
]

if __name__ == "__main__":
    setup(
        name="obayes",
        packages=["obayes"],
        package_data={"obayes": ["data/*.csv"]},
        version=VERSION,
        description=DESCRIPTION,
        long_description=LONG_DESCRIPTION,
        author="The obayes developers",
        keywords = ["bayesian", "design of experiments", "screening",
                    "factorial", "g-prior", "model discrimination", "lgpl"],
        license="LGPL",
        classifiers=CLASSIFIERS,
        python_requires=">=3.8",
        install_requires=["numpy>=1.17", "scipy>=1.4", "pandas>=1.0",
                          "mpmath>=1.1"],
        extras_require={"test": ["coverage"]},
        entry_points={"console_scripts": ["obayes = obayes.cli:main"]},
    )
