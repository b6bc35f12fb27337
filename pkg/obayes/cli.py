# Command line interface of obayes.
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
"""obayes command line.

    obayes posterior DESIGN.csv
    obayes followup DESIGN.csv --n-star 4
    obayes combined SCREENING.csv FOLLOWUP.csv
    obayes diagnostics DESIGN.csv [--followup FOLLOWUP.csv]

Exit status: 0 success, 2 invalid input, 3 numerical failure, 4 follow-up
design space too large for an exhaustive search.

"""
import argparse
import logging
from os import path
import sys

from obayes import Experiment, __version__, util
from obayes.config import build_config
from obayes.exception import ObayesError

__all__ = ("build_parser", "main")

logger = logging.getLogger(__name__)

TOP_MODELS = 5
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _common(parser):
    group = parser.add_argument_group("model")
    group.add_argument("--order", dest="interaction_order", type=int,
                       choices=(2, 3), help="highest interaction order")
    group.add_argument("--prior", help="model space prior, 'beta:a,b' "
                       "or 'pi:v'; b may be 'k+1'")
    group.add_argument("--criterion", choices=("omd", "cmd"),
                       help="objective (omd) or conventional (cmd) approach")
    group.add_argument("--gamma", type=float,
                       help="conventional prior scale (cmd)")
    group.add_argument("--pi", type=float,
                       help="conventional prior activity probability (cmd)")
    group.add_argument("--block", dest="with_block", action="store_const",
                       const=True, help="add the block column to X0")
    group.add_argument("--candidates",
                       help="CSV table of candidate follow-up runs")
    group = parser.add_argument_group("output")
    group.add_argument("--out", dest="out_dir",
                       help="directory for report files")
    group.add_argument("--format", dest="output_format",
                       choices=("csv", "json"), help="report file format")
    group.add_argument("--config", help="JSON config file")
    group.add_argument("--seed", type=int, help="random seed")
    group.add_argument("-v", "--verbose", action="store_true",
                       help="log debugging details")
    group.add_argument("-q", "--quiet", action="store_true",
                       help="log warnings and errors only")


def _search(parser):
    group = parser.add_argument_group("search")
    group.add_argument("--n-star", type=int, help="number of follow-up runs")
    group.add_argument("--top-k", type=int, help="designs reported")
    group.add_argument("--prob-floor", type=float,
                       help="ignore models below this probability")
    group.add_argument("--exchange", action="store_const", const=True,
                       help="coordinate exchange search (not exhaustive)")
    group.add_argument("--starts", dest="exchange_starts", type=int,
                       help="random starts of the exchange search")
    group.add_argument("--threads", type=int, help="search threads")
    group.add_argument("--chunk-size", type=int,
                       help="designs evaluated at once")
    group.add_argument("--max-designs", type=int,
                       help="limit of the exhaustive search")
    group.add_argument("--single-runs", action="store_const", const=True,
                       help="report the criterion of every candidate run")


def build_parser():
    """Return the argparse.ArgumentParser of the obayes command."""
    parser = argparse.ArgumentParser(
        prog="obayes", description="Objective Bayesian analysis and "
        "follow-up designs for two-level screening experiments.")
    parser.add_argument("--version", action="version",
                        version="%(prog)s " + __version__)
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    sub = commands.add_parser("posterior",
                              help="posterior model probabilities")
    sub.add_argument("design", help="design CSV with factor and y columns")
    _common(sub)

    sub = commands.add_parser("followup", help="rank follow-up designs")
    sub.add_argument("design", help="screening design CSV")
    _common(sub)
    _search(sub)

    sub = commands.add_parser("combined",
                              help="analyse screening and follow-up runs")
    sub.add_argument("design", help="screening design CSV")
    sub.add_argument("followup", help="follow-up runs CSV")
    _common(sub)

    sub = commands.add_parser("diagnostics",
                              help="heterogeneity and contrast reports")
    sub.add_argument("design", help="design CSV")
    sub.add_argument("--followup", help="follow-up runs CSV to combine")
    sub.add_argument("--contrasts", action="store_true",
                     help="require contrast plot data (full factorial)")
    sub.add_argument("--contrast-order", type=int,
                     help="highest contrast order, default k")
    _common(sub)
    return parser


FLAGS = ("interaction_order", "prior", "criterion", "gamma", "pi",
         "with_block", "candidates", "out_dir", "output_format", "seed",
         "n_star", "top_k", "prob_floor", "exchange", "exchange_starts",
         "threads", "chunk_size", "max_designs", "single_runs")


def _input(name):
    """Return name, or the bundled data file of that name."""
    if path.exists(name) or path.dirname(name):
        return name
    try:
        return util.data_file(name)
    except ObayesError:
        return name


def _experiment(filename, config):
    design = util.read_design(_input(filename))
    candidates = None
    if config.candidates is not None:
        candidates = util.read_candidates(_input(config.candidates),
                                          design.names)
    return Experiment(design, config, candidates)


def _emit(config, name, frame, title, probabilities=(), scores=()):
    print("%s\n%s" % (title, util.format_table(frame, probabilities,
                                               scores)))
    print()
    if config.out_dir is not None:
        util.write_report(frame, config.out_dir, name, config.output_format)


def _emit_dict(config, name, data, title):
    print(title)
    for (key, value) in data.items():
        if isinstance(value, float):
            print("  %-20s %.2f" % (key, value))
        else:
            print("  %-20s %s" % (key, value))
    print()
    if config.out_dir is not None:
        util.write_report_dict(data, config.out_dir, name)


def _posterior_reports(experiment, suffix=""):
    config = experiment.config
    posterior = experiment.posterior()
    frame = posterior.to_frame()
    _emit(config, "posterior" + suffix, frame.head(TOP_MODELS),
          "Top models (%s, prior %s)" % (posterior.approach, posterior.prior),
          probabilities=("posterior_prob",), scores=("log_bf",))
    if config.out_dir is not None:
        util.write_report(frame, config.out_dir, "posterior_all" + suffix,
                          config.output_format)
    _emit(config, "activity" + suffix, experiment.activity_frame(),
          "Factor activity", probabilities=("activity",))


def cmd_posterior(args, config):
    experiment = _experiment(args.design, config)
    _posterior_reports(experiment)


def cmd_followup(args, config):
    experiment = _experiment(args.design, config)
    report = experiment.followup_report()
    _emit(config, "followup", report,
          "Top follow-up designs (%s, n*=%d)"
          % (config.criterion.upper(), config.n_star), scores=("score",))
    if config.single_runs:
        _emit(config, "single_runs", experiment.single_runs(),
              "Criterion of single runs", scores=("score",))


def _combined(experiment, filename):
    followup = util.read_followup(_input(filename), experiment.design.names,
                                  experiment.candidates)
    return experiment.combine(followup)


def _heterogeneity_delta(before, after):
    (first, second) = (before.heterogeneity(), after.heterogeneity())
    return {
        "shannon_before": first.shannon_normalized,
        "shannon_after": second.shannon_normalized,
        "shannon_delta": second.shannon_normalized - first.shannon_normalized,
        "cv_before": first.cv_factors,
        "cv_after": second.cv_factors,
        "cv_delta": second.cv_factors - first.cv_factors,
    }


def cmd_combined(args, config):
    screening = _experiment(args.design, config.updated(with_block=False))
    combined = _combined(screening, args.followup)
    _posterior_reports(combined, "_combined")
    _emit_dict(config, "heterogeneity",
               _heterogeneity_delta(screening, combined),
               "Heterogeneity, screening -> combined")


def cmd_diagnostics(args, config):
    if args.followup is not None:
        config = config.updated(with_block=False)
    experiment = _experiment(args.design, config)
    if args.followup is not None:
        combined = _combined(experiment, args.followup)
        data = _heterogeneity_delta(experiment, combined)
        data["model_count"] = combined.heterogeneity().model_count
    else:
        data = experiment.heterogeneity().to_dict()
    _emit_dict(config, "heterogeneity", data, "Heterogeneity")
    if args.contrasts or experiment.design.is_full_factorial():
        _emit(config, "contrasts", experiment.contrasts(args.contrast_order),
              "Contrasts", scores=("contrast", "position", "quantile"))


COMMANDS = {
    "posterior": cmd_posterior,
    "followup": cmd_followup,
    "combined": cmd_combined,
    "diagnostics": cmd_diagnostics,
}


def main(argv=None):
    """Run the obayes command line; return the exit status."""
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)
    flags = dict((name, getattr(args, name, None)) for name in FLAGS)
    try:
        config = build_config(args.config, flags)
        COMMANDS[args.command](args, config)
    except ObayesError as err:
        logger.error("%s", err)
        return err.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
