# Utility functions for obayes.
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
"""Reading designs and writing reports for obayes."""
import json
import logging
from os import path
import os

import numpy as np
import pandas as pd

from obayes.exception import ValidationError
from obayes.factorial import CandidateTable, DesignTable

__all__ = (
    "parse_level", "read_design", "read_candidates", "read_followup",
    "data_file", "write_report", "write_report_dict", "write_json",
    "format_table",
)

logger = logging.getLogger(__name__)

RESPONSE = "y"
BLOCK = "block"
RUN = "run"
RESERVED = (RESPONSE, BLOCK, RUN)

LEVELS = {
    "-1": -1.0, "-": -1.0, "-1.0": -1.0,
    "1": 1.0, "+1": 1.0, "+": 1.0, "1.0": 1.0, "+1.0": 1.0,
}

DATADIR = path.join(path.dirname(__file__), "data")

# console precision
PROBABILITY_DIGITS = 2
SCORE_DIGITS = 4


def data_file(name):
    """Return the path of a bundled data file, e.g. "reactor_screening.csv".
    """
    filename = path.join(DATADIR, name)
    if not path.isfile(filename):
        raise ValidationError("no bundled data file %r" % (name,))
    return filename


def parse_level(cell, row=None, column=None):
    """Return -1.0 or 1.0 for a factor cell such as "-1", "+", "1".

    row -- 1-based data row for error messages.
    column -- Column name for error messages.

    """
    text = str(cell).strip()
    try:
        return LEVELS[text]
    except KeyError:
        raise ValidationError("factor level must be -1/+1 (or -/+), got %r"
                              % (text,), row=row, column=column)


def _read_frame(source):
    try:
        frame = pd.read_csv(source, dtype=str, skipinitialspace=True,
                            keep_default_na=False)
    except pd.errors.EmptyDataError:
        return None
    except pd.errors.ParserError as err:
        raise ValidationError("malformed CSV: %s" % err)
    except OSError as err:
        raise ValidationError("cannot read %s: %s" % (source, err.strerror))
    frame.columns = [str(name).strip() for name in frame.columns]
    if len(set(frame.columns)) != len(frame.columns):
        raise ValidationError("duplicate column names")
    return frame


def _levels(frame, names):
    runs = np.empty((len(frame), len(names)))
    for (col, name) in enumerate(names):
        for (row, cell) in enumerate(frame[name]):
            runs[row, col] = parse_level(cell, row + 1, name)
    return runs


def _responses(frame):
    values = np.empty(len(frame))
    for (row, cell) in enumerate(frame[RESPONSE]):
        try:
            values[row] = float(cell)
        except ValueError:
            raise ValidationError("response is not a number: %r" % (cell,),
                                  row=row + 1, column=RESPONSE)
        if not np.isfinite(values[row]):
            raise ValidationError("response is not finite", row=row + 1,
                                  column=RESPONSE)
    return values


def _factor_names(frame):
    return tuple(name for name in frame.columns if name not in RESERVED)


def read_design(source, min_runs=2):
    """Return DesignTable read from a CSV file.

    Every column except y, block and run is a factor coded -1/+1 (or -/+).
    The y column is required, block is optional with two labels.

    source -- File name or file object.
    min_runs -- Smallest number of runs accepted.

    Raise ValidationError with row and column of a malformed cell.

    """
    frame = _read_frame(source)
    if frame is None:
        raise ValidationError("design file is empty")
    if RESPONSE not in frame.columns:
        raise ValidationError("design file needs a %r column" % RESPONSE)
    names = _factor_names(frame)
    if not names:
        raise ValidationError("design file has no factor columns")
    if len(frame) < min_runs:
        raise ValidationError("design needs at least %d runs, got %d"
                              % (min_runs, len(frame)))
    block = None
    if BLOCK in frame.columns:
        block = tuple(frame[BLOCK].str.strip())
    design = DesignTable(_levels(frame, names), _responses(frame), names,
                         block)
    logger.info("read %d runs of %d factors", design.n, design.k)
    return design


def read_candidates(source, names=None):
    """Return CandidateTable read from a CSV file.

    Factor columns as in read_design; an optional run column gives the run
    numbers, else rows are numbered from 1.

    names -- Expected factor names, checked if given.

    """
    frame = _read_frame(source)
    if frame is None or len(frame) == 0:
        raise ValidationError("candidate file is empty")
    found = _factor_names(frame)
    if names is not None and tuple(names) != found:
        raise ValidationError("candidate factors %s do not match design "
                              "factors %s" % (",".join(found),
                                              ",".join(names)))
    if RUN in frame.columns:
        numbers = []
        for (row, cell) in enumerate(frame[RUN]):
            try:
                numbers.append(int(cell))
            except ValueError:
                raise ValidationError("run number is not an integer: %r"
                                      % (cell,), row=row + 1, column=RUN)
    else:
        numbers = range(1, len(frame) + 1)
    return CandidateTable(_levels(frame, found), tuple(numbers), found)


def read_followup(source, names, candidates=None):
    """Return DesignTable of follow-up runs with responses.

    Runs are given by factor columns, or by a run column of candidate run
    numbers. A file without data rows gives a design without runs.

    names -- Factor names of the screening design.
    candidates -- CandidateTable resolving a run column.

    """
    frame = _read_frame(source)
    empty = DesignTable(np.empty((0, len(names))), [], names)
    if frame is None or len(frame) == 0:
        logger.info("follow-up file has no runs")
        return empty
    if RESPONSE not in frame.columns:
        raise ValidationError("follow-up file needs a %r column" % RESPONSE)
    found = _factor_names(frame)
    if found:
        if found != tuple(names):
            raise ValidationError("follow-up factors %s do not match "
                                  "screening factors %s"
                                  % (",".join(found), ",".join(names)))
        runs = _levels(frame, found)
    elif RUN in frame.columns:
        if candidates is None:
            raise ValidationError("run numbers need a candidate table")
        rows = []
        for (row, cell) in enumerate(frame[RUN]):
            try:
                rows.append(candidates.position(int(cell)))
            except (ValueError, ValidationError):
                raise ValidationError("unknown candidate run %r" % (cell,),
                                      row=row + 1, column=RUN)
        runs = candidates.runs[rows]
    else:
        raise ValidationError("follow-up file needs factor columns or a "
                              "%r column" % RUN)
    return DesignTable(runs, _responses(frame), tuple(names))


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError("%r is not JSON serializable" % (value,))


def write_json(data, filename):
    """Write data as JSON with full float precision."""
    with open(filename, "w") as fd:
        json.dump(data, fd, indent=2, default=_jsonable)
        fd.write("\n")


def write_report(frame, out_dir, name, output_format="csv"):
    """Write a report frame as out_dir/name.csv or .json; return the path.

    Floats are written with repr precision so files re-parse exactly.

    """
    os.makedirs(out_dir, exist_ok=True)
    filename = path.join(out_dir, "%s.%s" % (name, output_format))
    if output_format == "csv":
        frame.to_csv(filename, index=False)
    elif output_format == "json":
        write_json(frame.to_dict(orient="records"), filename)
    else:
        raise ValidationError("unknown report format %r" % (output_format,))
    logger.info("wrote %s", filename)
    return filename


def format_table(frame, probabilities=(), scores=()):
    """Return a console table of frame.

    probabilities -- Columns shown with 2 decimals.
    scores -- Columns shown with 4 decimals.

    """
    formatters = {}
    for column in probabilities:
        formatters[column] = ("{:.%df}" % PROBABILITY_DIGITS).format
    for column in scores:
        formatters[column] = ("{:.%df}" % SCORE_DIGITS).format
    if frame.empty:
        return "(empty)"
    return frame.to_string(index=False, formatters=formatters)


def write_report_dict(data, out_dir, name):
    """Write a dict report as out_dir/name.json; return the path."""
    os.makedirs(out_dir, exist_ok=True)
    filename = path.join(out_dir, "%s.json" % name)
    write_json(data, filename)
    logger.info("wrote %s", filename)
    return filename
