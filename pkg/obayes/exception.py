# Exceptions for the obayes follow-up design library.
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
"""Exceptions for the obayes follow-up design library."""

__all__ = (
    "ObayesError", "ValidationError", "NumericalError", "ConvergenceError",
    "DegenerateDataError", "DesignSpaceOverflow",
)


class ObayesError(Exception):
    """Base exception class for obayes errors.

    message -- Human readable description of the problem.

    This object has the following attributes:
      message -- The given message.
      exit_code -- Process exit status the command line maps this error to.

    """
    exit_code = 1

    def __init__(self, message):
        """Initialize the ObayesError.

        message -- Human readable description of the problem.

        """
        Exception.__init__(self, message)
        self.message = message

    def __repr__(self):
        """Return representation of an ObayesError."""
        return "<%s: %s>" % (self.__class__.__name__, self)

    def __str__(self):
        """Return string representation of an ObayesError."""
        return self.message


class ValidationError(ObayesError):
    """Exception class for malformed input data or arguments.

    row -- 1-based data row of the offending cell, if known.
    column -- Column name of the offending cell, if known.

    """
    exit_code = 2

    def __init__(self, message, row=None, column=None):
        """Initialize the ValidationError.

        message -- Description of the problem.
        row -- 1-based data row (header excluded) or None.
        column -- Column name or None.

        """
        super(ValidationError, self).__init__(message)
        self.row = row
        self.column = column

    def __str__(self):
        """Return message with the cell position, when known."""
        where = []
        if self.row is not None:
            where.append("row %d" % self.row)
        if self.column is not None:
            where.append("column %r" % self.column)
        if where:
            return "%s (%s)" % (self.message, ", ".join(where))
        return self.message


class NumericalError(ObayesError):
    """Exception class for numerical failures."""
    exit_code = 3


class ConvergenceError(NumericalError):
    """Series summation or quadrature did not converge."""


class DegenerateDataError(NumericalError):
    """Data or matrices too degenerate for the requested computation."""


class DesignSpaceOverflow(ObayesError):
    """Exhaustive follow-up search space exceeds the configured limit.

    count -- Number of candidate designs.
    limit -- Configured maximum.

    """
    exit_code = 4

    def __init__(self, count, limit):
        """Initialize the DesignSpaceOverflow.

        count -- Number of multisets in the search space.
        limit -- The largest number allowed for exhaustive search.

        """
        message = ("%d candidate designs exceed the exhaustive search limit "
                   "of %d; use the exchange search instead" % (count, limit))
        super(DesignSpaceOverflow, self).__init__(message)
        self.count = count
        self.limit = limit
