# Special functions for obayes Bayes factors.
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
"""Log-gamma, log-beta and the Gauss hypergeometric function 2F1.

2F1 is summed as a Gauss series on [0, 1). Negative arguments are first
mapped into [0, 1) with a Pfaff transformation, or handed to mpmath when
that series would alternate. Results are carried in log space since the
Bayes factor raises 1 - z to powers of order n.

"""
from dataclasses import dataclass
import math

import mpmath
from scipy.special import betaln, gammaln

from obayes.exception import ConvergenceError, NumericalError, ValidationError

__all__ = (
    "Hyp2F1Args", "log_gamma", "log_beta", "hyp2f1", "log_hyp2f1",
    "log_hyp2f1_extended",
)

SERIES_TOLERANCE = 1e-12
MAX_TERMS = 100000

# rescale running sums before they overflow
RESCALE = 1e250
LOG_RESCALE = math.log(RESCALE)

# decimal digits for mpmath evaluations
EXTENDED_DPS = 40


def _positive(name, value):
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise ValidationError("%s must be a positive finite number, got %r"
                              % (name, value))
    return value


def log_gamma(x):
    """Return log(Gamma(x)) for x > 0.

    Raise ValidationError for nonpositive or non-finite x.

    """
    return float(gammaln(_positive("x", x)))


def log_beta(a, b):
    """Return log(B(a, b)) for a, b > 0.

    Raise ValidationError for nonpositive arguments.

    """
    return float(betaln(_positive("a", a), _positive("b", b)))


@dataclass(frozen=True)
class Hyp2F1Args:
    """Validated arguments of 2F1(a, b; c; z).

    This object has the following attributes:

    a, b, c -- Real parameters; c is not a nonpositive integer.
    z -- Real argument, z < 1.

    """
    a: float
    b: float
    c: float
    z: float

    def __post_init__(self):
        for name in ("a", "b", "c", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError("2F1 parameter %s is not finite" % name)
            object.__setattr__(self, name, value)
        if self.c <= 0 and self.c == int(self.c):
            raise ValidationError("2F1 undefined for c = %g" % self.c)
        if self.z >= 1.0:
            raise ValidationError("2F1 only supported for z < 1, got %g"
                                  % self.z)


def _gauss_series(a, b, c, z):
    """Return (log|S|, sign S) of the Gauss series for 0 <= z < 1."""
    total = 1.0
    term = 1.0
    log_scale = 0.0
    for k in range(1, MAX_TERMS + 1):
        term *= (a + k - 1) * (b + k - 1) / ((c + k - 1) * k) * z
        total += term
        if term == 0.0:
            break
        ratio = abs((a + k) * (b + k) / ((c + k) * (k + 1)) * z)
        if ratio < 1.0:
            # geometric bound on the remaining tail
            tail = abs(term) * ratio / (1.0 - ratio)
            if tail <= SERIES_TOLERANCE * abs(total):
                break
        if abs(total) > RESCALE:
            total /= RESCALE
            term /= RESCALE
            log_scale += LOG_RESCALE
    else:
        raise ConvergenceError("2F1(%g, %g; %g; %g) series did not converge "
                               "in %d terms" % (a, b, c, z, MAX_TERMS))
    if total == 0.0:
        return (-math.inf, 0.0)
    return (log_scale + math.log(abs(total)), math.copysign(1.0, total))


def _log_abs_extended(a, b, c, z, dps=EXTENDED_DPS):
    with mpmath.workdps(dps):
        value = mpmath.hyp2f1(a, b, c, z)
        if value == 0:
            return (-math.inf, 0.0)
        return (float(mpmath.log(abs(value))), 1.0 if value > 0 else -1.0)


def _log_abs_hyp2f1(args):
    """Return (log|2F1|, sign) for validated Hyp2F1Args."""
    (a, b, c, z) = (args.a, args.b, args.c, args.z)
    if z == 0.0:
        return (0.0, 1.0)
    if z > 0.0:
        return _gauss_series(a, b, c, z)
    # Pfaff: 2F1(a, b; c; z) = (1 - z)^(-a) 2F1(a, c - b; c; z / (z - 1)).
    # 2F1 is symmetric in a and b; the series needs both parameters
    # non-negative, else its terms alternate and cancel.
    if not (a >= 0.0 and c - b >= 0.0):
        if b >= 0.0 and c - a >= 0.0:
            (a, b) = (b, a)
        else:
            return _log_abs_extended(a, b, c, z)
    w = z / (z - 1.0)
    (log_abs, sign) = _gauss_series(a, c - b, c, w)
    return (log_abs - a * math.log1p(-z), sign)


def hyp2f1(a, b, c, z):
    """Return the Gauss hypergeometric function 2F1(a, b; c; z) for z < 1.

    Raise ValidationError for invalid parameters.
    Raise ConvergenceError, if the series does not converge.

    """
    (log_abs, sign) = _log_abs_hyp2f1(Hyp2F1Args(a, b, c, z))
    if sign == 0.0:
        return 0.0
    return sign * math.exp(log_abs)


def log_hyp2f1(a, b, c, z):
    """Return log(2F1(a, b; c; z)) for z < 1.

    Raise NumericalError, if 2F1 is not positive.
    Raise ConvergenceError, if the series does not converge.

    """
    (log_abs, sign) = _log_abs_hyp2f1(Hyp2F1Args(a, b, c, z))
    if sign <= 0.0:
        raise NumericalError("2F1(%g, %g; %g; %g) is not positive"
                             % (a, b, c, z))
    return log_abs


def log_hyp2f1_extended(a, b, c, z, dps=EXTENDED_DPS):
    """Return log(2F1(a, b; c; z)) evaluated with mpmath.

    Used where the series is too slow, e.g. z far below -1e6.

    dps -- Decimal digits of working precision.

    """
    args = Hyp2F1Args(a, b, c, z)
    (log_abs, sign) = _log_abs_extended(args.a, args.b, args.c, args.z, dps)
    if sign <= 0.0:
        raise NumericalError("2F1(%g, %g; %g; %g) is not positive"
                             % (a, b, c, z))
    return log_abs
