"""
Exponent Sets

This module contains the ExponentSet record (p1, p2, alpha1, beta1, alpha2,
beta2) of the system

    -Delta_p1 u + u^(p1-1) = u^alpha1 + v^beta1
    -Delta_p2 v + v^(p2-1) = u^alpha2 + v^beta2

with zero normal derivatives, and the validation of its exponent regime.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

from collections import namedtuple

from pyenclose.errors import ConfigurationError

_FIELDS_ = ["p1", "p2", "alpha1", "beta1", "alpha2", "beta2"]

RegimeCheck = namedtuple("RegimeCheck", ["label", "value", "lower", "upper", "passed"])

ValidationReport = namedtuple(
    "ValidationReport", ["checks", "valid", "cooperative", "competitive", "advisories"]
)


class ExponentSet(namedtuple("ExponentSet", _FIELDS_)):
    """
    The exponents (p1, p2, alpha1, beta1, alpha2, beta2) of the system

    Both p-Laplacian exponents must exceed 1; the remaining constraints are
    reported by 'validate_exponents' rather than enforced here.
    """

    __slots__ = ()

    def __new__(cls, p1, p2, alpha1, beta1, alpha2, beta2):
        values = [float(x) for x in (p1, p2, alpha1, beta1, alpha2, beta2)]
        for name, p in zip(_FIELDS_[:2], values[:2]):
            if not p > 1:
                raise ConfigurationError("{} must be greater than 1, got {}".format(name, p))
        return super(ExponentSet, cls).__new__(cls, *values)

    def p(self, i):
        """The p-Laplacian exponent of equation i (1 or 2)"""
        return self.p1 if i == 1 else self.p2

    def coupling(self, i):
        """The pair (alpha_i, beta_i) of equation i"""
        return (self.alpha1, self.beta1) if i == 1 else (self.alpha2, self.beta2)

    @property
    def cooperative(self):
        return min(self.alpha2, self.beta1) > 0

    @property
    def competitive(self):
        return min(self.alpha2, self.beta1) < 0

    @property
    def gamma1(self):
        return max(-self.alpha1, -self.beta1)

    @property
    def gamma2(self):
        return max(-self.alpha2, -self.beta2)

    def gamma_hat(self, i):
        """
        max{-gamma1 alpha_i / (p1 - 1), -gamma2 beta_i / (p2 - 1)}

        Only defined (not None) when alpha2 and beta1 are both negative.
        """
        if not (self.alpha2 < 0 and self.beta1 < 0):
            return None
        alpha, beta = self.coupling(i)
        return max(
            -self.gamma1 * alpha / (self.p1 - 1), -self.gamma2 * beta / (self.p2 - 1)
        )

    @property
    def gamma_hat1(self):
        return self.gamma_hat(1)

    @property
    def gamma_hat2(self):
        return self.gamma_hat(2)

    def swapped(self):
        """
        The same system with the roles of u and v exchanged
        """
        return ExponentSet(self.p2, self.p1, self.beta2, self.alpha2, self.beta1, self.alpha1)

    def todict(self):
        return dict(zip(_FIELDS_, self))


def _check_(label, value, lower, upper):
    return RegimeCheck(label, value, lower, upper, lower < value < upper)


def validate_exponents(e, ndim=None):
    """
    Check the exponent regime of an ExponentSet

    Parameters:
        e (ExponentSet): The exponents to check
        ndim (int): Optional spatial dimension N, enabling the p_i < N advisory

    Returns:
        ValidationReport: the four interval checks with pass/fail, the overall
        verdict, the cooperative/competitive flags and a list of advisories
    """
    checks = (
        _check_("-1 < alpha1 < 0", e.alpha1, -1.0, 0.0),
        _check_("-1 < beta2 < 0", e.beta2, -1.0, 0.0),
        _check_("-1 < beta1 < p1 - 1", e.beta1, -1.0, e.p1 - 1),
        _check_("-1 < alpha2 < p2 - 1", e.alpha2, -1.0, e.p2 - 1),
    )
    advisories = []
    if ndim is not None:
        for name, p in (("p1", e.p1), ("p2", e.p2)):
            if p >= ndim:
                advisories.append(
                    "{} = {} is not below the dimension N = {}".format(name, p, ndim)
                )
    return ValidationReport(
        checks=checks,
        valid=all(c.passed for c in checks),
        cooperative=e.cooperative,
        competitive=e.competitive,
        advisories=tuple(advisories),
    )


def failed_checks(report):
    """
    Return the labels of the failed checks in a ValidationReport
    """
    return [c.label for c in report.checks if not c.passed]
