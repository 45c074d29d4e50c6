"""
Exception and Warning Classes

Errors shared by the solver, spectral, barrier and enclosure modules.  Each
CLI exit status maps onto one family of these classes.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""


class ConfigurationError(ValueError):
    """Invalid grid, exponent, tolerance or recipe parameters"""


class RecipeMismatchError(ConfigurationError):
    """Exponent signs are incompatible with the requested barrier recipe"""


class ConfigSyntaxError(ConfigurationError):
    """Malformed configuration text"""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = "line {}: {}".format(lineno, message)
        super(ConfigSyntaxError, self).__init__(message)
        self.lineno = lineno


class PreconditionError(ValueError):
    """An operation was called with inputs violating its preconditions"""


class IterationLimitError(RuntimeError):
    """
    An iterative solve ran out of iterations

    The best iterate found is attached as the 'best' attribute.
    """

    def __init__(self, message, best=None):
        super(IterationLimitError, self).__init__(message)
        self.best = best


class CertificateError(RuntimeError):
    """A requested certificate could not be produced"""


class SingularityError(ArithmeticError):
    """A nonpositive base was raised to a negative power"""

    def __init__(self, message, node=None, coordinates=None):
        if node is not None:
            message = "{} at node {} {}".format(message, node, coordinates)
        super(SingularityError, self).__init__(message)
        self.node = node
        self.coordinates = coordinates


class EnclosureError(RuntimeError):
    """A converged solution left the barrier rectangle"""

    def __init__(self, message, solution=None):
        super(EnclosureError, self).__init__(message)
        self.solution = solution


class InternalError(RuntimeError):
    """A state that the algorithms should never reach"""


class AdvisoryWarning(Warning):
    """Parameters are accepted but lie outside the analysed regime"""


class ConvergenceWarning(Warning):
    """An outer iteration stopped before reaching its tolerance"""


class CertificateWarning(Warning):
    """A certificate component did not pass"""
