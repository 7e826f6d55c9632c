"""Exception types shared across the package."""

from __future__ import annotations


class NHSenseError(Exception):
    """Base class for all package errors."""


class ParameterError(NHSenseError, ValueError):
    """Invalid physical parameters or inconsistent matrix shapes."""


class ConditioningError(NHSenseError):
    """A computation would exceed the numerical conditioning budget."""


class UnstableDynamicsError(NHSenseError):
    """The linear dynamics has no steady state.

    Parameters
    ----------
    message : str
        Human readable description.
    abscissa : float
        Largest real part of the offending generator's spectrum.
    """

    def __init__(self, message: str, abscissa: float = float("nan")):
        super().__init__(message)
        self.abscissa = abscissa


class ZeroPhotonError(NHSenseError, ValueError):
    """The per-photon figure of merit is undefined because no photons are driven."""


class DivergentSeriesError(NHSenseError):
    """A perturbation series was requested outside its radius of convergence."""


class ConvergenceError(NHSenseError):
    """An iterative or time-stepping procedure failed to converge."""


class ConfigError(NHSenseError):
    """A configuration file could not be parsed or failed schema validation.

    Parameters
    ----------
    message : str
        What went wrong.
    key : str, optional
        Dotted key path (``"sensor.kappa"``) the error refers to.
    line : int, optional
        1-based line number in the source file.
    """

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        text = f"{message} ({', '.join(where)})" if where else message
        super().__init__(text)
