from typing import List, Optional


class IsacError(Exception):
    """Root of every error raised by the optimizer services."""


class ScenarioError(IsacError, ValueError):
    """
    Invalid scenario or argument: dimension mismatch, bad counts,
    covariance that is not PSD, power budget violations.
    """


class InfeasibleSensingError(IsacError):
    """
    The echo-power threshold cannot be reached even when the whole
    budget drives the sensing beam.
    """

    def __init__(self, gamma_s: float, gamma_max: float):
        self.gamma_s = gamma_s
        self.gamma_max = gamma_max
        super().__init__(
            f"Sensing requirement infeasible: gamma_s={gamma_s:.6g} exceeds "
            f"the all-sensing maximum {gamma_max:.6g}"
        )


class ConfigError(IsacError):
    """
    Configuration could not be parsed or validated.
    `problems` lists every issue found, one entry per violation.
    """

    def __init__(self, message: str, problems: Optional[List[str]] = None):
        self.problems = problems or []
        detail = message
        if self.problems:
            detail = message + "\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(detail)


class OptimizerConsistencyError(IsacError):
    """An internal solver guarantee (ascent, root bracketing) was violated."""


class OutputError(IsacError):
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"Failed to write {path}: {reason}")
