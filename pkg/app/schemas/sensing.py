from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from app.core.units import linear_to_db


class CrbMethod(str, Enum):
    GENERAL = "general"
    SPECIAL = "anchored"
    ALIGNED = "aligned"
    NUMERIC_ORACLE = "numeric_oracle"


@dataclass(frozen=True)
class FisherBlocks:
    f_mu_mu: float
    f_mu_beta: np.ndarray
    f_beta_beta: np.ndarray

    @property
    def schur(self) -> float:
        """Information left on the angle after eliminating the gain."""
        if self.f_beta_beta[0, 0] <= 0:
            return self.f_mu_mu
        correction = self.f_mu_beta @ np.linalg.solve(self.f_beta_beta, self.f_mu_beta)
        return float(self.f_mu_mu - correction)


@dataclass(frozen=True)
class CrbReport:
    crb: float
    method: CrbMethod
    blocks: Optional[FisherBlocks] = None

    @property
    def is_degenerate(self) -> bool:
        return bool(np.isinf(self.crb))

    @property
    def crb_db(self) -> float:
        return linear_to_db(self.crb)
