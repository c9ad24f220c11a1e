"""Model parameter bundle shared by pricing, dataset generation and calibration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import DataError
from .kernels import DEFAULT_DELTA, KernelParams
from .levy_special import StableParams, SubordinatorParams

#: Listed VIX maturities in days, ascending.
STANDARD_MATURITIES = (20, 48, 100, 258)
#: Spot VIX level on the calibration date, in volatility units.
SPOT_I = 0.1793
FIXED_C = 0.8575


def nearest_maturity_index(days: float, maturities: Sequence[float] = STANDARD_MATURITIES) -> int:
    """Index of the nearest listed maturity; ties go to the shorter one."""
    best, best_gap = 0, float("inf")
    for i, m in enumerate(maturities):
        gap = abs(days - m)
        if gap < best_gap:
            best, best_gap = i, gap
    return best


@dataclass(frozen=True)
class ModelParams:
    """Calibratable vector (a, b, d, kappa, r) with the fixed constants.

    ``r`` is either one remainder shared by every maturity or a tuple with
    one entry per element of ``maturities``.
    """

    a: float
    b: float
    d: float
    kappa: float
    r: float | tuple[float, ...] = 0.0
    c: float = FIXED_C
    alpha: float = 1.715
    zeta: float = 0.01
    delta: float = DEFAULT_DELTA
    maturities: tuple[int, ...] = field(default=STANDARD_MATURITIES)

    def __post_init__(self):
        if isinstance(self.r, list):
            object.__setattr__(self, "r", tuple(self.r))
        if isinstance(self.r, tuple) and len(self.r) != len(self.maturities):
            raise DataError(f"{len(self.r)} remainders for {len(self.maturities)} maturities")

    def subordinator(self) -> SubordinatorParams:
        return SubordinatorParams(self.a, self.b, self.c)

    def kernel(self) -> KernelParams:
        return KernelParams(self.d, self.kappa, self.delta)

    def stable(self) -> StableParams:
        return StableParams(self.alpha, self.zeta)

    def remainder(self, maturity_days: float) -> float:
        if not isinstance(self.r, tuple):
            return float(self.r)
        return float(self.r[nearest_maturity_index(maturity_days, self.maturities)])

    def to_dict(self) -> dict:
        out = asdict(self)
        out["r"] = list(self.r) if isinstance(self.r, tuple) else self.r
        out["maturities"] = list(self.maturities)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        data = dict(data)
        if "maturities" in data:
            data["maturities"] = tuple(int(m) for m in data["maturities"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise DataError(f"bad parameter record: {exc}") from None

    @classmethod
    def load(cls, path) -> "ModelParams":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        # calibration result files nest the vector under "theta"
        return cls.from_dict(data.get("theta", data))


#: Reference calibration on the 2 Jan 2025 VIX put panel.
REFERENCE_PARAMS = ModelParams(
    a=0.049762,
    b=0.849782,
    d=0.769302,
    kappa=7.798968,
    r=(0.00198, -0.001292, -0.006008, -0.012427),
)
