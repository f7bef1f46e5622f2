"""Jump-rate functions mapping pre-intensities to Poisson intensities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import ConfigurationError

KINDS = ("identity", "softplus", "softplus_offset", "tabulated")


@dataclass(frozen=True)
class JumpRate:
    """Increasing Lipschitz map ``psi`` applied componentwise to pre-intensities.

    Use the constructors :meth:`identity`, :meth:`softplus`,
    :meth:`softplus_offset` and :meth:`tabulated` rather than the raw fields.
    The tabulated variant interpolates linearly between knots and is constant
    outside of them.
    """

    kind: str = "identity"
    offset: float = 0.0
    table_x: tuple = field(default=(), repr=False)
    table_y: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown jump rate {self.kind!r}")
        if self.offset < 0:
            raise ConfigurationError("jump-rate floor must be nonnegative")
        if self.kind == "tabulated":
            x = np.asarray(self.table_x, dtype=float)
            y = np.asarray(self.table_y, dtype=float)
            if x.ndim != 1 or x.shape != y.shape or x.size < 2:
                raise ConfigurationError("tabulated jump rate needs two equal-length tables")
            if np.any(np.diff(x) <= 0):
                raise ConfigurationError("tabulated knots must be strictly increasing")
            if np.any(np.diff(y) < 0) or np.any(y < 0):
                raise ConfigurationError("tabulated values must be nonnegative and nondecreasing")

    @classmethod
    def identity(cls) -> "JumpRate":
        return cls("identity")

    @classmethod
    def softplus(cls) -> "JumpRate":
        return cls("softplus")

    @classmethod
    def softplus_offset(cls, floor: float = 0.01) -> "JumpRate":
        return cls("softplus_offset", offset=float(floor))

    @classmethod
    def tabulated(cls, x, y) -> "JumpRate":
        return cls("tabulated", table_x=tuple(map(float, x)), table_y=tuple(map(float, y)))

    @property
    def floor(self) -> float:
        """Lower bound of the output (on nonnegative inputs for ``identity``)."""
        if self.kind == "tabulated":
            return float(min(self.table_y))
        return self.offset if self.kind == "softplus_offset" else 0.0

    @property
    def lipschitz(self) -> float:
        if self.kind == "tabulated":
            x = np.asarray(self.table_x)
            y = np.asarray(self.table_y)
            return float(np.max(np.diff(y) / np.diff(x)))
        return 1.0

    @property
    def differentiable(self) -> bool:
        return self.kind != "tabulated"

    @property
    def is_linear(self) -> bool:
        return self.kind == "identity"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x
        if self.kind == "tabulated":
            return np.interp(x, self.table_x, self.table_y)
        out = np.logaddexp(0.0, x)
        return out + self.offset if self.kind == "softplus_offset" else out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "tabulated":
            raise ConfigurationError("tabulated jump rate has no analytic derivative")
        return expit(x)

    def inverse(self, y):
        """Right inverse, used for the baseline initialisation of the MLE."""
        y = np.asarray(y, dtype=float)
        if self.kind == "identity":
            return y
        if self.kind == "tabulated":
            return np.interp(y, self.table_y, self.table_x)
        z = y - self.offset
        if np.any(z <= 0):
            raise ConfigurationError("value below the jump-rate floor has no preimage")
        # log(expm1(z)) without overflow
        return z + np.log(-np.expm1(-z))

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "softplus_offset":
            out["floor"] = self.offset
        if self.kind == "tabulated":
            out["x"] = list(self.table_x)
            out["y"] = list(self.table_y)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "JumpRate":
        kind = data.get("kind", "identity").replace("-", "_")
        if kind == "softplus_offset":
            return cls.softplus_offset(data.get("floor", 0.01))
        if kind == "tabulated":
            return cls.tabulated(data["x"], data["y"])
        return cls(kind)

    @classmethod
    def from_name(cls, name: str, floor: float = 0.01) -> "JumpRate":
        name = name.replace("-", "_")
        if name == "softplus_offset":
            return cls.softplus_offset(floor)
        return cls(name)
