"""Baselines, full model specifications, count series and validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from .jumprate import JumpRate
from .kernels import PeriodicKernel, season_slot
from .network import NetworkSpec

PERIODICITY_TYPES = ("I", "II")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PeriodicBaseline:
    """Per-season baseline pre-intensities ``mu_v``, stored as a (p, d) array.

    ``shared`` records that all nodes carry the same value in each season,
    which lets the estimator fit one parameter per season.
    """

    values: np.ndarray
    shared: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ConfigurationError("baseline values must have shape (p, d)")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def constant(cls, value: float, d: int, p: int = 1) -> "PeriodicBaseline":
        return cls(np.full((p, d), float(value)), shared=True)

    @property
    def period(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def at(self, times) -> np.ndarray:
        return self.values[season_slot(np.asarray(times).ravel(), self.period)]

    def to_dict(self) -> dict:
        return {"kind": "periodic", "values": self.values.tolist(), "shared": self.shared}


@dataclass(frozen=True, eq=False)
class TrigBaseline:
    """``mu_t = const + sum_j sin[j] sin(2 pi j t/P) + cos[j] cos(2 pi j t/P)``."""

    period: float
    const: np.ndarray
    sin: np.ndarray
    cos: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.const, dtype=float))
        s = np.asarray(self.sin, dtype=float).reshape(-1, c.size)
        k = np.asarray(self.cos, dtype=float).reshape(-1, c.size)
        if s.shape != k.shape:
            raise ConfigurationError("sin and cos baseline terms must have the same shape")
        if not self.period > 0:
            raise ConfigurationError("period must be positive")
        object.__setattr__(self, "period", float(self.period))
        for name, arr in (("const", c), ("sin", s), ("cos", k)):
            object.__setattr__(self, name, _frozen(arr))

    @property
    def d(self) -> int:
        return self.const.size

    @property
    def harmonics(self) -> int:
        return self.sin.shape[0]

    def at(self, times) -> np.ndarray:
        t = np.asarray(times, dtype=float).ravel()
        j = np.arange(1, self.harmonics + 1)
        ang = 2 * np.pi * np.outer(t, j) / self.period
        return self.const + np.sin(ang) @ self.sin + np.cos(ang) @ self.cos

    def to_dict(self) -> dict:
        return {"kind": "trig", "period": self.period, "const": self.const.tolist(),
                "sin": self.sin.tolist(), "cos": self.cos.tolist()}


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Complete definition of a periodic Poisson autoregression.

    Construction only checks types; use :func:`validate_model` (or
    :meth:`require_valid`) for the structural invariants.

    Attributes:
        d: Number of nodes.
        period: Integer period ``p`` (or a real period for trigonometric
            parametrisations).
        baseline: :class:`PeriodicBaseline` or :class:`TrigBaseline`.
        kernel: Any :class:`PeriodicKernel`.
        jump_rate: The map ``psi``.
        periodicity: ``"I"`` (kernel indexed by the current time) or ``"II"``
            (indexed by the time of the past event).
    """

    d: int
    period: float
    baseline: object
    kernel: PeriodicKernel
    jump_rate: JumpRate = field(default_factory=JumpRate.identity)
    periodicity: str = "I"

    def __post_init__(self):
        per = str(self.periodicity).upper().replace("TYPE", "").strip()
        if per not in PERIODICITY_TYPES:
            raise ConfigurationError(f"unknown periodicity type {self.periodicity!r}")
        object.__setattr__(self, "periodicity", per)
        if isinstance(self.period, float) and self.period.is_integer():
            object.__setattr__(self, "period", int(self.period))

    @property
    def integer_period(self) -> bool:
        return float(self.period).is_integer()

    @property
    def p(self) -> int:
        if not self.integer_period:
            raise ConfigurationError("model has a non-integer period")
        return int(self.period)

    @property
    def network(self) -> NetworkSpec | None:
        return getattr(self.kernel, "network", None)

    def baseline_at(self, times) -> np.ndarray:
        return self.baseline.at(times)

    def require_valid(self) -> "ModelSpec":
        problems = validate_model(self).violations
        if problems:
            raise ConfigurationError("invalid model: " + "; ".join(problems))
        return self

    def replace(self, **changes) -> "ModelSpec":
        fields = dict(d=self.d, period=self.period, baseline=self.baseline, kernel=self.kernel,
                      jump_rate=self.jump_rate, periodicity=self.periodicity)
        fields.update(changes)
        return ModelSpec(**fields)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_model(spec: ModelSpec) -> ValidationReport:
    """List every broken invariant of ``spec`` without raising."""
    out = []
    kern = spec.kernel
    base = spec.baseline
    if spec.d < 1:
        out.append("dimension: d must be positive")
    if not spec.period > 0:
        out.append("period: must be positive")
    if kern.d != spec.d:
        out.append(f"kernel dimension {kern.d} does not match d={spec.d}")
    if getattr(base, "d", spec.d) != spec.d:
        out.append(f"baseline dimension {base.d} does not match d={spec.d}")

    if spec.integer_period:
        if not kern.integer_period or int(kern.period) != spec.p:
            out.append(f"kernel period {kern.period} does not match p={spec.period}")
        if isinstance(base, PeriodicBaseline) and base.period != spec.p:
            out.append(f"baseline length: {base.period} seasons given, p={spec.p} required")
    elif isinstance(base, PeriodicBaseline) or kern.kind != "trig_exppoly":
        out.append("non-integer period requires trigonometric kernel and baseline")
    if isinstance(base, TrigBaseline) and abs(base.period - float(spec.period)) > 1e-12:
        out.append("baseline period does not match the model period")

    net = getattr(kern, "network", None)
    if net is not None:
        out.extend(net.violations())
        if net.d != spec.d:
            out.append(f"network size {net.d} does not match d={spec.d}")

    if isinstance(base, PeriodicBaseline):
        vals = base.values
        if not np.all(np.isfinite(vals)):
            out.append("baseline has non-finite entries")
        elif spec.jump_rate.is_linear and np.any(vals < 0):
            out.append("baseline must be nonnegative under the identity jump rate")
        if base.shared and vals.size and not np.all(vals == vals[:, :1]):
            out.append("shared baseline differs across nodes within a season")
    return ValidationReport(out)


@dataclass(frozen=True, eq=False)
class CountSeries:
    """Observed counts ``Y_t`` for ``t = t0, ..., t0 + T - 1``.

    Attributes:
        counts: (T, d) nonnegative integers.
        intensities: Optional (T, d) intensity trace.
        t0: Absolute index of the first row, which fixes season alignment.
        names: Optional node labels.
    """

    counts: np.ndarray
    intensities: np.ndarray | None = None
    t0: int = 1
    names: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.counts)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2:
            raise ConfigurationError("counts must be a (T, d) array")
        if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(y != np.round(y)):
            raise ConfigurationError("counts must be nonnegative integers")
        object.__setattr__(self, "counts", _frozen(y, np.int64))
        if self.intensities is not None:
            lam = np.asarray(self.intensities, dtype=float).reshape(y.shape)
            if np.any(lam < 0):
                raise ConfigurationError("intensities must be nonnegative")
            object.__setattr__(self, "intensities", _frozen(lam))
        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != y.shape[1]:
                raise ConfigurationError("one name per node is required")
            object.__setattr__(self, "names", names)

    @property
    def T(self) -> int:
        return self.counts.shape[0]

    @property
    def d(self) -> int:
        return self.counts.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.t0, self.t0 + self.T)

    def window(self, start: int, stop: int) -> "CountSeries":
        """Rows with absolute times in ``[start, stop)``."""
        a, b = start - self.t0, stop - self.t0
        lam = None if self.intensities is None else self.intensities[a:b]
        return CountSeries(self.counts[a:b], lam, start, self.names)
