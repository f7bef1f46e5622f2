"""Parameter layouts: the map between a flat vector and a model specification.

A layout fixes everything that is not estimated (dimension, period, decay
rates or number of lags, network, jump rate) and describes how the free
parameters enter the pre-intensity

    eta[t, i] = sum_b Hmu[t, b] mu_b[i] + sum_{b, c} (M[b, c] F[t, b, c])_i

where ``Hmu`` is a time basis for the baseline, ``F`` are data features
(auxiliary processes or lagged counts, weighted by the kernel time basis) and
``M[b, c]`` is a d x d matrix (``general``) or ``a I + b W`` (``network``).

Vector order: all baseline blocks first (``mu_1, ..., mu_p`` for a seasonal
basis), then for each kernel basis block the channel matrices in order
(``G^(1)_v, ..., G^(q)_v`` row-major, or ``a_1..a_q, b_1..b_q`` for a
network structure).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core.jumprate import JumpRate
from ..core.kernels import (ExpPolyKernel, GeneralKernel, NetworkKernel, TrigExpPolyKernel,
                            decay_rates, season_slot)
from ..core.model import ModelSpec, PeriodicBaseline, TrigBaseline
from ..core.network import NetworkSpec
from ..errors import ConfigurationError

BASES = ("season", "trig", "constant")


def time_basis(kind: str, times, period: float, harmonics: int = 1) -> np.ndarray:
    """``(T, B)`` time basis evaluated at absolute times.

    ``season``: one-hot of ``((t - 1) mod p) + 1``; ``trig``:
    ``[1, sin(2 pi j t / P)..., cos(2 pi j t / P)...]``; ``constant``: ones.
    """
    t = np.asarray(times).ravel()
    if kind == "season":
        p = int(period)
        out = np.zeros((t.size, p))
        out[np.arange(t.size), season_slot(t, p)] = 1.0
        return out
    if kind == "trig":
        j = np.arange(1, harmonics + 1)
        ang = 2 * np.pi * np.outer(t.astype(float), j) / float(period)
        return np.hstack([np.ones((t.size, 1)), np.sin(ang), np.cos(ang)])
    if kind == "constant":
        return np.ones((t.size, 1))
    raise ConfigurationError(f"unknown time basis {kind!r}")


@dataclass(frozen=True, eq=False)
class Layout:
    """Description of a parametric model family.

    Attributes:
        d: Number of nodes.
        period: Period ``p`` (real for trigonometric bases).
        channel: ``"exp"`` (exponential-polynomial kernel with ``q`` terms)
            or ``"lags"`` (finite kernel with ``q`` lags).
        q: Number of exponentials or lags.
        tau: Characteristic time (``exp`` channel only).
        family: Exponent family, ``"odd"`` or ``"all"``.
        structure: ``"general"`` (free d x d matrices) or ``"network"``.
        network: Required for the network structure.
        kernel_basis: Time variation of the kernel coefficients.
        mu_basis: Time variation of the baseline.
        harmonics: Number of harmonics of trigonometric bases.
        mu_per_node: Separate baseline per node instead of a shared scalar.
        periodicity: ``"I"`` or ``"II"``.
        jump_rate: The known jump rate.
        coef_bound: Box bound on kernel coefficients.
        mu_bound: Box bound on baseline coefficients.
        fixed_kernel: Keep the kernel at zero (baseline-only fit).
    """

    d: int
    period: float
    channel: str = "exp"
    q: int = 1
    tau: float = 1.0
    family: str = "odd"
    structure: str = "general"
    network: NetworkSpec | None = None
    kernel_basis: str = "season"
    mu_basis: str = "season"
    harmonics: int = 1
    mu_per_node: bool = False
    periodicity: str = "I"
    jump_rate: JumpRate = field(default_factory=JumpRate.identity)
    coef_bound: float = 50.0
    mu_bound: float = 50.0
    fixed_kernel: bool = False

    def __post_init__(self):
        if self.channel not in ("exp", "lags"):
            raise ConfigurationError(f"unknown channel {self.channel!r}")
        if self.structure not in ("general", "network"):
            raise ConfigurationError(f"unknown structure {self.structure!r}")
        if self.structure == "network" and self.network is None:
            raise ConfigurationError("network structure needs a NetworkSpec")
        if self.network is not None and self.network.d != self.d:
            raise ConfigurationError("network size does not match d")
        for b in (self.kernel_basis, self.mu_basis):
            if b not in BASES:
                raise ConfigurationError(f"unknown time basis {b!r}")
        integer = float(self.period).is_integer()
        if not integer and "season" in (self.kernel_basis, self.mu_basis):
            raise ConfigurationError("seasonal bases need an integer period")
        if self.channel == "lags" and self.kernel_basis == "trig":
            raise ConfigurationError("trigonometric coefficients need the exp channel")
        if self.q < 1:
            raise ConfigurationError("q must be at least 1")
        if self.channel == "exp":
            decay_rates(self.q, self.tau, self.family)
        per = str(self.periodicity).upper().replace("TYPE", "").strip()
        if per not in ("I", "II"):
            raise ConfigurationError(f"unknown periodicity {self.periodicity!r}")
        object.__setattr__(self, "periodicity", per)
        if not (self.coef_bound > 0 and self.mu_bound > 0):
            raise ConfigurationError("bounds must be positive")

    # sizes -----------------------------------------------------------------
    def _n_basis(self, kind: str) -> int:
        if kind == "season":
            return int(self.period)
        return 1 + 2 * self.harmonics if kind == "trig" else 1

    @property
    def n_mu_blocks(self) -> int:
        return self._n_basis(self.mu_basis)

    @property
    def n_coef_blocks(self) -> int:
        return self._n_basis(self.kernel_basis)

    @property
    def mu_width(self) -> int:
        return self.d if self.mu_per_node else 1

    @property
    def block_size(self) -> int:
        """Free parameters per kernel basis block."""
        if self.fixed_kernel:
            return 0
        return 2 * self.q if self.structure == "network" else self.q * self.d * self.d

    @property
    def n_mu(self) -> int:
        return self.n_mu_blocks * self.mu_width

    @property
    def size(self) -> int:
        return self.n_mu + self.n_coef_blocks * self.block_size

    @property
    def rates(self) -> np.ndarray:
        return decay_rates(self.q, self.tau, self.family)

    def mu_indices(self, block: int) -> np.ndarray:
        w = self.mu_width
        return np.arange(block * w, (block + 1) * w)

    def coef_indices(self, block: int) -> np.ndarray:
        s = self.block_size
        return self.n_mu + np.arange(block * s, (block + 1) * s)

    def season_indices(self, v: int) -> np.ndarray:
        """Entries of season ``v`` (1-based) for fully seasonal layouts."""
        if self.mu_basis != "season" or self.kernel_basis != "season":
            raise ConfigurationError("season blocks need seasonal baseline and kernel bases")
        return np.concatenate([self.mu_indices(v - 1), self.coef_indices(v - 1)])

    # packing ---------------------------------------------------------------
    def pack(self, mu, coef=None) -> np.ndarray:
        """Flatten structured parameters.

        Args:
            mu: ``(n_mu_blocks, mu_width)`` (broadcastable).
            coef: ``(n_coef_blocks, q, d, d)`` for the general structure or
                ``(n_coef_blocks, 2, q)`` (``a`` then ``b``) for the network one.
        """
        mu = np.broadcast_to(np.asarray(mu, dtype=float), (self.n_mu_blocks, self.mu_width))
        parts = [mu.ravel()]
        if not self.fixed_kernel:
            if self.structure == "network":
                shape = (self.n_coef_blocks, 2, self.q)
            else:
                shape = (self.n_coef_blocks, self.q, self.d, self.d)
            c = np.zeros(shape) if coef is None else np.broadcast_to(np.asarray(coef, float), shape)
            parts.append(c.ravel())
        return np.concatenate(parts)

    def unpack(self, theta):
        """Inverse of :meth:`pack`: ``(mu, coef)``."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ConfigurationError(f"parameter vector must have length {self.size}")
        mu = theta[:self.n_mu].reshape(self.n_mu_blocks, self.mu_width)
        rest = theta[self.n_mu:]
        if self.fixed_kernel:
            coef = np.zeros((self.n_coef_blocks, 2, self.q) if self.structure == "network"
                            else (self.n_coef_blocks, self.q, self.d, self.d))
        elif self.structure == "network":
            coef = rest.reshape(self.n_coef_blocks, 2, self.q)
        else:
            coef = rest.reshape(self.n_coef_blocks, self.q, self.d, self.d)
        return mu, coef

    def coef_matrices(self, coef) -> np.ndarray:
        """``(n_coef_blocks, q, d, d)`` matrices ``M[b, c]``."""
        if self.structure == "network":
            eye = np.eye(self.d)
            w = self.network.W
            return coef[:, 0, :, None, None] * eye + coef[:, 1, :, None, None] * w
        return np.asarray(coef)

    def bounds(self) -> list:
        return ([(-self.mu_bound, self.mu_bound)] * self.n_mu
                + [(-self.coef_bound, self.coef_bound)] * (self.size - self.n_mu))

    def initial(self, grand_mean: float) -> np.ndarray:
        """Zero kernel and baseline ``psi^{-1}(grand_mean)``."""
        mu0 = float(self.jump_rate.inverse(grand_mean))
        mu = np.zeros((self.n_mu_blocks, self.mu_width))
        if self.mu_basis == "trig":
            mu[0] = mu0
        else:
            mu[:] = mu0
        return self.pack(mu)

    # model conversion ------------------------------------------------------
    def to_model(self, theta) -> ModelSpec:
        mu, coef = self.unpack(theta)
        mats = self.coef_matrices(coef)
        d = self.d
        integer = float(self.period).is_integer()
        mu_full = np.broadcast_to(mu, (self.n_mu_blocks, d))
        shared = not self.mu_per_node
        r = self.harmonics
        if self.mu_basis == "season":
            baseline = PeriodicBaseline(np.array(mu_full), shared=shared)
        elif self.mu_basis == "trig":
            baseline = TrigBaseline(self.period, mu_full[0], mu_full[1:1 + r], mu_full[1 + r:])
        elif integer:
            baseline = PeriodicBaseline(np.repeat(mu_full, int(self.period), axis=0), shared=shared)
        else:
            baseline = TrigBaseline(self.period, mu_full[0], np.zeros((0, d)), np.zeros((0, d)))

        if self.channel == "lags":
            if self.kernel_basis == "constant":
                coef = np.repeat(coef, int(self.period), axis=0)
                mats = np.repeat(mats, int(self.period), axis=0)
            if self.structure == "network":
                kernel = NetworkKernel(coef[:, 0, :], coef[:, 1, :], self.network)
            else:
                kernel = GeneralKernel(mats)
        else:
            net = self.network if self.structure == "network" else None
            if self.kernel_basis == "season":
                kernel = ExpPolyKernel(mats, self.tau, self.family, net)
            elif self.kernel_basis == "constant" and integer:
                kernel = ExpPolyKernel(np.repeat(mats, int(self.period), axis=0), self.tau,
                                       self.family, net)
            elif self.kernel_basis == "constant":
                empty = np.zeros((0,) + mats.shape[1:])
                kernel = TrigExpPolyKernel(self.period, self.tau, mats[0], empty, empty,
                                           self.family, net)
            else:
                kernel = TrigExpPolyKernel(self.period, self.tau, mats[0], mats[1:1 + r],
                                           mats[1 + r:], self.family, net)
        return ModelSpec(d, self.period, baseline, kernel, self.jump_rate, self.periodicity)

    def from_model(self, spec: ModelSpec) -> np.ndarray:
        """Parameter vector of ``spec`` (which must belong to this family).

        Network coefficients are recovered by least squares on
        ``span(I, W)``, which is exact for kernels built as ``a I + b W``.
        """
        kern = spec.kernel
        d = self.d
        # baseline
        base = spec.baseline
        if self.mu_basis == "trig":
            if not isinstance(base, TrigBaseline):
                raise ConfigurationError("trigonometric layout needs a trigonometric baseline")
            mu = np.vstack([base.const[None], base.sin, base.cos])
        elif isinstance(base, PeriodicBaseline):
            mu = base.values if self.mu_basis == "season" else base.values[:1]
        else:
            mu = base.const[None]
        mu = mu if self.mu_per_node else mu[:, :1]
        # kernel matrices per basis block
        if self.fixed_kernel:
            return self.pack(mu)
        if self.channel == "lags":
            mats = kern.table(self.q)
        elif isinstance(kern, TrigExpPolyKernel):
            mats = np.concatenate([kern.const[None], kern.sin, kern.cos])
        else:
            mats = kern.G
        if self.kernel_basis == "constant":
            mats = mats[:1]
        if self.structure == "network":
            basis = np.stack([np.eye(d).ravel(), self.network.W.ravel()], axis=1)
            flat = mats.reshape(mats.shape[0], mats.shape[1], d * d)
            sol = np.einsum("kx,bcx->bkc", np.linalg.pinv(basis), flat)
            return self.pack(mu, sol)
        return self.pack(mu, mats)

    def n_params(self) -> int:
        return self.size

    def to_dict(self) -> dict:
        return {
            "d": self.d, "period": self.period, "channel": self.channel, "q": self.q,
            "tau": self.tau, "family": self.family, "structure": self.structure,
            "network": None if self.network is None else self.network.to_dict(),
            "kernel_basis": self.kernel_basis, "mu_basis": self.mu_basis,
            "harmonics": self.harmonics, "mu_per_node": self.mu_per_node,
            "periodicity": self.periodicity, "jump_rate": self.jump_rate.to_dict(),
            "coef_bound": self.coef_bound, "mu_bound": self.mu_bound,
            "fixed_kernel": self.fixed_kernel,
        }

    @classmethod
    def from_dict(cls, data: dict, network: NetworkSpec | None = None) -> "Layout":
        data = dict(data)
        net = data.pop("network", None)
        if net is not None:
            network = NetworkSpec.from_dict(net)
        jr = JumpRate.from_dict(data.pop("jump_rate", {"kind": "identity"}))
        period = data.pop("period")
        period = int(period) if float(period).is_integer() else float(period)
        return cls(period=period, network=network, jump_rate=jr, **data)


def network_layout(network: NetworkSpec, period, q: int, tau: float, **kw) -> Layout:
    """Seasonal ``a I + b W`` exponential layout with a shared baseline per season."""
    return Layout(d=network.d, period=period, q=q, tau=tau, structure="network",
                  network=network, **kw)


def grand_mean(counts) -> float:
    y = np.asarray(counts, dtype=float)
    return float(y.mean()) if y.size else math.nan
