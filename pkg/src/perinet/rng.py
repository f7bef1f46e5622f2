"""Counter-based random substreams and the shared Poisson draw discipline.

Every count ``Y_t^(i)`` of replicate ``r`` is obtained by counting the points
of a unit-rate Poisson process on ``[0, lambda]``.  The points are built from
exponential gaps whose uniforms are a pure function of
``(seed, r, t, i, j)``, ``j`` being the index of the gap.  Two consequences:

* any two processes simulated with the same seed are coupled through the same
  underlying point processes (``Y = N(lambda)``, ``Ybar = N(lambda_bar)``), so
  given both intensities ``|Y - Ybar| ~ Poisson(|lambda - lambda_bar|)``;
* the draws do not depend on the order in which replicates or time steps are
  evaluated, which makes results identical across batch sizes and threads.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
# distinct salts per counter coordinate
_SALT_REP = np.uint64(0xD1B54A32D192ED03)
_SALT_T = np.uint64(0x8CB92BA72F3D8DD7)
_SALT_NODE = np.uint64(0xA0761D6478BD642F)
_SALT_GAP = np.uint64(0xE7037ED1A0B428DB)


def _mix(x):
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN) & _MASK
        x = (x ^ (x >> np.uint64(30))) * _C1
        x = (x ^ (x >> np.uint64(27))) * _C2
        return x ^ (x >> np.uint64(31))


def _as_u64(values):
    return np.asarray(values, dtype=np.int64).view(np.uint64)


def _combine(h, values, salt):
    with np.errstate(over="ignore"):
        return _mix(h ^ (_as_u64(values) * salt))


def _to_unit(h):
    # 53 random bits mapped into the open interval (0, 1)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


class PoissonStream:
    """Deterministic Poisson draws keyed by ``(seed, replicate, time, node)``.

    Args:
        seed: Any integer in the signed or unsigned 64-bit range.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._key = _mix(np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF))

    def uniforms(self, reps, t, nodes, gaps):
        """Uniforms on (0, 1) for broadcastable counter arrays."""
        h = _combine(self._key, reps, _SALT_REP)
        h = _combine(h, t, _SALT_T)
        h = _combine(h, nodes, _SALT_NODE)
        return _to_unit(_combine(h, gaps, _SALT_GAP))

    def counts(self, lam, t: int, reps=None) -> np.ndarray:
        """Number of unit-rate Poisson points in ``[0, lam]``.

        Args:
            lam: Intensities of shape ``(R, d)`` (or ``(d,)`` for a single
                replicate).
            t: Absolute time index of the draw.
            reps: Replicate identifiers of length ``R``; defaults to
                ``0..R-1``.

        Returns:
            Integer array with the shape of ``lam``.
        """
        lam = np.asarray(lam, dtype=np.float64)
        squeeze = lam.ndim == 1
        lam2 = np.atleast_2d(lam)
        if np.any(lam2 < 0) or not np.all(np.isfinite(lam2)):
            raise AssertionError("intensities must be finite and nonnegative")
        n_rep, d = lam2.shape
        reps = np.arange(n_rep) if reps is None else np.asarray(reps)
        prefix = _combine(self._key, reps[:, None], _SALT_REP)
        prefix = _combine(prefix, np.int64(t), _SALT_T)
        prefix = _combine(prefix, np.arange(d)[None, :], _SALT_NODE)
        prefix = np.broadcast_to(prefix, lam2.shape)

        out = np.zeros(lam2.shape, dtype=np.int64)
        arrival = np.zeros(lam2.shape)
        active = lam2 > 0
        j = 0
        while active.any():
            idx = np.nonzero(active)
            u = _to_unit(_combine(prefix[idx], np.int64(j), _SALT_GAP))
            arrival[idx] -= np.log(u)
            hit = arrival[idx] <= lam2[idx]
            out[idx] += hit
            active[idx] = hit
            j += 1
        return out[0] if squeeze else out
