"""Trajectory generation, coupled pairs, SBM networks and Monte Carlo moments."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core.model import CountSeries, ModelSpec
from .core.network import NetworkSpec
from .engine import DirectConvolver, MarkovFilter, MarkovState
from .errors import ConfigurationError
from .rng import PoissonStream


@dataclass(frozen=True)
class SimulationConfig:
    """Simulation controls.

    Attributes:
        T: Number of simulated steps, at times ``1..T``.
        seed: Seed of the counter-based Poisson stream.
        history: Optional fixed past counts ``(H, d)`` for times ``1-H..0``
            (placed before the burn-in when both are given).
        burn_in_periods: Number ``B`` of periods simulated and discarded
            before time 1, approximating a start from the stationary regime.
        replications: Number of independent replicates.
        threads: Worker threads; results do not depend on this value.
    """

    T: int
    seed: int = 0
    history: np.ndarray | None = None
    burn_in_periods: int = 0
    replications: int = 1
    threads: int = 1

    def __post_init__(self):
        if int(self.T) < 1:
            raise ConfigurationError("T must be at least 1")
        if self.burn_in_periods < 0:
            raise ConfigurationError("burn_in_periods must be nonnegative")
        if self.replications < 1:
            raise ConfigurationError("replications must be at least 1")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")


@dataclass
class SimulationOutput:
    """Batch of replicates: ``counts`` and ``intensities`` are ``(R, T, d)``."""

    counts: np.ndarray
    intensities: np.ndarray
    t0: int
    state: MarkovState | None = None

    def series(self, rep: int = 0) -> CountSeries:
        return CountSeries(self.counts[rep], self.intensities[rep], self.t0)

    def all_series(self) -> list:
        return [self.series(r) for r in range(self.counts.shape[0])]


def _burn_in_steps(spec: ModelSpec, cfg: SimulationConfig) -> int:
    return int(round(cfg.burn_in_periods * float(spec.period)))


def _history(spec: ModelSpec, cfg: SimulationConfig) -> np.ndarray:
    if cfg.history is None:
        return np.zeros((0, spec.d))
    h = np.asarray(cfg.history, dtype=float)
    h = h.reshape(-1, spec.d) if h.ndim < 2 else h
    if h.shape[1] != spec.d or np.any(h < 0):
        raise ConfigurationError("history must be nonnegative with d columns")
    return h


def _run(spec: ModelSpec, cfg: SimulationConfig, reps: np.ndarray, method: str):
    """Simulate the replicates ``reps``; returns counts, intensities, state."""
    stream = PoissonStream(cfg.seed)
    hist = _history(spec, cfg)
    n_burn = _burn_in_steps(spec, cfg)
    n_hist = hist.shape[0]
    t_first = 1 - n_burn - n_hist
    n_total = n_hist + n_burn + cfg.T
    n_rep, d = reps.size, spec.d
    psi = spec.jump_rate

    sim_times = np.arange(1 - n_burn, cfg.T + 1)
    mu = spec.baseline_at(sim_times)
    y_out = np.zeros((n_rep, cfg.T, d), dtype=np.int64)
    lam_out = np.zeros((n_rep, cfg.T, d))

    if method == "markov":
        filt = MarkovFilter(spec.kernel, spec.periodicity)
        state = filt.start(n_rep, t_first)
        for row in hist:
            filt.advance(state, np.broadcast_to(row, (n_rep, d)))
        for i, t in enumerate(sim_times):
            lam = psi(mu[i] + filt.lag_sum(state))
            y = stream.counts(lam, int(t), reps)
            filt.advance(state, y)
            if t >= 1:
                y_out[:, t - 1] = y
                lam_out[:, t - 1] = lam
        return y_out, lam_out, state

    conv = DirectConvolver(spec.kernel, spec.periodicity, n_total)
    buf = np.zeros((n_rep, n_total, d))
    buf[:, :n_hist] = hist
    for i, t in enumerate(sim_times):
        j = n_hist + i
        n = min(j, conv.L)
        lam = psi(mu[i] + conv(int(t), buf[:, j - n:j]))
        y = stream.counts(lam, int(t), reps)
        buf[:, j] = y
        if t >= 1:
            y_out[:, t - 1] = y
            lam_out[:, t - 1] = lam
    return y_out, lam_out, None


def simulate_paths(spec: ModelSpec, cfg: SimulationConfig, method: str = "direct",
                   reps=None) -> SimulationOutput:
    """Simulate a batch of replicates with the direct or Markov recursion.

    Args:
        spec: Valid model specification.
        cfg: Simulation controls.
        method: ``"direct"`` or ``"markov"``.
        reps: Optional explicit replicate identifiers (default
            ``0..replications-1``).
    """
    spec.require_valid()
    if method not in ("direct", "markov"):
        raise ConfigurationError(f"unknown simulation method {method!r}")
    if method == "markov" and not getattr(spec.kernel, "is_markov", False):
        raise ConfigurationError("Markov simulation requires an exponential-polynomial kernel")
    reps = np.arange(cfg.replications) if reps is None else np.asarray(reps, dtype=np.int64)
    n_chunks = min(cfg.threads, reps.size)
    if n_chunks <= 1:
        y, lam, state = _run(spec, cfg, reps, method)
        return SimulationOutput(y, lam, 1, state)
    chunks = np.array_split(reps, n_chunks)
    with ThreadPoolExecutor(max_workers=n_chunks) as pool:
        parts = list(pool.map(lambda c: _run(spec, cfg, c, method), chunks))
    y = np.concatenate([p[0] for p in parts])
    lam = np.concatenate([p[1] for p in parts])
    state = None
    if method == "markov":
        state = parts[0][2]
        state.xi = np.concatenate([p[2].xi for p in parts])
    return SimulationOutput(y, lam, 1, state)


def _unwrap(out: SimulationOutput, cfg: SimulationConfig):
    return out.series(0) if cfg.replications == 1 else out.all_series()


def simulate_direct(spec: ModelSpec, cfg: SimulationConfig):
    """Simulate by evaluating the full lag sum at every step.

    Returns:
        A :class:`CountSeries` (with intensities) for a single replicate,
        otherwise a list of them.
    """
    return _unwrap(simulate_paths(spec, cfg, "direct"), cfg)


def simulate_markov(spec: ModelSpec, cfg: SimulationConfig, return_state: bool = False):
    """Simulate through the auxiliary-process recursion of an exponential kernel.

    Uses the same Poisson draws as :func:`simulate_direct`, so both return the
    same counts for the same seed.  With ``return_state`` the final
    :class:`MarkovState` (encoding the pre-intensity at ``T + 1``) is
    returned as well.
    """
    out = simulate_paths(spec, cfg, "markov")
    res = _unwrap(out, cfg)
    if return_state:
        state = out.state if cfg.replications > 1 else out.state.replicate(slice(0, 1))
        return res, state
    return res


def simulate_coupled(spec_a: ModelSpec, spec_b: ModelSpec, cfg: SimulationConfig,
                     cfg_b: SimulationConfig | None = None, method: str = "direct"):
    """Two processes driven by the same unit-rate Poisson processes.

    At each time and node both counts are the number of points of one shared
    Poisson process below the respective intensity, which realises the
    thinning coupling.  ``cfg_b`` may differ from ``cfg`` in its history or
    burn-in (for instance an empty start against a burn-in start) but must
    share the seed, horizon and replications.

    Returns:
        Pair of :class:`SimulationOutput` batches.
    """
    cfg_b = cfg if cfg_b is None else cfg_b
    if spec_a.d != spec_b.d:
        raise ConfigurationError("coupled models must have the same dimension")
    if float(spec_a.period) != float(spec_b.period):
        raise ConfigurationError("coupled models must have the same period")
    if (cfg.seed, cfg.T, cfg.replications) != (cfg_b.seed, cfg_b.T, cfg_b.replications):
        raise ConfigurationError("coupled runs must share seed, horizon and replications")
    method_b = method
    if method == "markov" and not getattr(spec_b.kernel, "is_markov", False):
        method_b = "direct"
    method_a = method
    if method == "markov" and not getattr(spec_a.kernel, "is_markov", False):
        method_a = "direct"
    return simulate_paths(spec_a, cfg, method_a), simulate_paths(spec_b, cfg_b, method_b)


def coupling_distance(out_a: SimulationOutput, out_b: SimulationOutput) -> dict:
    """Monte Carlo estimates of ``E|Y_a - Y_b|`` per time step.

    Besides the raw average of ``|Y_a - Y_b|`` the estimate based on
    ``|lambda_a - lambda_b|`` is returned; under the shared-randomness coupling
    both have the same expectation and the latter has smaller variance.
    Values are averaged over replicates and summed over nodes.
    """
    raw = np.abs(out_a.counts - out_b.counts).sum(axis=2)
    smooth = np.abs(out_a.intensities - out_b.intensities).sum(axis=2)
    n = raw.shape[0]
    return {
        "raw": raw.mean(axis=0),
        "raw_se": raw.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(raw.shape[1]),
        "intensity": smooth.mean(axis=0),
        "intensity_se": smooth.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(raw.shape[1]),
    }


def generate_sbm(sizes, probs, seed: int = 0) -> NetworkSpec:
    """Directed stochastic block model without self-loops.

    Each ordered pair ``(i, j)``, ``i != j``, is an edge independently with
    probability ``probs[block(i), block(j)]``.
    """
    sizes = [int(s) for s in sizes]
    probs = np.asarray(probs, dtype=float)
    if any(s <= 0 for s in sizes):
        raise ConfigurationError("every block must contain at least one node")
    if probs.shape != (len(sizes), len(sizes)):
        raise ConfigurationError("probability matrix must be square with one row per block")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ConfigurationError("block probabilities must lie in [0, 1]")
    block = np.repeat(np.arange(len(sizes)), sizes)
    d = block.size
    rng = np.random.default_rng(seed)
    adj = (rng.random((d, d)) < probs[block[:, None], block[None, :]]).astype(np.int64)
    np.fill_diagonal(adj, 0)
    return NetworkSpec.from_adjacency(adj)


def empirical_moments(replications, r: int = 1) -> dict:
    """Monte Carlo estimate of ``E[Y_t^r]`` per time and node.

    Args:
        replications: List of :class:`CountSeries`, a
            :class:`SimulationOutput` or an ``(R, T, d)`` array.
        r: Moment order.

    Returns:
        Dict with ``mean`` and ``se`` arrays of shape ``(T, d)``.
    """
    if r < 1:
        raise ConfigurationError("moment order must be at least 1")
    if isinstance(replications, SimulationOutput):
        y = replications.counts
    elif isinstance(replications, np.ndarray):
        y = replications
    else:
        y = np.stack([s.counts for s in replications])
    y = np.asarray(y, dtype=float) ** r
    n = y.shape[0]
    se = y.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(y.shape[1:])
    return {"mean": y.mean(axis=0), "se": se}
