"""Fitness-Complexity fixed-point iteration.

One step maps the pair (F, Q) of country fitnesses and product complexities to

    F'_c = sum_p M_cp Q_p
    Q'_p = 1 / sum_c (M_cp / F_c)

with both right-hand sides reading the previous pair (Jacobi update), after
which each vector is divided by its mean. The same code runs on binary
(RCA-thresholded) and extensive matrices.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateDistribution,
    MaxIterationsExceeded,
    NotPruned,
    ZeroFitness,
)

INITS = ("ones", "degree")
NORMALIZATIONS = ("arithmetic", "geometric")


@dataclass(frozen=True)
class AlgoConfig:
    """Initialisation, normalisation and stopping rule for an iteration run.

    With ``rank_stable=False`` exactly ``iterations`` steps are taken. With
    ``rank_stable=True`` the run stops once the country ranking has been
    unchanged for ``window`` consecutive checks (one check every
    ``check_every`` steps), and fails after ``max_iterations`` steps.
    """

    init: str = "ones"
    normalization: str = "arithmetic"
    iterations: int = 200
    rank_stable: bool = False
    window: int = 10
    check_every: int = 1
    max_iterations: int = 10_000
    epsilon_floor: float = 1e-300

    def __post_init__(self):
        if self.init not in INITS:
            raise ConfigError(f"init must be one of {INITS}, got {self.init!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.rank_stable and self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.window < 1 or self.check_every < 1:
            raise ConfigError("window and check_every must be >= 1")
        if not self.epsilon_floor > 0:
            raise ConfigError("epsilon_floor must be > 0")

    def to_dict(self):
        return {
            "init": self.init,
            "normalization": self.normalization,
            "iterations": self.iterations,
            "rank_stable": self.rank_stable,
            "window": self.window,
            "check_every": self.check_every,
            "max_iterations": self.max_iterations,
            "epsilon_floor": self.epsilon_floor,
        }


@dataclass(frozen=True, eq=False)
class IterationTrace:
    """Stored iterates of a run.

    Row ``i`` of ``F`` and ``Q`` is the normalised state after ``steps[i]``
    iterations (``steps[0] == 0`` is the normalised initial condition).
    ``normalizers[n]`` holds the (country, product) divisors applied at
    iteration ``n`` for every ``n``, thinned or not.
    """

    F: np.ndarray
    Q: np.ndarray
    normalizers: np.ndarray
    steps: np.ndarray
    iterations: int
    converged: bool
    normalization: str = "arithmetic"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("F", "Q", "normalizers", "steps"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def fitness(self):
        return self.F[-1]

    @property
    def complexity(self):
        return self.Q[-1]

    def at(self, n):
        """(F, Q) after ``n`` iterations; ``n`` must be a stored step."""
        idx = np.searchsorted(self.steps, n)
        if idx >= len(self.steps) or self.steps[idx] != n:
            raise KeyError(f"iteration {n} was not kept in this trace")
        return self.F[idx], self.Q[idx]

    def to_json_dict(self, keep_every=1):
        keep = [i for i, s in enumerate(self.steps) if s % keep_every == 0]
        if keep[-1] != len(self.steps) - 1:
            keep.append(len(self.steps) - 1)
        return {
            "iterations": int(self.iterations),
            "steps": [int(self.steps[i]) for i in keep],
            "F": [self.F[i].tolist() for i in keep],
            "Q": [self.Q[i].tolist() for i in keep],
            "normalizers": self.normalizers.tolist(),
            "normalization": self.normalization,
            "converged": bool(self.converged),
        }


def _matrix(M):
    return np.asarray(getattr(M, "values", M), dtype=np.float64)


def diversification(M):
    """Number of products each country exports (row degree k_c)."""
    return (_matrix(M) > 0).sum(axis=1).astype(np.float64)


def ubiquity(M):
    """Number of countries exporting each product (column degree k_p)."""
    return (_matrix(M) > 0).sum(axis=0).astype(np.float64)


def mean(x, normalization):
    if normalization == "arithmetic":
        return float(np.mean(x))
    if normalization == "geometric":
        return float(np.exp(np.mean(np.log(x))))
    raise ConfigError(f"unknown normalization {normalization!r}")


def raw_step(M, F, Q):
    """Unnormalised Jacobi update; returns (F', Q')."""
    m = _matrix(M)
    if np.any(F == 0):
        raise ZeroFitness(
            "a country fitness is exactly zero; the complexity denominator diverges",
            countries=np.flatnonzero(F == 0).tolist(),
        )
    F_new = m @ Q
    Q_new = 1.0 / (m.T @ (1.0 / F))
    return F_new, Q_new


def step(M, F, Q, normalization="arithmetic"):
    """One normalised iteration: returns (F', Q', (f_norm, q_norm))."""
    F_raw, Q_raw = raw_step(M, np.asarray(F, dtype=np.float64), np.asarray(Q, dtype=np.float64))
    f_norm = mean(F_raw, normalization)
    q_norm = mean(Q_raw, normalization)
    return F_raw / f_norm, Q_raw / q_norm, (f_norm, q_norm)


def initial_state(M, config):
    m = _matrix(M)
    if config.init == "ones":
        F, Q = np.ones(m.shape[0]), np.ones(m.shape[1])
    else:
        F, Q = diversification(m), ubiquity(m)
    f_norm, q_norm = mean(F, config.normalization), mean(Q, config.normalization)
    return F / f_norm, Q / q_norm, (f_norm, q_norm)


def _ranking(F):
    return np.argsort(-F, kind="stable")


def iterate(start, config, step_fn, keep_every=1):
    """Shared driver for a normalised two-vector map ``step_fn(F, Q) -> (F, Q, norms)``.

    ``start`` is the normalised initial ``(F, Q, norms)``.
    """
    if keep_every < 1:
        raise ConfigError("keep_every must be >= 1")
    F, Q, norms = start
    Fs, Qs, steps, normalizers = [F], [Q], [0], [norms]

    limit = config.max_iterations if config.rank_stable else config.iterations
    last_rank = _ranking(F)
    stable_checks = 0
    n = 0
    converged = False
    while n < limit:
        F, Q, norms = step_fn(F, Q)
        n += 1
        normalizers.append(norms)
        if n % keep_every == 0:
            Fs.append(F)
            Qs.append(Q)
            steps.append(n)
        if n % config.check_every == 0:
            rank = _ranking(F)
            stable_checks = stable_checks + 1 if np.array_equal(rank, last_rank) else 0
            last_rank = rank
            if config.rank_stable and stable_checks >= config.window:
                converged = True
                break
    if not config.rank_stable:
        # fixed-length runs report whether the ranking had settled by the end
        converged = stable_checks >= config.window
    elif not converged:
        raise MaxIterationsExceeded(
            f"country ranking not stable for {config.window} checks within "
            f"{config.max_iterations} iterations",
            iterations=n,
        )
    if steps[-1] != n:
        Fs.append(F)
        Qs.append(Q)
        steps.append(n)
    return IterationTrace(
        F=np.vstack(Fs),
        Q=np.vstack(Qs),
        normalizers=np.array(normalizers),
        steps=np.array(steps),
        iterations=n,
        converged=converged,
        normalization=config.normalization,
    )


def run(M, config=None, keep_every=1):
    """Iterate the Fitness-Complexity map on ``M`` (binary or extensive).

    Deterministic: identical inputs give bit-identical traces.
    """
    config = config or AlgoConfig()
    m = _matrix(M)
    if np.any(m.sum(axis=1) <= 0) or np.any(m.sum(axis=0) <= 0):
        raise NotPruned("matrix has an all-zero row or column; prune first")
    return iterate(
        initial_state(m, config),
        config,
        lambda F, Q: step(m, F, Q, config.normalization),
        keep_every,
    )


def log_scores(F, epsilon_floor=1e-300):
    """Elementwise log, flooring at ``epsilon_floor`` so quasi-zero scores stay finite."""
    return np.log(np.maximum(np.asarray(F, dtype=np.float64), epsilon_floor))


def standardize(F):
    """Z-scores with the population standard deviation."""
    F = np.asarray(F, dtype=np.float64)
    if F.size < 2:
        raise DegenerateDistribution("standardize needs at least 2 entries")
    sd = F.std()
    # a constant vector can leave rounding residue in the std
    if sd == 0 or np.ptp(F) == 0:
        raise DegenerateDistribution("standard deviation is zero")
    return (F - F.mean()) / sd
