"""ECI+ / PCI+ iterations on the extensive export matrix.

Country update:  x_c <- sum_p X_cp / (sum_c' X_c'p / x_c')
Product update:  x_p <- sum_c X_cp / (sum_p' X_cp' / x_p')

Each update is the Fitness-Complexity map applied twice, with X in place of
the binary matrix: x_c^N corresponds to F^(2N) and x_p^N to 1 / Q^(2N).
"""
from dataclasses import dataclass

import numpy as np

from .errors import NotPruned, ZeroFitness
from .fitness import AlgoConfig, diversification, iterate, mean, ubiquity

DEFAULT_CONFIG = AlgoConfig(normalization="geometric")


@dataclass(frozen=True, eq=False)
class EciPlusResult:
    countries: tuple
    products: tuple
    xc_inf: np.ndarray
    xp_inf: np.ndarray
    eci_plus: np.ndarray
    pci_plus: np.ndarray
    product_totals: np.ndarray
    trace: object


def _values(X):
    x = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if np.any(x.sum(axis=1) <= 0) or np.any(x.sum(axis=0) <= 0):
        raise NotPruned("matrix has an all-zero row or column; prune first")
    return x


def country_half_steps(x, xc):
    """x_c^N from x_c^(N-1): product half-step then country half-step."""
    if np.any(xc == 0):
        raise ZeroFitness("a country score is exactly zero")
    per_product = x.T @ (1.0 / xc)
    return x @ (1.0 / per_product)


def product_half_steps(x, xp):
    """x_p^N from x_p^(N-1)."""
    if np.any(xp == 0):
        raise ZeroFitness("a product score is exactly zero")
    per_country = x @ (1.0 / xp)
    return x.T @ (1.0 / per_country)


def eci_iterate(X, config=DEFAULT_CONFIG, keep_every=1):
    """Run the coupled country/product ECI+ iterations.

    The returned trace stores x_c in ``F`` and x_p in ``Q``. Degree init
    starts countries at k_c and products at 1/k_p, the relabeled image of
    the Fitness degree init.
    """
    x = _values(X)
    norm = config.normalization
    if config.init == "ones":
        xc, xp = np.ones(x.shape[0]), np.ones(x.shape[1])
    else:
        xc, xp = diversification(x), 1.0 / ubiquity(x)
    c0, p0 = mean(xc, norm), mean(xp, norm)

    def step_fn(xc, xp):
        xc_new = country_half_steps(x, xc)
        xp_new = product_half_steps(x, xp)
        c_norm, p_norm = mean(xc_new, norm), mean(xp_new, norm)
        return xc_new / c_norm, xp_new / p_norm, (c_norm, p_norm)

    return iterate((xc / c0, xp / p0, (c0, p0)), config, step_fn, keep_every)


def eci_offset(X):
    """log of sum_p X_cp / X_p, the sum of country c's shares across products."""
    x = _values(X)
    return np.log((x / x.sum(axis=0)[None, :]).sum(axis=1))


def eci_plus_scores(X, xc_inf):
    xc_inf = np.asarray(xc_inf, dtype=np.float64)
    if np.any(xc_inf <= 0):
        raise ValueError("xc_inf must be strictly positive")
    return np.log(xc_inf) - eci_offset(X)


def pci_plus_scores(X, xp_inf):
    """log X_p - log x_p. Depends on the currency unit through log X_p."""
    xp_inf = np.asarray(xp_inf, dtype=np.float64)
    if np.any(xp_inf <= 0):
        raise ValueError("xp_inf must be strictly positive")
    return np.log(_values(X).sum(axis=0)) - np.log(xp_inf)


def eci_plus(X, config=DEFAULT_CONFIG, keep_every=1):
    trace = eci_iterate(X, config, keep_every)
    xc_inf, xp_inf = trace.fitness, trace.complexity
    return EciPlusResult(
        countries=tuple(getattr(X, "countries", range(len(xc_inf)))),
        products=tuple(getattr(X, "products", range(len(xp_inf)))),
        xc_inf=xc_inf,
        xp_inf=xp_inf,
        eci_plus=eci_plus_scores(X, xc_inf),
        pci_plus=pci_plus_scores(X, xp_inf),
        product_totals=_values(X).sum(axis=0),
        trace=trace,
    )
