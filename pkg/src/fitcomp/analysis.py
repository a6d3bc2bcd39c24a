"""Comparisons between Fitness and ECI+ runs.

Covers the proportionality of the two iterations, rank statistics, the
one-iteration ranking anomaly, diversity and offset correlations, and the
three scatter tables comparing ECI+ with Fitness.
"""
import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import eciplus, fitness
from .errors import DegenerateDistribution, EquivalenceViolation, LengthMismatch
from .fitness import AlgoConfig
from .trade import BinaryMatrix, binarize, rca


@dataclass(frozen=True, eq=False)
class RankReport:
    labels: tuple
    scores_a: np.ndarray
    scores_b: np.ndarray
    ranks_a: np.ndarray
    ranks_b: np.ndarray
    spearman: float
    pearson: float
    max_rank_displacement: float
    discordant_pairs: int

    def to_json_dict(self):
        def num(v):
            return None if v is None or np.isnan(v) else float(v)

        return {
            "labels": list(self.labels),
            "scores_a": self.scores_a.tolist(),
            "scores_b": self.scores_b.tolist(),
            "ranks_a": self.ranks_a.tolist(),
            "ranks_b": self.ranks_b.tolist(),
            "spearman": num(self.spearman),
            "pearson": num(self.pearson),
            "max_rank_displacement": float(self.max_rank_displacement),
            "discordant_pairs": int(self.discordant_pairs),
        }


def ranks(scores):
    """Rank 1 = highest score; ties share their average rank."""
    return rankdata(-np.asarray(scores, dtype=np.float64), method="average")


def pearson(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateDistribution("correlation of a constant vector is undefined")
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if not denom > 0:
        raise DegenerateDistribution("variance underflows to zero")
    r = float(np.dot(da, db) / denom)
    return max(-1.0, min(1.0, r))


def _discordant_pairs(a, b):
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    return int(np.count_nonzero(np.triu(da * db < 0)))


def rank_correlations(a, b, labels=None, allow_degenerate=False):
    """Spearman (average-rank ties), Pearson, and rank displacement between two score vectors.

    A constant input raises DegenerateDistribution unless ``allow_degenerate``,
    in which case Pearson is NaN and Spearman is 1 when the two rankings are
    identical (NaN otherwise).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    if a.size < 2:
        raise LengthMismatch("need at least 2 scores")
    labels = tuple(labels) if labels is not None else tuple(range(a.size))
    if len(labels) != a.size:
        raise LengthMismatch("labels and scores differ in length")
    ra, rb = ranks(a), ranks(b)
    degenerate = np.ptp(a) == 0 or np.ptp(b) == 0
    if degenerate and not allow_degenerate:
        raise DegenerateDistribution("rank correlation of a constant vector is undefined")
    if np.array_equal(ra, rb):
        rho = 1.0
    elif degenerate:
        rho = float("nan")
    else:
        rho = pearson(ra, rb)
    r = float("nan") if degenerate else pearson(a, b)
    return RankReport(
        labels=labels,
        scores_a=a,
        scores_b=b,
        ranks_a=ra,
        ranks_b=rb,
        spearman=rho,
        pearson=r,
        max_rank_displacement=float(np.max(np.abs(ra - rb))),
        discordant_pairs=_discordant_pairs(a, b),
    )


def unit_geometric_mean(v):
    logv = np.log(np.asarray(v, dtype=np.float64))
    return np.exp(logv - logv.mean())


def max_relative_deviation(a, b):
    """Largest |a_i/b_i - 1| after scaling both vectors to unit geometric mean."""
    a, b = unit_geometric_mean(a), unit_geometric_mean(b)
    return float(np.max(np.abs(a - b) / b))


def _quantized(v, tol):
    """Log-scores on a grid of width ``tol``: values equal up to rounding noise tie."""
    return np.round(np.log(unit_geometric_mean(v)) / tol)


@dataclass(frozen=True, eq=False)
class EquivalenceReport:
    iterations: int
    country_deviation: np.ndarray
    product_deviation: np.ndarray
    converged_spearman: float
    tol: float

    @property
    def max_deviation(self):
        return float(max(self.country_deviation.max(), self.product_deviation.max()))

    def to_json_dict(self):
        return {
            "iterations": self.iterations,
            "tol": self.tol,
            "max_deviation": self.max_deviation,
            "country_deviation": self.country_deviation.tolist(),
            "product_deviation": self.product_deviation.tolist(),
            "converged_spearman": self.converged_spearman,
        }


def equivalence_check(X, iterations=20, tol=1e-9, converged_iterations=200):
    """Check that Fitness on the extensive matrix and ECI+ are the same iteration.

    For every N <= ``iterations`` the even Fitness iterate F^(2N) must be
    proportional to the ECI+ country vector x_c^N, and 1/Q^(2N) to x_p^N.
    The arithmetic and geometric normalizers differ, so both sides are
    rescaled to unit geometric mean before comparing. Also requires the
    country rankings after ``converged_iterations`` ECI+ steps (twice as
    many Fitness steps) to coincide exactly; scores within ``tol`` of each
    other are ranked as ties.

    Raises EquivalenceViolation at the first iteration exceeding ``tol``.
    """
    fit = fitness.run(X, AlgoConfig(normalization="arithmetic", iterations=2 * iterations))
    eci = eciplus.eci_iterate(X, AlgoConfig(normalization="geometric", iterations=iterations))
    c_dev = np.empty(iterations + 1)
    p_dev = np.empty(iterations + 1)
    for n in range(iterations + 1):
        F, Q = fit.at(2 * n)
        xc, xp = eci.at(n)
        c_dev[n] = max_relative_deviation(F, xc)
        p_dev[n] = max_relative_deviation(1.0 / Q, xp)
        if c_dev[n] > tol or p_dev[n] > tol:
            raise EquivalenceViolation(
                f"iteration {n}: relative deviation {max(c_dev[n], p_dev[n]):.3e} exceeds {tol:.1e}",
                iteration=n,
                deviation=float(max(c_dev[n], p_dev[n])),
            )

    fit_conv = fitness.run(
        X,
        AlgoConfig(normalization="arithmetic", iterations=2 * converged_iterations),
        keep_every=2 * converged_iterations,
    )
    eci_conv = eciplus.eci_iterate(
        X,
        AlgoConfig(normalization="geometric", iterations=converged_iterations),
        keep_every=converged_iterations,
    )
    report = rank_correlations(
        _quantized(fit_conv.fitness, tol), _quantized(eci_conv.fitness, tol), allow_degenerate=True
    )
    if report.spearman != 1.0:
        raise EquivalenceViolation(
            f"converged rankings differ (spearman {report.spearman})",
            iteration=converged_iterations,
        )
    return EquivalenceReport(iterations, c_dev, p_dev, report.spearman, tol)


def binary_input(X, threshold=1.0):
    """``X`` itself if already binary, else binarize(rca(X))."""
    if isinstance(X, BinaryMatrix):
        return X
    return binarize(rca(X), threshold)


def one_iteration_anomaly(X, converged_iterations=200):
    """Ranking after one step from degree init versus the converged ones-init ranking.

    ``scores_a`` is the single-iteration fitness, ``scores_b`` the converged one.
    """
    M = binary_input(X)
    once = fitness.run(M, AlgoConfig(init="degree", iterations=1))
    conv = fitness.run(M, AlgoConfig(init="ones", iterations=converged_iterations))
    return rank_correlations(once.fitness, conv.fitness, labels=M.countries, allow_degenerate=True)


def diversity_correlation(M, F):
    return pearson(fitness.diversification(M), F)


def offset_correlation(X, config=eciplus.DEFAULT_CONFIG):
    """Pearson correlation between sum_p X_cp/X_p and the converged x_c."""
    shares = np.exp(eciplus.eci_offset(X))
    xc = eciplus.eci_iterate(X, config).fitness
    return pearson(shares, xc)


def scatter_table(x_scores, y_scores, labels):
    x_scores, y_scores, labels = list(x_scores), list(y_scores), list(labels)
    if not len(x_scores) == len(y_scores) == len(labels):
        raise LengthMismatch(
            f"lengths differ: {len(labels)} labels, {len(x_scores)} x, {len(y_scores)} y"
        )
    return [(lab, float(x), float(y)) for lab, x, y in zip(labels, x_scores, y_scores)]


def scatter_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("label", "x", "y"))
    for lab, x, y in rows:
        w.writerow((lab, repr(float(x)), repr(float(y))))
    return buf.getvalue()


def scatter_from_csv(text):
    reader = csv.reader(io.StringIO(text))
    next(reader)
    return [(lab, float(x), float(y)) for lab, x, y in reader]


PANELS = ("eci_vs_z_fitness_1iter", "eci_vs_z_fitness_converged", "eci_vs_log_fitness_converged")


def figure1_tables(X, converged_iterations=200, epsilon_floor=1e-300):
    """The three ECI+ vs Fitness scatter tables.

    ECI+ runs on the extensive matrix, Fitness on its RCA binarization,
    matched by country label. Panels whose standardization is undefined are
    reported in the second return value instead.
    """
    M = binary_input(X)
    eci = eciplus.eci_plus(X, AlgoConfig(normalization="geometric", iterations=converged_iterations))
    eci_by_label = dict(zip(eci.countries, eci.eci_plus))
    labels = [c for c in M.countries if c in eci_by_label]
    keep = [M.countries.index(c) for c in labels]
    x = [eci_by_label[c] for c in labels]

    once = fitness.run(M, AlgoConfig(init="degree", iterations=1)).fitness[keep]
    conv = fitness.run(M, AlgoConfig(init="ones", iterations=converged_iterations)).fitness[keep]
    candidates = {
        PANELS[0]: lambda: fitness.standardize(once),
        PANELS[1]: lambda: fitness.standardize(conv),
        PANELS[2]: lambda: fitness.log_scores(conv, epsilon_floor),
    }
    tables, errors = {}, {}
    for name, make_y in candidates.items():
        try:
            tables[name] = scatter_table(x, make_y(), labels)
        except DegenerateDistribution as exc:
            errors[name] = str(exc)
    return tables, errors
