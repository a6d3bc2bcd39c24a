"""Seeded synthetic matrices used by the tests, the acceptance suite and the CLI."""
import numpy as np

from .trade import BinaryMatrix, ExportMatrix, prune

CANONICAL_SEED = 20180515
CORPUS_SEED = 12345


def _labels(prefix, n):
    width = len(str(n - 1))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def nested_matrix(n_countries, n_products):
    """Perfectly nested 0/1 matrix: country i exports the first
    ceil(n_products * (n_countries - i) / n_countries) products."""
    reach = np.ceil(n_products * (n_countries - np.arange(n_countries)) / n_countries)
    return (np.arange(n_products)[None, :] < reach[:, None]).astype(np.float64)


def nested_test_matrix(n_countries=10, n_products=20, flip_fraction=0.15, seed=CANONICAL_SEED):
    """Nested matrix with a fixed fraction of entries flipped, pruned.

    The default arguments give the canonical 10 x 20 desk-scale stand-in for
    real trade data.
    """
    rng = np.random.default_rng(seed)
    m = nested_matrix(n_countries, n_products)
    n_flip = int(round(flip_fraction * m.size))
    idx = rng.choice(m.size, size=n_flip, replace=False)
    flat = m.ravel()
    flat[idx] = 1.0 - flat[idx]
    raw = BinaryMatrix(_labels("C", n_countries), _labels("P", n_products), flat.reshape(m.shape))
    pruned, dc, dp = prune(raw)
    return BinaryMatrix(pruned.countries, pruned.products, pruned.values, dc, dp)


def random_export_matrix(rng, n_countries, n_products, low=1.0, high=1e6, density=1.0):
    """Log-uniform flows in [low, high]; with density < 1 entries are zeroed at random
    and the result is pruned."""
    values = np.exp(rng.uniform(np.log(low), np.log(high), size=(n_countries, n_products)))
    if density < 1.0:
        values *= rng.random((n_countries, n_products)) < density
    m = ExportMatrix(_labels("C", n_countries), _labels("P", n_products), values)
    return prune(m)[0]


def random_corpus(n=100, seed=CORPUS_SEED, countries=(5, 30), products=(5, 50), density=1.0):
    """``n`` random export matrices with sizes drawn uniformly from the given ranges."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        nc = int(rng.integers(countries[0], countries[1] + 1))
        np_ = int(rng.integers(products[0], products[1] + 1))
        out.append(random_export_matrix(rng, nc, np_, density=density))
    return out
