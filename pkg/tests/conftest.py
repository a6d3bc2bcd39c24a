import pytest

from fitcomp import corpus


@pytest.fixture(scope="session")
def dense_corpus():
    """100 log-uniform dense export matrices, 5-30 countries x 5-50 products."""
    return corpus.random_corpus()


@pytest.fixture(scope="session")
def sparse_corpus():
    """Same size range with roughly 60% nonzero flows, so RCA thresholding has zeros to handle."""
    return corpus.random_corpus(seed=corpus.CORPUS_SEED + 1, density=0.6)


@pytest.fixture(scope="session")
def canonical():
    return corpus.nested_test_matrix()
