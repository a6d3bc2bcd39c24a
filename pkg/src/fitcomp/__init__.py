"""Fitness-Complexity and ECI+/PCI+ economic complexity metrics."""

__version__ = "0.1.0"

from .errors import FitcompError  # noqa: E402
from .trade import (  # noqa: E402
    BinaryMatrix,
    ExportMatrix,
    RcaMatrix,
    binarize,
    ingest_flows,
    prune,
    rca,
)
from .fitness import AlgoConfig, IterationTrace, diversification, log_scores, run, standardize, step, ubiquity  # noqa: E402
from .eciplus import EciPlusResult, eci_iterate, eci_plus, eci_plus_scores, pci_plus_scores  # noqa: E402
from .analysis import (  # noqa: E402
    RankReport,
    diversity_correlation,
    equivalence_check,
    offset_correlation,
    one_iteration_anomaly,
    rank_correlations,
    scatter_table,
)
