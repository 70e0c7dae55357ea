"""Explain black-box binary classifiers with sufficient reasons and
counterfactuals enumerated from a CNF-compiled random-forest surrogate."""

from .encoder import build_pmaxsat, encode_forest, encode_instance, tree_to_formula
from .enumeration import EnumerationBudget, enumerate_mcs, enumerate_mus, minimal_hitting_sets
from .pipeline import RunConfig, explain_instance, run
from .scoring import Explanation, build_report, rank
from .surrogate import Instance, RandomForest, train_forest

__version__ = "0.1.0"

__all__ = [
    "EnumerationBudget",
    "Explanation",
    "Instance",
    "RandomForest",
    "RunConfig",
    "build_pmaxsat",
    "build_report",
    "encode_forest",
    "encode_instance",
    "enumerate_mcs",
    "enumerate_mus",
    "explain_instance",
    "minimal_hitting_sets",
    "rank",
    "run",
    "train_forest",
    "tree_to_formula",
]
