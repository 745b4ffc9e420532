"""Differentially private k-means via private grid set cover."""

from .core import Dataset, WeightedDataset, kmeans_cost, make_rng
from .pipeline import ClusteringResult, PipelineConfig, PrivacyParams, accountant, run, split_budget

__all__ = [
    "Dataset",
    "WeightedDataset",
    "kmeans_cost",
    "make_rng",
    "ClusteringResult",
    "PipelineConfig",
    "PrivacyParams",
    "accountant",
    "run",
    "split_budget",
]

__version__ = "0.1.0"
