"""Kozachenko-Leonenko k-NN entropy estimation with finite-sample bound calculators
and a Monte Carlo harness for checking them."""
from knnentropy.distributions import DistributionSpec, envelopes, sample, true_entropy
from knnentropy.estimators import kl_entropy, mutual_information, smoothed_density
from knnentropy.knn import Dataset, build_index
from knnentropy.spaces import MetricSpaceSpec, euclidean, flat_torus

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DistributionSpec", "MetricSpaceSpec", "build_index", "envelopes",
    "euclidean", "flat_torus", "kl_entropy", "mutual_information", "sample",
    "smoothed_density", "true_entropy",
]
