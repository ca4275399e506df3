"""Group-fairness auditing with exact bounds on the cost of demographic parity."""
from .certificate import BoundCertificate, certify
from .dist import DiscreteDistribution, DivergenceKind, f_divergence
from .metrics import FairnessReport, GroupedDataset, PredictionSet, full_report
from .oracle import FinitePopulation, min_joint_error_dp

__all__ = [
    "BoundCertificate",
    "certify",
    "DiscreteDistribution",
    "DivergenceKind",
    "f_divergence",
    "FairnessReport",
    "GroupedDataset",
    "PredictionSet",
    "full_report",
    "FinitePopulation",
    "min_joint_error_dp",
]

__version__ = "0.1.0"
