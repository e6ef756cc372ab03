"""Supervised pattern discovery: loss functionals, ERM training, greedy growth,
quasi-Rademacher complexity estimation and risk-bound calculators."""

__version__ = "0.1.0"

from .core import (
    CapExceededError,
    Observation,
    PatternCollection,
    PatternError,
    SubsetFamily,
    enumerate_nonempty_subsets,
    maximal_selector,
    negative_selector,
    observations_of,
    posneg_selector,
)
from .loss import BlockLossConfig, IndividualLossConfig, block_loss, individual_loss
from .model import FeatureConfig, ScoringModel, train_erm
from .discovery import GrowthTrace, discover_all, evaluate, grow_pattern
