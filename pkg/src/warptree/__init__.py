"""Warped-wavelet nonparametric regression with vertical (tree-structured) thresholding."""

from .design import SampleZ, generate_sample, get_design, get_function
from .dyadic import DyadicIndex, DyadicTree, complete_to_tree, outer_leaves, uniform_tree
from .estimators import FitConfig, WarpedEstimator, fit
from .wavelets import get_wavelet

__version__ = "0.1.0"
