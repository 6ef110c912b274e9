"""Low-projection SCMA codebook design, evaluation and simulation."""
from .gam import GamParams, OverlapPlan, Constellation1D, build_basic_constellation, build_lp_vector, gam_point
from .mother import MotherConstellation, cartesian_mother, permutation_search, mc_distance
from .codebook import CodebookSet, FactorGraph, OperatorParams, assemble, load_fixture

__version__ = "0.1.0"
