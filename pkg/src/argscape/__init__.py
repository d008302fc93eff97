"""Simulation and verification toolkit for genealogies under recombination.

Backward-in-time graph simulation, tree extraction per locus, the
along-genome construction with its Markovian approximations, distances
between the resulting trees, and Monte Carlo verification of the
closed-form two-locus statistics.
"""

from .analytic import (
    FirstEventSystem,
    cross_pair_union_bound,
    height_second_moment,
    mixing_bound,
    prob_equal_cross_pair,
    prob_equal_same_pair,
    prob_ring_from_two_shared,
    solve_first_event_system,
    tightness_rhs,
)
from .arg import (
    ArgEventLog,
    Extraction,
    TreePath,
    distinct_tree_count,
    extract_tree,
    restrict_genome,
    sample_arg,
    subsample_arg,
    tree_path,
)
from .coupling import (
    AuxGraphResult,
    CoupledPairResult,
    sample_aux_graph,
    sample_coupled_pair,
    sample_real_pair,
)
from .metrics import (
    CoupledTreePair,
    UnsupportedInstanceError,
    d_aux,
    gh_bounds,
    gtv_exact,
    hausdorff_distance,
    path_variation,
    prohorov_distance,
    remark_cut_fraction,
    total_variation,
)
from .mmspace import (
    DistanceMatrix,
    ExponentialKernel,
    FiniteMmSpace,
    IndicatorKernel,
    PolynomialDescriptor,
    ProductKernel,
    ResourceLimitError,
    evaluate_polynomial,
    exponential_pair_kernel,
    sample_distance_submatrix,
    threshold_pair_kernel,
)
from .newick import NewickError, newick_decode, newick_encode
from .rng import RandomSource
from .trees import UltrametricTree, sample_kingman
from .walk import WalkVariant, breakpoint_intensity_check, sample_walk

__version__ = "0.1.0"
