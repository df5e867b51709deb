"""Signed hyperbolic Haar sums on the dyadic grid.

Exact evaluation and sup norms of signed r-function fields, greedy witness
construction in two and three dimensions, the block square identity, the
probability lemmas behind the conditional search, and star discrepancy of
finite point sets.
"""

__version__ = "0.1.0"

from .dyadic import (
    AllPlusSigns,
    DyadicInterval,
    DyadicRect,
    ExplicitSigns,
    GridPoint,
    GuardRefusal,
    HaarField,
    ScaleBound,
    SeededSigns,
    ShapeFamily,
    family_count,
    field_eval,
    field_grid,
    group_by_coord,
    haar_eval,
    hyperbolic_shapes,
    load_signs,
    parse_signs_token,
    rect_haar_eval,
    restrict_to_atom,
    rfunction_eval,
    rfunction_grid,
    save_signs,
    value_histogram,
)
from .extremal import (
    SupResult,
    empirical_lp,
    l2_norm_sq,
    l2_norm_sq_grid,
    sup_norm_branch_bound,
    sup_norm_exhaustive,
)
from .witness2d import (
    Witness2D,
    greedy_witness_2d,
    independence_check,
    witness_measure,
)
from .witness3d import (
    BlockDecomposition,
    SearchParams,
    WitnessReport,
    conditional_witness_search,
    identity_check,
    sqcap_samples,
    stage_values,
)
from .probability import (
    DyadicMartingale,
    FiniteDistribution,
    cond_indep_lower_bound,
    lp_fourth_moment_check,
    orlicz_norm,
    orlicz_report,
    paley_zygmund_bound,
    pz2_check,
)
from .discrepancy import (
    DiscrepancyReport,
    PointSet,
    discrepancy_eval,
    discrepancy_report,
    l2_discrepancy,
    load_points,
    save_points,
    sup_discrepancy,
    van_der_corput,
)

__all__ = [name for name in dir() if not name.startswith("_")]
