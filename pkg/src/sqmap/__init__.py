"""Distance-squared mappings of sampled closed manifolds.

Anchor selection, explicit normal-form reductions and numerical certificates
for embeddings and normal-crossing immersions given by ``x -> (|x - p_j|^2)``.
"""

from .anchors import AnchorSelectionState, build_anchor_set
from .circle import CircleAnchorResult, SupportProbe, detect_case, diameter_pair, select_circle_anchors, support_value
from .errors import (
    ClassificationError,
    DimensionError,
    GeneralPositionError,
    ManifoldError,
    SelectionError,
    SqmapError,
)
from .geometry import (
    AnchorSet,
    distance_map,
    distance_squared_jacobian,
    distance_squared_map,
    extend_to_general_position,
    is_general_position,
    sqrt_map,
)
from .manifold import SampledManifold, graph_neighborhood, height_extrema, load_manifold, slice_with_hyperplane
from .normal_form import (
    DiffeoChain,
    build_fold_reduction,
    build_inclusion_reduction,
    build_level_fold,
    build_reduction,
    verify_fold_form,
)
from .report import Check, VerificationReport
from .verification import (
    fold_side_check,
    immersion_check,
    injectivity_check,
    normal_crossings_check,
    run_full_verification,
)

__version__ = "0.1.0"
