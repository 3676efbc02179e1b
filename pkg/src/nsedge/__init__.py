"""nsedge: classify multipartite no-signaling assemblages.

Decide whether an assemblage admits a local-hidden-state part, subtract the
maximal such part, build witnesses from assemblages that admit none, and run
the quantum-realization constructions and no-go scans at desk scale.
"""

from .assemblage import (
    Assemblage,
    LhsModel,
    LhsTerm,
    MeasurementSet,
    ValidationReport,
    from_lhs,
    from_quantum,
    lhs_point,
    load_assemblage,
    marginal,
    mix,
    save_assemblage,
    total_trace,
    validate,
)
from .edge import (
    EdgeReport,
    SubtractionResult,
    det_criterion,
    is_on_edge,
    max_subtraction,
    qubit_rectangle_criterion,
    rank_screen,
    subtractable_along,
    total_rank_bound,
)
from .linalg import (
    RankTolerance,
    Subspace,
    eigh,
    image_projector,
    min_eigenvalue,
    pseudo_inverse,
    range_intersection,
    rank_of,
)
from .realization import (
    RealizationRecipe,
    ScanReport,
    make_rng,
    povm_pvm_split,
    pure_state_edge_recipe,
    random_lhs_assemblage,
    random_lhs_model,
    random_mixed_state,
    random_povm,
    random_pure_state,
    random_pvm_qubit,
    rank_nogo_scan,
    rank_two_edge_recipe,
    schmidt_check,
)
from .scenario import (
    DeterministicBox,
    Position,
    Scenario,
    enumerate_deterministic_boxes,
    rectangle_partition,
    support_set,
)
from .witness import (
    BlockOperator,
    WitnessCertificate,
    build_witness,
    certify,
    evaluate,
    kernel_projector_blocks,
    lhs_floor,
)

__version__ = "0.1.0"
