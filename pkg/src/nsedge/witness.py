"""Witness construction and evaluation for assemblages without an LHS model.

The canonical construction starts from an assemblage with no subtractable
LHS part: take blockwise kernel projectors (one minus the image projector),
compute the floor of their pairing against all LHS assemblages, and shift by
the floor divided by the total trace.  The resulting block operator pairs
nonnegatively with every LHS assemblage and strictly negatively with the
seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg, serialize
from .assemblage import Assemblage, check_block_map
from .edge import EdgeReport, is_on_edge
from .errors import DimensionMismatchError, NonpositiveEpsilonError, NotOnEdgeError
from .scenario import (
    BOX_ENUMERATION_CAP,
    DeterministicBox,
    Position,
    Scenario,
    iter_deterministic_boxes,
    parse_position,
    position_str,
    support_set,
)


@dataclass(frozen=True)
class BlockOperator:
    """Position-indexed Hermitian blocks (not necessarily PSD)."""

    scenario: Scenario
    blocks: dict[Position, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "blocks", check_block_map(self.scenario, self.blocks))

    def block(self, a, x) -> np.ndarray:
        return self.blocks[Position(tuple(a), tuple(x))]

    def stacked(self, positions=None) -> np.ndarray:
        if positions is None:
            positions = self.scenario.positions()
        return np.stack([self.blocks[p] for p in positions])


def kernel_projector_blocks(
    a: Assemblage,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
    edge_report: EdgeReport | None = None,
) -> BlockOperator:
    """Blockwise projectors onto the orthogonal complement of each image.

    Requires a seed with no subtractable LHS part (pass a precomputed
    ``edge_report`` to skip the scan).  Pairs to zero with the seed by
    construction and is invariant under positive rescaling of any block.
    """
    report = edge_report if edge_report is not None else is_on_edge(a, rank_tol)
    if not report.on_edge:
        raise NotOnEdgeError("seed assemblage admits an LHS part; no canonical witness")
    d = a.scenario.trusted_dim
    eye = np.eye(d)
    blocks = {
        pos: eye - linalg.image_projector(a.blocks[pos], rank_tol)
        for pos in a.scenario.positions()
    }
    return BlockOperator(scenario=a.scenario, blocks=blocks)


def lhs_floor(
    z: BlockOperator,
    cap: int = BOX_ENUMERATION_CAP,
) -> tuple[float, DeterministicBox]:
    """Largest value below the pairing of ``z`` with every LHS assemblage.

    Linearity reduces the infimum over the convex LHS set to its extreme
    points, a deterministic box carrying a pure state; for each box the best
    pure state gives the smallest eigenvalue of the summed support blocks.
    Ties break toward the canonical (lowest-index) box.
    """
    s = z.scenario
    best: float | None = None
    best_box: DeterministicBox | None = None
    for box in iter_deterministic_boxes(s, cap):
        total = np.zeros((s.trusted_dim, s.trusted_dim), dtype=complex)
        for pos in support_set(box, s):
            total += z.blocks[pos]
        lam = float(np.linalg.eigvalsh(linalg.hermitian_part(total))[0])
        if best is None or lam < best - 1e-15:
            best = lam
            best_box = box
    assert best is not None and best_box is not None
    return best, best_box


def build_witness(z: BlockOperator, epsilon: float) -> BlockOperator:
    """Shift the kernel-projector blocks by ``epsilon`` per setting tuple.

    Each block becomes ``z - (epsilon / num_setting_tuples) * 1``; with the
    maximal floor the result vanishes on some extreme LHS point.
    """
    if epsilon <= 0:
        raise NonpositiveEpsilonError(f"epsilon must be positive, got {epsilon}")
    s = z.scenario
    shift = epsilon / s.num_setting_tuples
    eye = np.eye(s.trusted_dim)
    blocks = {pos: z.blocks[pos] - shift * eye for pos in s.positions()}
    return BlockOperator(scenario=s, blocks=blocks)


def evaluate(w: BlockOperator, a: Assemblage) -> float:
    """Pairing ``sum Tr(W_{a|x} sigma_{a|x})`` of a block operator with an assemblage."""
    if (
        w.scenario.settings != a.scenario.settings
        or w.scenario.outcomes != a.scenario.outcomes
        or w.scenario.trusted_dim != a.scenario.trusted_dim
    ):
        raise DimensionMismatchError("witness and assemblage live on different scenarios")
    total = 0.0
    for pos in w.scenario.positions():
        total += float(np.trace(w.blocks[pos] @ a.blocks[pos]).real)
    return total


@dataclass
class WitnessCertificate:
    """Everything needed to re-verify a witness: base blocks, floor, shifted blocks."""

    kernel_projectors: BlockOperator
    epsilon: float
    argmin_box: DeterministicBox
    witness: BlockOperator
    seed_id: str | None = None

    @property
    def scenario(self) -> Scenario:
        return self.witness.scenario

    def to_json_dict(self) -> dict:
        s = self.scenario
        return {
            "scenario": {
                "n": s.n,
                "settings": list(s.settings),
                "outcomes": list(s.outcomes),
                "d": s.trusted_dim,
            },
            "kernel_projectors": {
                position_str(pos, s): serialize.matrix_to_json(self.kernel_projectors.blocks[pos])
                for pos in s.positions()
            },
            "epsilon": self.epsilon,
            "argmin_box": [list(t) for t in self.argmin_box.tables],
            "witness": {
                position_str(pos, s): serialize.matrix_to_json(self.witness.blocks[pos])
                for pos in s.positions()
            },
            "meta": {"seed_assemblage_id": self.seed_id},
        }


def certificate_from_json_dict(data: dict) -> WitnessCertificate:
    try:
        sc = data["scenario"]
        scenario = Scenario(
            settings=tuple(sc["settings"]),
            outcomes=tuple(sc["outcomes"]),
            trusted_dim=int(sc["d"]),
        )
        z_blocks = {
            parse_position(key, scenario): serialize.matrix_from_json(mat, scenario.trusted_dim)
            for key, mat in data["kernel_projectors"].items()
        }
        w_blocks = {
            parse_position(key, scenario): serialize.matrix_from_json(mat, scenario.trusted_dim)
            for key, mat in data["witness"].items()
        }
        box = DeterministicBox(tables=tuple(tuple(int(v) for v in t) for t in data["argmin_box"]))
        meta = data.get("meta", {})
        return WitnessCertificate(
            kernel_projectors=BlockOperator(scenario=scenario, blocks=z_blocks),
            epsilon=float(data["epsilon"]),
            argmin_box=box,
            witness=BlockOperator(scenario=scenario, blocks=w_blocks),
            seed_id=meta.get("seed_assemblage_id"),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed witness certificate: {exc}") from exc


def save_certificate(cert: WitnessCertificate, path) -> None:
    with open(path, "w") as fh:
        json.dump(cert.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_certificate(path) -> WitnessCertificate:
    with open(path) as fh:
        return certificate_from_json_dict(json.load(fh))


def certify(
    a: Assemblage,
    seed_id: str | None = None,
    epsilon: float | None = None,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
    edge_report: EdgeReport | None = None,
    cap: int = BOX_ENUMERATION_CAP,
) -> WitnessCertificate:
    """Full pipeline: kernel projectors, LHS floor, shifted witness.

    ``epsilon`` defaults to the maximal floor; a smaller positive value may
    be supplied (a larger one would break nonnegativity on LHS assemblages
    and is rejected).
    """
    z = kernel_projector_blocks(a, rank_tol, edge_report=edge_report)
    floor, argmin_box = lhs_floor(z, cap)
    if epsilon is None:
        epsilon = floor
    elif epsilon > floor + 1e-12:
        raise NonpositiveEpsilonError(
            f"requested epsilon {epsilon} exceeds the LHS floor {floor}"
        )
    if epsilon <= 0:
        raise NonpositiveEpsilonError(
            f"LHS floor is {floor}; seed produced no usable witness shift"
        )
    w = build_witness(z, epsilon)
    return WitnessCertificate(
        kernel_projectors=z,
        epsilon=float(epsilon),
        argmin_box=argmin_box,
        witness=w,
        seed_id=seed_id,
    )
