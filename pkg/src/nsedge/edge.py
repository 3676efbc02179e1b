"""Edge membership and LHS-part subtraction.

The primary decision mechanism: an LHS part can be subtracted from an
assemblage along a deterministic box exactly when the blocks on the box's
support share a common image vector.  That common image is obtained as the
kernel of ``K = sum (1 - R_i)`` over the support, which also yields a
spectral margin per box; the determinant of the projector product is kept as
an independent diagnostic, and rank-counting screens give cheap one-sided
certificates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .assemblage import Assemblage
from .errors import NotPSDError, VectorNotInImageError, WrongDimensionError
from .scenario import (
    BOX_ENUMERATION_CAP,
    DeterministicBox,
    check_box_cap,
    iter_deterministic_boxes,
    support_set,
)
from .serialize import vector_to_json

ZERO_BLOCK_TRACE_TOL = 1e-12
MARGIN_BAND_FACTOR = 10.0
IMAGE_RESIDUAL_TOL = 1e-8
_CHUNK = 2048


@dataclass(frozen=True)
class BoxDiagnostic:
    """Per-box outcome of the common-image computation."""

    box_index: int
    intersection_dim: int
    margin: float  # smallest eigenvalue of sum(1 - R) over the support
    marginal: bool  # margin inside the undecided band


@dataclass
class EdgeReport:
    """Verdict of the all-boxes common-image scan.

    ``on_edge`` holds when every box margin clears ``10 * intersection_tol``.
    Margins inside ``[intersection_tol, 10 * intersection_tol]`` are flagged
    marginal: the verdict is then not-on-edge but no subtraction witness is
    certified, so ``witness_vector`` can be absent even with ``on_edge`` false.
    """

    on_edge: bool
    per_box: list[BoxDiagnostic]
    witness_vector: np.ndarray | None
    witness_box_index: int | None
    witness_box: DeterministicBox | None
    marginal_boxes: list[int]
    intersection_tol: float

    def to_dict(self) -> dict:
        return {
            "on_edge": self.on_edge,
            "intersection_tol": self.intersection_tol,
            "boxes": [
                {
                    "index": b.box_index,
                    "intersection_dim": b.intersection_dim,
                    "margin": b.margin,
                    "marginal": b.marginal,
                }
                for b in self.per_box
            ],
            "witness_box_index": self.witness_box_index,
            "witness_box_tables": list(map(list, self.witness_box.tables))
            if self.witness_box is not None
            else None,
            "witness_vector": vector_to_json(self.witness_vector)
            if self.witness_vector is not None
            else None,
            "marginal_boxes": self.marginal_boxes,
        }


@dataclass
class SubtractionResult:
    """Maximal LHS part removed along one box and one vector."""

    epsilon: float
    box: DeterministicBox
    vector: np.ndarray
    residual: Assemblage  # unnormalized remainder, input - epsilon * (box x vector)
    renormalized_residual: Assemblage | None  # residual / (1 - epsilon); None when epsilon ~ 1

    def reconstruction_error(self, original: Assemblage) -> float:
        """Max-norm defect of residual + epsilon * (box x vector) against the input."""
        proj = np.outer(self.vector, self.vector.conj())
        worst = 0.0
        for pos in original.scenario.positions():
            rebuilt = self.residual.blocks[pos] + self.epsilon * self.box.prob(pos) * proj
            worst = max(worst, float(np.max(np.abs(rebuilt - original.blocks[pos]))))
        return worst

    def to_json_dict(self) -> dict:
        from .assemblage import to_json_dict as asm_to_json

        return {
            "epsilon": self.epsilon,
            "box_tables": [list(t) for t in self.box.tables],
            "vector": vector_to_json(self.vector),
            "residual": asm_to_json(self.residual),
            "renormalized_residual": asm_to_json(self.renormalized_residual)
            if self.renormalized_residual is not None
            else None,
        }


def _image_projectors(stack: np.ndarray, rank_tol: linalg.RankTolerance, psd_tol: float) -> np.ndarray:
    """Batched image projectors for an (N, d, d) stack of PSD blocks."""
    herm = (stack + np.conj(np.swapaxes(stack, -1, -2))) / 2
    w, v = np.linalg.eigh(herm)
    lam_min = float(w.min(initial=0.0))
    if lam_min < -psd_tol:
        raise NotPSDError(f"block eigenvalue {lam_min:.3e} below -{psd_tol:.1e}")
    w = np.clip(w, 0.0, None)
    cutoffs = np.maximum(rank_tol.abs_tol, rank_tol.rel_tol * w.max(axis=1))
    keep = (w > cutoffs[:, None]).astype(float)
    return np.einsum("nij,nj,nkj->nik", v, keep, v.conj())


def _support_indices(a: Assemblage):
    """Canonical position list, index lookup and per-box support index arrays."""
    positions = a.scenario.positions()
    index = {p: i for i, p in enumerate(positions)}
    return positions, index


def _refine_common_vector(v: np.ndarray, projectors, sweeps: int = 4) -> np.ndarray:
    """Sharpen a near-common vector by alternating projections onto the images."""
    for _ in range(sweeps):
        for r in projectors:
            v = r @ v
        norm = float(np.linalg.norm(v))
        if norm < 1e-14:
            return v
        v = v / norm
    return linalg.fix_phase(v)


def subtractable_along(
    a: Assemblage,
    box: DeterministicBox,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
    intersection_tol: float = linalg.INTERSECTION_TOL,
) -> np.ndarray | None:
    """Unit vector in the common image of the box's support blocks, if any.

    A numerically zero block (trace below ``ZERO_BLOCK_TRACE_TOL``) has empty
    image and forces ``None``.
    """
    support = support_set(box, a.scenario)
    blocks = [a.blocks[p] for p in support]
    if any(abs(float(np.trace(b).real)) < ZERO_BLOCK_TRACE_TOL for b in blocks):
        return None
    d = a.scenario.trusted_dim
    projectors = _image_projectors(np.stack(blocks), rank_tol, linalg.PSD_TOL)
    k_total = len(blocks) * np.eye(d) - projectors.sum(axis=0)
    w, v = np.linalg.eigh(linalg.hermitian_part(k_total))
    if w[0] > intersection_tol:
        return None
    vec = _refine_common_vector(v[:, 0], projectors)
    return vec


def is_on_edge(
    a: Assemblage,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
    intersection_tol: float = linalg.INTERSECTION_TOL,
    cap: int = BOX_ENUMERATION_CAP,
) -> EdgeReport:
    """Scan every local deterministic box for a subtractable LHS part.

    The assemblage is on the edge when no box admits a common image vector.
    Boxes are processed in canonical order; the first certified-subtractable
    box supplies the witness vector.
    """
    s = a.scenario
    check_box_cap(s, cap)
    positions, index = _support_indices(a)
    stack = a.stacked(positions)
    traces = np.real(np.trace(stack, axis1=-2, axis2=-1))
    projectors = _image_projectors(stack, rank_tol, linalg.PSD_TOL)
    complements = np.eye(s.trusted_dim) - projectors
    # Exactly-zero blocks have empty image: their complement is the identity,
    # which already forces the box kernel empty; keep their projector at 0.

    setting_tuples = s.setting_tuples()
    per_box: list[BoxDiagnostic] = []
    marginal_boxes: list[int] = []
    witness_index: int | None = None
    witness_box: DeterministicBox | None = None
    band_top = MARGIN_BAND_FACTOR * intersection_tol

    boxes_iter = iter_deterministic_boxes(s, cap)
    chunk_boxes: list[DeterministicBox] = []
    chunk_supports: list[list[int]] = []
    base_index = 0
    on_edge = True

    def flush():
        nonlocal base_index, witness_index, witness_box, on_edge
        if not chunk_boxes:
            return
        sel = np.array(chunk_supports)  # (B, |I_L|)
        ks = complements[sel].sum(axis=1)  # (B, d, d)
        ks = (ks + np.conj(np.swapaxes(ks, -1, -2))) / 2
        w = np.linalg.eigvalsh(ks)
        margins = w[:, 0]
        dims = (w <= intersection_tol).sum(axis=1)
        zero_block = (np.abs(traces[sel]) < ZERO_BLOCK_TRACE_TOL).any(axis=1)
        for j, box in enumerate(chunk_boxes):
            idx = base_index + j
            margin = float(margins[j])
            dim = 0 if zero_block[j] else int(dims[j])
            subtractable = (not zero_block[j]) and margin <= intersection_tol
            in_band = (not subtractable) and margin <= band_top
            per_box.append(
                BoxDiagnostic(
                    box_index=idx,
                    intersection_dim=dim if subtractable else 0,
                    margin=margin,
                    marginal=in_band,
                )
            )
            if in_band:
                marginal_boxes.append(idx)
                on_edge = False
            if subtractable:
                on_edge = False
                if witness_index is None:
                    witness_index = idx
                    witness_box = box
        base_index += len(chunk_boxes)
        chunk_boxes.clear()
        chunk_supports.clear()

    for box in boxes_iter:
        chunk_boxes.append(box)
        chunk_supports.append(
            [index[(box.outcome_tuple(x), x)] for x in setting_tuples]
        )
        if len(chunk_boxes) >= _CHUNK:
            flush()
    flush()

    vector = None
    if witness_box is not None:
        vector = subtractable_along(a, witness_box, rank_tol, intersection_tol)
    return EdgeReport(
        on_edge=on_edge,
        per_box=per_box,
        witness_vector=vector,
        witness_box_index=witness_index,
        witness_box=witness_box,
        marginal_boxes=marginal_boxes,
        intersection_tol=intersection_tol,
    )


def det_criterion(
    a: Assemblage,
    box: DeterministicBox,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
) -> float:
    """|det(prod R - 1)| over the box support, in canonical position order.

    Zero exactly when the support blocks share a common image vector.  Kept
    as a diagnostic cross-check: products of projectors are not normal and
    the determinant underflows easily, so the kernel margin is the primary
    decision route.
    """
    support = support_set(box, a.scenario)
    d = a.scenario.trusted_dim
    product = np.eye(d, dtype=complex)
    for pos in support:
        product = product @ linalg.image_projector(a.blocks[pos], rank_tol)
    return float(np.abs(np.linalg.det(product - np.eye(d))))


def max_subtraction(
    a: Assemblage,
    box: DeterministicBox,
    psi: np.ndarray,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
    residual_tol: float = IMAGE_RESIDUAL_TOL,
) -> SubtractionResult:
    """Remove the largest LHS part ``epsilon * (box x |psi><psi|)``.

    ``epsilon`` is the minimum over support positions of
    ``1 / <psi| pinv(sigma) |psi>``, the exact positivity threshold for
    rank-one subtraction from a PSD block.  The residual keeps every block
    PSD and saturates at the argmin position (one eigenvalue hits zero).
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    d = a.scenario.trusted_dim
    if psi.shape[0] != d:
        raise VectorNotInImageError(f"vector has dimension {psi.shape[0]}, expected {d}")
    norm = float(np.linalg.norm(psi))
    if norm < 1e-12:
        raise VectorNotInImageError("zero vector")
    psi = psi / norm

    support = support_set(box, a.scenario)
    inverses = []
    for pos in support:
        block = a.blocks[pos]
        r = linalg.image_projector(block, rank_tol)
        residual = float(np.linalg.norm(r @ psi - psi))
        if residual > residual_tol:
            raise VectorNotInImageError(
                f"vector leaves the image of the block at {pos} (residual {residual:.3e})"
            )
        inverses.append(linalg.pseudo_inverse(block, rank_tol))

    epsilon = min(
        1.0 / float(np.real(psi.conj() @ inv @ psi)) for inv in inverses
    )

    proj = np.outer(psi, psi.conj())
    blocks = {pos: a.blocks[pos].copy() for pos in a.scenario.positions()}
    for pos in support:
        blocks[pos] = blocks[pos] - epsilon * proj
    residual_asm = Assemblage(scenario=a.scenario, blocks=blocks)

    renormalized = None
    if epsilon < 1.0 - 1e-12:
        renorm_blocks = {
            pos: blk / (1.0 - epsilon) for pos, blk in residual_asm.blocks.items()
        }
        renormalized = Assemblage(scenario=a.scenario, blocks=renorm_blocks)
    return SubtractionResult(
        epsilon=float(epsilon),
        box=box,
        vector=psi,
        residual=residual_asm,
        renormalized_residual=renormalized,
    )


def rank_screen(
    a: Assemblage,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
    cap: int = BOX_ENUMERATION_CAP,
) -> DeterministicBox | None:
    """First box whose support ranks sum beyond ``(|I_L| - 1) * d``.

    Such a box guarantees a nontrivial common image by iterated dimension
    counting, hence a subtractable LHS part.  Sound but not complete: a
    silent screen proves nothing.
    """
    s = a.scenario
    positions, index = _support_indices(a)
    stack = a.stacked(positions)
    herm = (stack + np.conj(np.swapaxes(stack, -1, -2))) / 2
    w = np.clip(np.linalg.eigvalsh(herm), 0.0, None)
    cutoffs = np.maximum(rank_tol.abs_tol, rank_tol.rel_tol * w.max(axis=1))
    ranks = (w > cutoffs[:, None]).sum(axis=1)

    setting_tuples = s.setting_tuples()
    n_support = len(setting_tuples)
    bound = (n_support - 1) * s.trusted_dim
    for box in iter_deterministic_boxes(s, cap):
        total = sum(int(ranks[index[(box.outcome_tuple(x), x)]]) for x in setting_tuples)
        if total > bound:
            return box
    return None


def total_rank_bound(
    a: Assemblage,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
) -> tuple[int, int, bool]:
    """Sum of all block ranks against ``(prod X - 1) * prod A * d``.

    Returns ``(rank_sum, bound, satisfied)``; an edge assemblage always
    satisfies the bound, so a violation certifies a subtractable part.
    """
    s = a.scenario
    rank_sum = sum(linalg.rank_of(b, rank_tol) for b in a.blocks.values())
    bound = (s.num_setting_tuples - 1) * s.num_outcome_tuples * s.trusted_dim
    return rank_sum, bound, rank_sum <= bound


def _proportional(m1: np.ndarray, m2: np.ndarray, tol: float = 1e-8) -> bool:
    """Hilbert-Schmidt proportionality test, scale-free and symmetric."""
    n1 = float(np.linalg.norm(m1))
    n2 = float(np.linalg.norm(m2))
    if n1 == 0.0 or n2 == 0.0:
        return True
    overlap = abs(complex(np.trace(m1.conj().T @ m2))) / (n1 * n2)
    return overlap >= 1.0 - tol


def qubit_rectangle_criterion(
    a: Assemblage,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
    cap: int = BOX_ENUMERATION_CAP,
) -> bool:
    """Qubit-only subtractability test over box supports.

    For trusted dimension two, an LHS part can be subtracted exactly when
    some box support contains neither a zero block nor two rank-one blocks
    proportional to different pure states.  Returns that boolean; used as an
    independent oracle against the kernel route.
    """
    s = a.scenario
    if s.trusted_dim != 2:
        raise WrongDimensionError("rectangle criterion is defined for trusted_dim == 2 only")
    positions, index = _support_indices(a)
    stack = a.stacked(positions)
    traces = np.real(np.trace(stack, axis1=-2, axis2=-1))
    herm = (stack + np.conj(np.swapaxes(stack, -1, -2))) / 2
    w = np.clip(np.linalg.eigvalsh(herm), 0.0, None)
    cutoffs = np.maximum(rank_tol.abs_tol, rank_tol.rel_tol * w.max(axis=1))
    ranks = (w > cutoffs[:, None]).sum(axis=1)

    setting_tuples = s.setting_tuples()
    for box in iter_deterministic_boxes(s, cap):
        idxs = [index[(box.outcome_tuple(x), x)] for x in setting_tuples]
        if any(abs(traces[i]) < ZERO_BLOCK_TRACE_TOL for i in idxs):
            continue
        rank_one = [i for i in idxs if ranks[i] == 1]
        ok = True
        for j in range(len(rank_one)):
            for k in range(j + 1, len(rank_one)):
                if not _proportional(stack[rank_one[j]], stack[rank_one[k]]):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return True
    return False
