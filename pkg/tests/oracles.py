"""Independent oracles for cross-checking the library.

Each routine recomputes a quantity along a different path than the code it
checks: principal angles instead of kernel sums, PSD bisection instead of the
pseudo-inverse formula, explicit index loops instead of einsum contractions.
"""

from __future__ import annotations

import numpy as np

from nsedge.scenario import Scenario, iter_deterministic_boxes, support_set


def image_basis(op: np.ndarray, rel_tol: float = 1e-8, abs_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of a PSD operator's image."""
    herm = (op + op.conj().T) / 2
    w, v = np.linalg.eigh(herm)
    cutoff = max(abs_tol, rel_tol * float(max(w.max(initial=0.0), 0.0)))
    return v[:, w > cutoff]


def principal_angle_intersection(ops, angle_tol: float = 1e-8) -> np.ndarray:
    """Intersection of operator images via pairwise principal angles (SVD).

    Singular values of U^dag V equal the cosines of the principal angles
    between the column spaces; values at 1 mark common directions.
    """
    current = image_basis(ops[0])
    for op in ops[1:]:
        other = image_basis(op)
        if current.shape[1] == 0 or other.shape[1] == 0:
            return current[:, :0]
        u, s, _ = np.linalg.svd(current.conj().T @ other)
        keep = s >= 1.0 - angle_tol
        current = current @ u[:, : int(keep.sum())]
        if current.shape[1]:
            q, _ = np.linalg.qr(current)
            current = q[:, : current.shape[1]]
    return current


def bisection_epsilon(asm, box, psi, iters: int = 60, psd_slack: float = 1e-11) -> float:
    """Largest t keeping every support block PSD after subtracting t |psi><psi|."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    proj = np.outer(psi, psi.conj())
    blocks = [asm.blocks[p] for p in support_set(box, asm.scenario)]

    def feasible(t: float) -> bool:
        for b in blocks:
            shifted = b - t * proj
            herm = (shifted + shifted.conj().T) / 2
            if float(np.linalg.eigvalsh(herm)[0]) < -psd_slack:
                return False
        return True

    lo, hi = 0.0, 1.0
    if feasible(hi):
        return hi
    for _ in range(iters):
        mid = (lo + hi) / 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def naive_quantum_blocks(state, measurement_elements, dims, trusted_dim):
    """Assemblage blocks by full Kronecker products and looped partial traces.

    ``measurement_elements[party][setting][outcome]``; no einsum, no reshape
    tricks: multiply the full operators and sum diagonal sub-blocks.
    """
    n = len(dims)
    m_total = int(np.prod(dims))
    d = trusted_dim
    settings = [len(p) for p in measurement_elements]
    outcomes = [len(p[0]) for p in measurement_elements]
    scenario = Scenario(settings=tuple(settings), outcomes=tuple(outcomes), trusted_dim=d)
    blocks = {}
    for pos in scenario.positions():
        op = np.array([[1.0 + 0.0j]])
        for i in range(n):
            op = np.kron(op, measurement_elements[i][pos.x[i]][pos.a[i]])
        full = np.kron(op, np.eye(d, dtype=complex)) @ np.asarray(state, dtype=complex)
        sigma = np.zeros((d, d), dtype=complex)
        for k in range(m_total):
            for i in range(d):
                for j in range(d):
                    sigma[i, j] += full[k * d + i, k * d + j]
        blocks[pos] = sigma
    return scenario, blocks


def naive_lhs_blocks(model, scenario):
    """Literal triple loop over terms, parties and positions."""
    d = scenario.trusted_dim
    blocks = {}
    for pos in scenario.positions():
        acc = np.zeros((d, d), dtype=complex)
        for term in model.terms:
            weight = term.weight
            for party in range(scenario.n):
                weight = weight * float(term.conditionals[party][pos.x[party]][pos.a[party]])
            acc = acc + weight * np.asarray(term.state, dtype=complex)
        blocks[pos] = acc
    return blocks


def d1_support_on_edge(probs: dict, scenario: Scenario) -> bool:
    """Brute force over deterministic boxes for trusted dimension one.

    A box is subtractable exactly when its whole support carries strictly
    positive probability; on the edge iff no box qualifies.
    """
    for box in iter_deterministic_boxes(scenario):
        if all(probs.get(p, 0.0) > 1e-12 for p in support_set(box, scenario)):
            return False
    return True


def rectangle_rule_for_box(asm, box) -> bool:
    """Zero/rank-one block classification over one box support (d = 2).

    True when the support has no zero block and all rank-one blocks share a
    single direction, i.e. a common image vector exists.
    """
    vecs = []
    for pos in support_set(box, asm.scenario):
        m = (asm.blocks[pos] + asm.blocks[pos].conj().T) / 2
        if float(np.trace(m).real) < 1e-12:
            return False
        w, v = np.linalg.eigh(m)
        cutoff = max(1e-10, 1e-8 * float(w[-1]))
        rank = int(np.count_nonzero(w > cutoff))
        if rank == 1:
            vecs.append(v[:, -1])
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            if abs(complex(vecs[i].conj() @ vecs[j])) < 1.0 - 1e-8:
                return False
    return True
