"""Randomized structural properties of conditioned operators and block grids.

Shared between the quick unit tests and the full-scale acceptance runs; each
check returns (violations, borderline_discards) over the requested number of
draws.
"""

from __future__ import annotations

import numpy as np

from nsedge.assemblage import MeasurementSet, from_quantum
from nsedge.linalg import DEFAULT_RANK_TOL, hermitian_part
from nsedge.realization import (
    conditioned_operator,
    hs_proportional,
    random_mixed_state,
    random_pure_state,
    random_pvm_qubit,
    random_unitary,
)


def _rank_with_border(m, band: float = 10.0) -> tuple[int, bool]:
    """Numerical rank plus a flag for eigenvalues hugging the cutoff."""
    w = np.clip(np.linalg.eigvalsh(hermitian_part(m)), 0.0, None)
    cutoff = DEFAULT_RANK_TOL.cutoff(w)
    rank = int(np.count_nonzero(w > cutoff))
    border = bool(np.any((w > cutoff / band) & (w < cutoff * band)))
    return rank, border


def check_rank3_conditioned(draws: int, rng, d: int = 2) -> tuple[int, int]:
    """Rank-three two-subsystem states never condition onto two rank-one parts.

    For d = 2 additionally no conditioned part may vanish.
    """
    violations = 0
    borderline = 0
    done = 0
    while done < draws:
        rho = random_mixed_state(2 * d, 3, rng)
        p0, p1 = random_pvm_qubit(rng)
        r0, b0 = _rank_with_border(conditioned_operator(rho, (2, d), 0, p0))
        r1, b1 = _rank_with_border(conditioned_operator(rho, (2, d), 0, p1))
        if b0 or b1:
            borderline += 1
            continue
        if r0 == 1 and r1 == 1:
            violations += 1
        if d == 2 and (r0 == 0 or r1 == 0):
            violations += 1
        done += 1
    return violations, borderline


def check_rank3_zero_forces_rank3(draws: int, rng, d: int = 3) -> tuple[int, int]:
    """A vanishing conditioned part of a rank-three state forces full rank opposite.

    States are built with one first-subsystem direction unpopulated so the
    matching projector conditions to zero.
    """
    violations = 0
    borderline = 0
    done = 0
    while done < draws:
        v = random_pure_state(2, rng)
        v_perp = np.array([-np.conj(v[1]), np.conj(v[0])])
        basis = random_unitary(d, rng)[:, :3]
        weights = rng.uniform(0.1, 1.0, size=3)
        weights /= weights.sum()
        rho = np.zeros((2 * d, 2 * d), dtype=complex)
        for i in range(3):
            psi = np.kron(v_perp, basis[:, i])
            rho += weights[i] * np.outer(psi, psi.conj())
        p_zero = np.outer(v, v.conj())
        p_other = np.eye(2) - p_zero
        r_zero, b0 = _rank_with_border(conditioned_operator(rho, (2, d), 0, p_zero))
        r_other, b1 = _rank_with_border(conditioned_operator(rho, (2, d), 0, p_other))
        if b0 or b1:
            borderline += 1
            continue
        if r_zero != 0 or r_other != 3:
            violations += 1
        done += 1
    return violations, borderline


def check_rank2_zero_forces_proportional(draws: int, rng, d: int = 2) -> tuple[int, int]:
    """Rank-two states with one vanishing conditioned part.

    The three remaining conditioned operators (same pair and a second,
    different pair) must have rank two and be mutually proportional.
    """
    violations = 0
    borderline = 0
    done = 0
    while done < draws:
        v = random_pure_state(2, rng)
        v_perp = np.array([-np.conj(v[1]), np.conj(v[0])])
        basis = random_unitary(d, rng)[:, :2]
        lam = float(rng.uniform(0.2, 0.8))
        rho = np.zeros((2 * d, 2 * d), dtype=complex)
        for i, w in enumerate((lam, 1.0 - lam)):
            psi = np.kron(v_perp, basis[:, i])
            rho += w * np.outer(psi, psi.conj())
        pair0 = (np.outer(v, v.conj()), np.outer(v_perp, v_perp.conj()))
        pair1 = random_pvm_qubit(rng)
        # pairs must differ beyond relabeling
        overlap = abs(complex(v.conj() @ pair1[0] @ v))
        if overlap < 1e-3 or overlap > 1.0 - 1e-3:
            continue
        others = []
        flagged = False
        r_zero, b = _rank_with_border(conditioned_operator(rho, (2, d), 0, pair0[0]))
        flagged |= b
        for el in (pair0[1], pair1[0], pair1[1]):
            r, b = _rank_with_border(conditioned_operator(rho, (2, d), 0, el))
            flagged |= b
            others.append((r, conditioned_operator(rho, (2, d), 0, el)))
        if flagged:
            borderline += 1
            continue
        ok = r_zero == 0 and all(r == 2 for r, _ in others)
        for i in range(len(others)):
            for j in range(i + 1, len(others)):
                ok = ok and hs_proportional(others[i][1], others[j][1])
        if not ok:
            violations += 1
        done += 1
    return violations, borderline


def _row_perms():
    """Index maps on (x, a) pairs generated by setting swaps and outcome flips."""
    perms = []
    for swap in (0, 1):
        for f0 in (0, 1):
            for f1 in (0, 1):
                mapping = []
                for r in range(4):
                    x, a = divmod(r, 2)
                    a ^= f0 if x == 0 else f1
                    x ^= swap
                    mapping.append(2 * x + a)
                perms.append(tuple(mapping))
    return perms


def forbidden_grids() -> frozenset:
    """All relabelings (and the party swap) of the two impossible rank grids."""
    form_a = np.full((4, 4), 2, dtype=int)
    form_a[:2, :2] = 1
    form_a[2:, 2:] = 1
    form_b = np.full((4, 4), 2, dtype=int)
    for r in range(4):
        x = r // 2
        for c in range(4):
            b = c % 2
            if b == x:
                form_b[r, c] = 1
    grids = set()
    perms = _row_perms()
    for form in (form_a, form_b):
        for rp in perms:
            for cp in perms:
                g = form[np.ix_(rp, cp)]
                grids.add(tuple(map(tuple, g)))
                grids.add(tuple(map(tuple, g.T)))
    return frozenset(grids)


FORBIDDEN_GRIDS = forbidden_grids()


def assemblage_rank_grid(asm) -> tuple[tuple, bool]:
    """4x4 block-rank grid (rows (x, a), cols (y, b)) plus a borderline flag."""
    from nsedge.scenario import Position

    grid = np.zeros((4, 4), dtype=int)
    border = False
    for x in (0, 1):
        for a in (0, 1):
            for y in (0, 1):
                for b in (0, 1):
                    rank, flag = _rank_with_border(asm.blocks[Position((a, b), (x, y))])
                    grid[2 * x + a, 2 * y + b] = rank
                    border |= flag
    return tuple(map(tuple, grid)), border


def check_forbidden_patterns(draws: int, rng) -> tuple[int, int]:
    """Rank-three three-qubit states never produce the impossible block grids."""
    violations = 0
    borderline = 0
    done = 0
    while done < draws:
        rho = random_mixed_state(8, 3, rng)
        pairs = []
        for _ in range(2):
            p0 = random_pvm_qubit(rng)
            p1 = random_pvm_qubit(rng)
            pairs.append((p0, p1))
        # second-party pairs must be different up to relabeling
        q00 = pairs[1][0][0]
        q01 = pairs[1][1][0]
        overlap = float(np.abs(np.trace(q00 @ q01)))
        if overlap < 1e-3 or overlap > 1.0 - 1e-3:
            continue
        asm = from_quantum(rho, MeasurementSet(elements=tuple(pairs)))
        grid, flag = assemblage_rank_grid(asm)
        if flag:
            borderline += 1
            continue
        if grid in FORBIDDEN_GRIDS:
            violations += 1
        done += 1
    return violations, borderline
