"""Quantum realizations of edge assemblages and randomized no-go scans.

Covers random state/measurement sampling, the constructive recipes steering
pure tripartite states and qualifying rank-two states to the edge, the
randomized verification that three-qubit states of rank at least three never
reach the edge, and the spectral split of a binary qubit POVM into a
projective part plus a positive remainder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod

import numpy as np

from . import linalg
from .assemblage import Assemblage, LhsModel, LhsTerm, MeasurementSet, from_lhs, from_quantum
from .edge import EdgeReport, is_on_edge, max_subtraction
from .errors import (
    InvalidParamsError,
    NotEntangledError,
    PreconditionFailedError,
    SearchExhaustedError,
    TrivialPOVMError,
)

RNG_ALGORITHM = "pcg64"
PROPORTIONALITY_TOL = 1e-8


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Deterministic generator; extra path keys derive independent substreams.

    Substreams keyed by sample index keep scan reports byte-identical no
    matter how the work is split across workers.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.default_rng(ss)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector."""
    if dim < 1:
        raise InvalidParamsError("dim must be >= 1")
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_mixed_state(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Random density matrix with the requested rank.

    Unitary conjugation of a random rank-``rank`` diagonal; eigenvalues are
    bounded away from zero so the rank is unambiguous under RankTolerance.
    """
    if not 1 <= rank <= dim:
        raise InvalidParamsError(f"rank must be in [1, {dim}], got {rank}")
    weights = rng.uniform(0.1, 1.0, size=rank)
    weights = weights / weights.sum()
    u = random_unitary(dim, rng)
    cols = u[:, :rank]
    return linalg.hermitian_part((cols * weights) @ cols.conj().T)


def random_pvm_qubit(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Binary projective measurement on a qubit along a Haar-random direction."""
    v = random_pure_state(2, rng)
    p = np.outer(v, v.conj())
    return p, np.eye(2) - p


def random_povm(dim: int, outcomes: int, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    """Random POVM: Wishart parts normalized by the inverse square root of their sum."""
    if outcomes < 1 or dim < 1:
        raise InvalidParamsError("dim and outcomes must be >= 1")
    parts = []
    for _ in range(outcomes):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        parts.append(g @ g.conj().T)
    total = sum(parts)
    w, v = np.linalg.eigh(linalg.hermitian_part(total))
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    return tuple(linalg.hermitian_part(inv_sqrt @ p @ inv_sqrt) for p in parts)


def random_lhs_model(
    scenario,
    rng: np.random.Generator,
    max_terms: int = 4,
    weight_floor: float = 0.05,
    prob_floor: float = 0.05,
    state_rank: int | None = None,
) -> LhsModel:
    """Random local-hidden-state model with all parameters bounded away from zero.

    Floors keep the resulting assemblage clear of rank and subtraction
    knife-edges so property tests do not flake on borderline numerics.
    """
    n_terms = int(rng.integers(1, max_terms + 1))
    weights = weight_floor + rng.uniform(0.0, 1.0, size=n_terms)
    weights = weights / weights.sum()
    d = scenario.trusted_dim
    terms = []
    for j in range(n_terms):
        conds = []
        for i in range(scenario.n):
            per_setting = []
            for _ in range(scenario.settings[i]):
                dist = prob_floor + rng.uniform(0.0, 1.0, size=scenario.outcomes[i])
                per_setting.append(dist / dist.sum())
            conds.append(tuple(per_setting))
        rank = state_rank if state_rank is not None else int(rng.integers(1, d + 1))
        terms.append(
            LhsTerm(
                weight=float(weights[j]),
                conditionals=tuple(conds),
                state=random_mixed_state(d, rank, rng),
            )
        )
    return LhsModel(terms=tuple(terms))


def random_lhs_assemblage(scenario, rng: np.random.Generator, **kwargs) -> Assemblage:
    return from_lhs(random_lhs_model(scenario, rng, **kwargs), scenario)


def schmidt_check(
    vec: np.ndarray,
    dims: tuple[int, ...],
    cut: int,
    rank_tol: linalg.RankTolerance = linalg.DEFAULT_RANK_TOL,
) -> tuple[int, np.ndarray]:
    """Schmidt rank and descending coefficients of ``vec`` across ``dims[:cut] | dims[cut:]``.

    The rank counts squared singular values (reduced-state eigenvalues)
    above the rank cutoff.
    """
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    if vec.shape[0] != prod(dims):
        raise InvalidParamsError(f"vector length {vec.shape[0]} != prod(dims) = {prod(dims)}")
    if not 0 < cut < len(dims):
        raise InvalidParamsError("cut must split the subsystems into two nonempty groups")
    norm = float(np.linalg.norm(vec))
    if norm < 1e-12:
        raise InvalidParamsError("zero vector")
    mat = (vec / norm).reshape(prod(dims[:cut]), prod(dims[cut:]))
    svals = np.linalg.svd(mat, compute_uv=False)
    probs = svals**2
    rank = int(np.count_nonzero(probs > rank_tol.cutoff(probs)))
    return rank, svals


def hs_proportional(m1: np.ndarray, m2: np.ndarray, tol: float = PROPORTIONALITY_TOL) -> bool:
    """Normalized Hilbert-Schmidt overlap test; zero operators count as proportional."""
    n1 = float(np.linalg.norm(m1))
    n2 = float(np.linalg.norm(m2))
    if n1 < 1e-12 or n2 < 1e-12:
        return True
    overlap = abs(complex(np.trace(np.asarray(m1).conj().T @ np.asarray(m2))))
    return overlap / (n1 * n2) >= 1.0 - tol


def conditioned_operator(
    rho: np.ndarray,
    dims: tuple[int, ...],
    party: int,
    element: np.ndarray,
) -> np.ndarray:
    """Partial trace of ``(element on one party x 1) rho`` over that party."""
    rho = linalg.as_operator(rho)
    total = prod(dims)
    if rho.shape[0] != total:
        raise InvalidParamsError(f"state dimension {rho.shape[0]} != prod(dims) = {total}")
    tensor = rho.reshape(dims + dims)
    n = len(dims)
    # bring the measured party's row/col axes to the front
    tensor = np.moveaxis(tensor, (party, n + party), (0, n))
    m = dims[party]
    rest = total // m
    four = tensor.reshape(m, rest, m, rest)
    return np.einsum("km,mikj->ij", np.asarray(element, dtype=complex), four)


@dataclass(frozen=True)
class RealizationRecipe:
    """A state plus measurements whose assemblage was verified on the edge."""

    state: np.ndarray
    measurements: MeasurementSet
    provenance: str
    tries: int = 1

    def realize(self) -> Assemblage:
        return from_quantum(self.state, self.measurements)

    def to_json_dict(self) -> dict:
        from . import serialize

        return {
            "provenance": self.provenance,
            "tries": self.tries,
            "dims": list(self.measurements.dims),
            "state": serialize.matrix_to_json(self.state),
            "measurements": [
                [[serialize.matrix_to_json(op) for op in setting] for setting in party]
                for party in self.measurements.elements
            ],
        }


def _edge_verified(asm: Assemblage) -> tuple[bool, EdgeReport]:
    report = is_on_edge(asm)
    solid = report.on_edge and not report.marginal_boxes
    return solid, report


def _pairwise_nonproportional(ops) -> bool:
    ops = list(ops)
    for i in range(len(ops)):
        if float(np.linalg.norm(ops[i])) < 1e-12:
            return False
        for j in range(i + 1, len(ops)):
            if hs_proportional(ops[i], ops[j]):
                return False
    return True


def pure_state_edge_recipe(
    psi: np.ndarray,
    rng: np.random.Generator,
    max_tries: int = 1000,
) -> RealizationRecipe:
    """Projective measurements steering a pure tripartite state to the edge.

    ``psi`` lives on qubit x qubit x trusted space and must be entangled
    across the (first two) | (trusted) cut.  When the first party factors
    out, the construction is deterministic: both of its measurements project
    onto the factor, and the second party's measurements are redrawn until
    the four conditioned operators are pairwise non-proportional.  Otherwise
    measurement pairs are drawn at random until the edge check succeeds.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape[0] % 4 != 0:
        raise InvalidParamsError("state must live on 2 x 2 x d")
    d = psi.shape[0] // 4
    dims = (2, 2, d)
    psi = psi / np.linalg.norm(psi)

    rank_abc, _ = schmidt_check(psi, dims, cut=2)
    if rank_abc < 2:
        raise NotEntangledError("state is separable across the untrusted | trusted cut")

    rank_a, _ = schmidt_check(psi, dims, cut=1)
    if rank_a == 1:
        # First party factors out: psi = phi_A x phi_BC with phi_BC entangled.
        mat = psi.reshape(2, 2 * d)
        u, _, vh = np.linalg.svd(mat)
        phi_a = u[:, 0]
        phi_bc = vh[0]
        p0 = np.outer(phi_a, phi_a.conj())
        a_setting = (p0, np.eye(2) - p0)
        bc = phi_bc.reshape(2, d)
        for attempt in range(1, max_tries + 1):
            q_settings = [random_pvm_qubit(rng) for _ in range(2)]
            conditioned = []
            for q_pair in q_settings:
                for q in q_pair:
                    w_q, v_q = np.linalg.eigh(linalg.hermitian_part(q))
                    vec = v_q[:, 1]  # rank-one projector direction
                    cond_vec = vec.conj() @ bc
                    conditioned.append(np.outer(cond_vec, cond_vec.conj()))
            if not _pairwise_nonproportional(conditioned):
                continue
            measurements = MeasurementSet(
                elements=((a_setting, a_setting), tuple(q_settings))
            )
            asm = from_quantum(np.outer(psi, psi.conj()), measurements)
            solid, _ = _edge_verified(asm)
            if solid:
                return RealizationRecipe(
                    state=np.outer(psi, psi.conj()),
                    measurements=measurements,
                    provenance="pure-product-construction",
                    tries=attempt,
                )
        raise SearchExhaustedError(
            f"product-case construction failed within {max_tries} tries"
        )

    for attempt in range(1, max_tries + 1):
        p_settings = tuple(random_pvm_qubit(rng) for _ in range(2))
        q_settings = tuple(random_pvm_qubit(rng) for _ in range(2))
        measurements = MeasurementSet(elements=(p_settings, q_settings))
        asm = from_quantum(np.outer(psi, psi.conj()), measurements)
        solid, _ = _edge_verified(asm)
        if solid:
            return RealizationRecipe(
                state=np.outer(psi, psi.conj()),
                measurements=measurements,
                provenance="pure-random-search",
                tries=attempt,
            )
    raise SearchExhaustedError(f"random measurement search failed within {max_tries} tries")


def rank_two_edge_recipe(
    rho: np.ndarray,
    a_measurements,
    rng: np.random.Generator,
    max_tries: int = 1000,
) -> RealizationRecipe:
    """Projective second-party measurements steering a rank-two state to the edge.

    Requires a rank-two state on qubit x qubit x trusted space whose first
    provided first-party setting conditions it onto two rank-one operators
    with entangled vectors across the remaining cut.  Second-party projective
    pairs are redrawn until, for each first-party outcome, the conditioned
    operators are pairwise non-proportional; the result is verified on the
    edge.
    """
    rho = linalg.as_operator(rho)
    if rho.shape[0] % 4 != 0:
        raise InvalidParamsError("state must live on 2 x 2 x d")
    d = rho.shape[0] // 4
    dims = (2, 2, d)
    if linalg.rank_of(rho) != 2:
        raise PreconditionFailedError(f"state rank {linalg.rank_of(rho)} != 2")

    a_settings = tuple(tuple(linalg.as_operator(m) for m in setting) for setting in a_measurements)
    if len(a_settings) == 1:
        a_settings = (a_settings[0], a_settings[0])
    if len(a_settings) != 2 or any(len(s) != 2 for s in a_settings):
        raise InvalidParamsError("need one or two binary first-party measurements")

    # conditioning setting: the first one must give rank-one entangled parts
    cond_vectors = []
    for m_elem in a_settings[0]:
        cond = conditioned_operator(rho, dims, party=0, element=m_elem)
        if linalg.rank_of(cond) != 1:
            raise PreconditionFailedError(
                "a conditioned operator of the first setting is not rank one"
            )
        w_c, v_c = linalg.psd_eigh(cond)
        vec = v_c[:, -1]
        rank_bc, _ = schmidt_check(vec, (2, d), cut=1)
        if rank_bc < 2:
            raise PreconditionFailedError(
                "a conditioned operator of the first setting is not entangled"
            )
        cond_vectors.append(vec.reshape(2, d))

    for attempt in range(1, max_tries + 1):
        q_settings = [random_pvm_qubit(rng) for _ in range(2)]
        ok = True
        for bc in cond_vectors:
            conditioned = []
            for q_pair in q_settings:
                for q in q_pair:
                    w_q, v_q = np.linalg.eigh(linalg.hermitian_part(q))
                    vec = v_q[:, 1]
                    cond_vec = vec.conj() @ bc
                    conditioned.append(np.outer(cond_vec, cond_vec.conj()))
            if not _pairwise_nonproportional(conditioned):
                ok = False
                break
        if not ok:
            continue
        measurements = MeasurementSet(elements=(a_settings, tuple(q_settings)))
        asm = from_quantum(rho, measurements)
        solid, _ = _edge_verified(asm)
        if solid:
            return RealizationRecipe(
                state=rho,
                measurements=measurements,
                provenance="rank-two-construction",
                tries=attempt,
            )
    raise SearchExhaustedError(f"second-party measurement search failed within {max_tries} tries")


def povm_pvm_split(
    settings,
    trivial_tol: float = 1e-10,
) -> tuple[float, tuple, tuple]:
    """Split binary qubit POVMs into ``alpha * PVM + remainder`` per setting.

    For each setting the first element is spectrally decomposed as
    ``M_0 = m_0 P_0 + m_1 P_1`` with ``P_0`` the large-eigenvalue projector;
    ``alpha`` is the minimum over settings of ``min(m_0, 1 - m_1)`` and every
    remainder ``M - alpha P`` stays PSD.  Elements equal to 0 or the identity
    have no such split and raise ``TrivialPOVMError``.
    """
    decomposed = []
    alpha = None
    for k, setting in enumerate(settings):
        m0 = linalg.require_hermitian(setting[0])
        m1 = linalg.require_hermitian(setting[1])
        if m0.shape != (2, 2):
            raise InvalidParamsError("split is defined for qubit POVMs")
        if np.max(np.abs(m0 + m1 - np.eye(2))) > 1e-9:
            raise InvalidParamsError(f"setting {k}: elements do not sum to the identity")
        w, v = np.linalg.eigh(m0)
        if w[0] < -1e-10 or w[1] > 1.0 + 1e-10:
            raise InvalidParamsError(f"setting {k}: eigenvalues outside [0, 1]")
        big, small = float(w[1]), float(w[0])
        if big < trivial_tol or small > 1.0 - trivial_tol:
            raise TrivialPOVMError(f"setting {k}: element is 0 or the identity")
        p0 = np.outer(v[:, 1], v[:, 1].conj())
        p1 = np.eye(2) - p0
        decomposed.append((m0, m1, p0, p1))
        cand = min(big, 1.0 - small)
        alpha = cand if alpha is None else min(alpha, cand)

    assert alpha is not None
    pvms = []
    remainders = []
    for m0, m1, p0, p1 in decomposed:
        pvms.append((p0, p1))
        remainders.append((
            linalg.hermitian_part(m0 - alpha * p0),
            linalg.hermitian_part(m1 - alpha * p1),
        ))
    return float(alpha), tuple(pvms), tuple(remainders)


@dataclass
class ScanSample:
    index: int
    on_edge: bool
    box_index: int | None
    epsilon: float | None
    reconstruction_error: float | None
    resamples: int

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "on_edge": self.on_edge,
            "box_index": self.box_index,
            "epsilon": self.epsilon,
            "reconstruction_error": self.reconstruction_error,
            "resamples": self.resamples,
        }


@dataclass
class ScanReport:
    """Result of a randomized never-on-edge scan over three-qubit states."""

    seed: int
    num_samples: int
    rank: int
    kind: str
    samples: list[ScanSample] = field(default_factory=list)
    discarded_borderline: int = 0

    @property
    def edge_count(self) -> int:
        return sum(1 for s in self.samples if s.on_edge)

    def to_json_dict(self) -> dict:
        return {
            "config": {
                "seed": self.seed,
                "samples": self.num_samples,
                "rank": self.rank,
                "kind": self.kind,
                "rng": RNG_ALGORITHM,
            },
            "results": [s.to_dict() for s in self.samples],
            "edge_count": self.edge_count,
            "discarded_borderline": self.discarded_borderline,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def _scan_measurements(kind: str, rng: np.random.Generator) -> MeasurementSet:
    def draw_party():
        if kind == "pvm":
            return (random_pvm_qubit(rng), random_pvm_qubit(rng))
        return (random_povm(2, 2, rng), random_povm(2, 2, rng))

    return MeasurementSet(elements=(draw_party(), draw_party()))


def rank_nogo_scan(
    num_samples: int,
    rank: int,
    kind: str,
    seed: int,
    max_resamples: int = 50,
) -> ScanReport:
    """Randomized check that rank >= 3 three-qubit states never reach the edge.

    Each sample draws a random state of the requested rank and random
    measurement pairs, decides edge membership and, in the expected
    not-on-edge case, exhibits the subtracting box with its epsilon and
    verifies the reconstruction identity.  Borderline edge verdicts are
    discarded and redrawn (counted in the report).  Any on-edge verdict is
    recorded and surfaces as a nonzero ``edge_count``: it would falsify
    either the numerics or the claim, so callers treat it as an alarm.
    """
    if rank < 3:
        raise InvalidParamsError(
            f"scan requires state rank >= 3 (rank-two edge realizations exist); got {rank}"
        )
    if rank > 8:
        raise InvalidParamsError("three-qubit states have rank at most 8")
    if kind not in ("pvm", "povm"):
        raise InvalidParamsError(f"kind must be 'pvm' or 'povm', got {kind!r}")
    if num_samples < 1:
        raise InvalidParamsError("num_samples must be >= 1")

    report = ScanReport(seed=seed, num_samples=num_samples, rank=rank, kind=kind)
    for idx in range(num_samples):
        resamples = 0
        while True:
            rng = make_rng(seed, idx, resamples)
            rho = random_mixed_state(8, rank, rng)
            measurements = _scan_measurements(kind, rng)
            asm = from_quantum(rho, measurements)
            edge_report = is_on_edge(asm)
            if edge_report.marginal_boxes and edge_report.witness_box is None:
                if resamples >= max_resamples:
                    raise SearchExhaustedError(
                        f"sample {idx}: persistent borderline verdicts after {resamples} redraws"
                    )
                resamples += 1
                report.discarded_borderline += 1
                continue
            break
        if edge_report.on_edge:
            report.samples.append(
                ScanSample(
                    index=idx,
                    on_edge=True,
                    box_index=None,
                    epsilon=None,
                    reconstruction_error=None,
                    resamples=resamples,
                )
            )
            continue
        sub = max_subtraction(asm, edge_report.witness_box, edge_report.witness_vector)
        recon = sub.reconstruction_error(asm)
        report.samples.append(
            ScanSample(
                index=idx,
                on_edge=False,
                box_index=edge_report.witness_box_index,
                epsilon=sub.epsilon,
                reconstruction_error=recon,
                resamples=resamples,
            )
        )
    return report
