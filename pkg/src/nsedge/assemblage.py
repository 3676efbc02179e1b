"""Assemblage data model.

Construction from quantum states and measurements or from local-hidden-state
models, validation of positivity / normalization / no-signaling, marginals,
and the JSON file format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations, product
from math import prod

import numpy as np

from . import linalg, serialize
from .errors import (
    DimensionMismatchError,
    InvalidModelError,
    InvalidStateError,
    SignalingDetectedError,
)
from .scenario import DeterministicBox, Position, Scenario, parse_position, position_str

NS_TOL = 1e-8


def check_block_map(scenario: Scenario, blocks: dict) -> dict[Position, np.ndarray]:
    """Coerce a position->matrix map and require exactly one block per position."""
    d = scenario.trusted_dim
    expected = scenario.positions()
    missing = [p for p in expected if p not in blocks]
    if missing:
        raise ValueError(f"missing block for position {missing[0]} (and {len(missing) - 1} more)")
    if len(blocks) != len(expected):
        extra = set(blocks) - set(expected)
        raise ValueError(f"unexpected positions in block map: {sorted(extra)[:3]}")
    out = {}
    for pos in expected:
        m = linalg.as_operator(blocks[pos])
        if m.shape[0] != d:
            raise DimensionMismatchError(
                f"block at {pos} has dimension {m.shape[0]}, scenario says {d}"
            )
        out[pos] = m
    return out


@dataclass(frozen=True)
class Assemblage:
    """Position-indexed collection of subnormalized trusted-side operators.

    Treat instances as immutable: blocks are never modified after
    construction, so assemblages can be freely shared across threads.
    """

    scenario: Scenario
    blocks: dict[Position, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "blocks", check_block_map(self.scenario, self.blocks))

    def block(self, a, x) -> np.ndarray:
        return self.blocks[Position(tuple(a), tuple(x))]

    def stacked(self, positions=None) -> np.ndarray:
        """Blocks stacked as an (N, d, d) array in canonical position order."""
        if positions is None:
            positions = self.scenario.positions()
        return np.stack([self.blocks[p] for p in positions])


@dataclass(frozen=True)
class MeasurementSet:
    """Per-party, per-setting POVMs acting on the untrusted subsystems.

    ``elements[party][setting][outcome]`` is a PSD matrix; for every party
    and setting the outcome operators sum to the identity.
    """

    elements: tuple[tuple[tuple[np.ndarray, ...], ...], ...]

    def __post_init__(self):
        parties = []
        for i, settings in enumerate(self.elements):
            if not settings:
                raise InvalidModelError(f"party {i} has no settings")
            n_out = len(settings[0])
            dim = linalg.as_operator(settings[0][0]).shape[0]
            coerced = []
            for xi, outcome_ops in enumerate(settings):
                if len(outcome_ops) != n_out:
                    raise InvalidModelError(
                        f"party {i} setting {xi}: outcome count differs across settings"
                    )
                ops = tuple(linalg.as_operator(op) for op in outcome_ops)
                total = np.zeros((dim, dim), dtype=complex)
                for op in ops:
                    if op.shape[0] != dim:
                        raise DimensionMismatchError(f"party {i}: mixed operator dimensions")
                    if linalg.min_eigenvalue(op) < -linalg.PSD_TOL:
                        raise InvalidModelError(f"party {i} setting {xi}: element not PSD")
                    total += op
                if np.max(np.abs(total - np.eye(dim))) > 1e-9:
                    raise InvalidModelError(
                        f"party {i} setting {xi}: elements do not sum to the identity"
                    )
                coerced.append(ops)
            parties.append(tuple(coerced))
        object.__setattr__(self, "elements", tuple(parties))

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(party[0][0].shape[0] for party in self.elements)

    @property
    def setting_counts(self) -> tuple[int, ...]:
        return tuple(len(party) for party in self.elements)

    @property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(len(party[0]) for party in self.elements)

    def element(self, party: int, setting: int, outcome: int) -> np.ndarray:
        return self.elements[party][setting][outcome]


@dataclass(frozen=True)
class LhsTerm:
    """One hidden-variable value: weight, per-party response statistics, trusted state."""

    weight: float
    conditionals: tuple[tuple[np.ndarray, ...], ...]  # [party][setting] -> outcome distribution
    state: np.ndarray


@dataclass(frozen=True)
class LhsModel:
    terms: tuple[LhsTerm, ...]


@dataclass
class ValidationReport:
    """Outcome of the three constraint families; never raised, always returned."""

    psd_ok: bool
    normalization_ok: bool
    no_signaling_ok: bool
    worst_violation: float
    offending: list[dict]
    ns_tol: float

    @property
    def ok(self) -> bool:
        return self.psd_ok and self.normalization_ok and self.no_signaling_ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "psd_ok": self.psd_ok,
            "normalization_ok": self.normalization_ok,
            "no_signaling_ok": self.no_signaling_ok,
            "worst_violation": self.worst_violation,
            "offending": self.offending,
            "ns_tol": self.ns_tol,
        }


def _kron_all(ops) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def from_quantum(
    state: np.ndarray,
    measurements: MeasurementSet,
    state_tol: float = 1e-9,
) -> Assemblage:
    """Assemblage obtained by measuring the untrusted parts of a shared state.

    ``state`` is a density matrix on (tensor of untrusted spaces) x (trusted
    space), untrusted factors first and ordered as in ``measurements``.  Block
    a|x is the partial trace of ``(M_{a_1|x_1} x ... x M_{a_n|x_n} x 1) state``
    over all untrusted subsystems.
    """
    state = linalg.as_operator(state)
    m_dim = prod(measurements.dims)
    total = state.shape[0]
    if total % m_dim != 0:
        raise DimensionMismatchError(
            f"state dimension {total} not divisible by measurement dimension {m_dim}"
        )
    d = total // m_dim
    herm = linalg.hermitian_part(state)
    if linalg.hermiticity_defect(state) > 1e-9:
        raise InvalidStateError("state is not Hermitian")
    if float(np.linalg.eigvalsh(herm)[0]) < -state_tol:
        raise InvalidStateError("state is not positive semidefinite")
    if abs(float(np.trace(herm).real) - 1.0) > state_tol:
        raise InvalidStateError(f"state trace {np.trace(herm).real:.12f} != 1")

    scenario = Scenario(
        settings=measurements.setting_counts,
        outcomes=measurements.outcome_counts,
        trusted_dim=d,
    )
    rho4 = herm.reshape(m_dim, d, m_dim, d)
    blocks = {}
    for pos in scenario.positions():
        op = _kron_all(
            measurements.element(i, pos.x[i], pos.a[i]) for i in range(scenario.n)
        )
        block = np.einsum("km,mikj->ij", op, rho4)
        blocks[pos] = linalg.hermitian_part(block)
    return Assemblage(scenario=scenario, blocks=blocks)


def from_lhs(model: LhsModel, scenario: Scenario, model_tol: float = 1e-9) -> Assemblage:
    """Assemblage of a local-hidden-state model.

    Each block is ``sum_j q_j (prod_i p_j(a_i|x_i)) rho_j``; the result is a
    valid assemblage by construction and never on the edge when any weight is
    strictly positive.
    """
    d = scenario.trusted_dim
    if not model.terms:
        raise InvalidModelError("model has no terms")
    total_weight = 0.0
    for j, term in enumerate(model.terms):
        if term.weight < -model_tol:
            raise InvalidModelError(f"term {j}: negative weight")
        total_weight += term.weight
        if len(term.conditionals) != scenario.n:
            raise InvalidModelError(f"term {j}: wrong number of parties")
        for i, per_setting in enumerate(term.conditionals):
            if len(per_setting) != scenario.settings[i]:
                raise InvalidModelError(f"term {j} party {i}: wrong setting count")
            for xi, dist in enumerate(per_setting):
                dist = np.asarray(dist, dtype=float)
                if dist.shape != (scenario.outcomes[i],):
                    raise InvalidModelError(f"term {j} party {i} setting {xi}: wrong outcome count")
                if np.any(dist < -model_tol) or abs(dist.sum() - 1.0) > model_tol:
                    raise InvalidModelError(
                        f"term {j} party {i} setting {xi}: not a probability distribution"
                    )
        st = linalg.as_operator(term.state)
        if st.shape[0] != d:
            raise DimensionMismatchError(f"term {j}: state dimension {st.shape[0]} != {d}")
        if linalg.min_eigenvalue(linalg.hermitian_part(st)) < -linalg.PSD_TOL:
            raise InvalidModelError(f"term {j}: state not PSD")
        if abs(float(np.trace(st).real) - 1.0) > model_tol:
            raise InvalidModelError(f"term {j}: state trace != 1")
    if abs(total_weight - 1.0) > model_tol:
        raise InvalidModelError(f"weights sum to {total_weight}, expected 1")

    blocks = {}
    for pos in scenario.positions():
        acc = np.zeros((d, d), dtype=complex)
        for term in model.terms:
            p = term.weight
            for i in range(scenario.n):
                p *= float(term.conditionals[i][pos.x[i]][pos.a[i]])
            if p != 0.0:
                acc += p * term.state
        blocks[pos] = linalg.hermitian_part(acc)
    return Assemblage(scenario=scenario, blocks=blocks)


def lhs_point(box: DeterministicBox, state: np.ndarray, scenario: Scenario) -> Assemblage:
    """Extreme LHS assemblage: a deterministic box carrying one fixed state."""
    state = linalg.as_operator(state)
    d = scenario.trusted_dim
    if state.shape[0] != d:
        raise DimensionMismatchError(f"state dimension {state.shape[0]} != {d}")
    zero = np.zeros((d, d), dtype=complex)
    blocks = {
        pos: state.copy() if box.prob(pos) else zero.copy()
        for pos in scenario.positions()
    }
    return Assemblage(scenario=scenario, blocks=blocks)


def mix(weighted: list[tuple[float, Assemblage]]) -> Assemblage:
    """Convex combination of assemblages on one scenario."""
    if not weighted:
        raise ValueError("nothing to mix")
    scenario = weighted[0][1].scenario
    if any(a.scenario != scenario for _, a in weighted):
        raise DimensionMismatchError("assemblages live on different scenarios")
    if abs(sum(w for w, _ in weighted) - 1.0) > 1e-9 or any(w < 0 for w, _ in weighted):
        raise ValueError("weights must be nonnegative and sum to 1")
    blocks = {
        pos: sum(w * a.blocks[pos] for w, a in weighted)
        for pos in scenario.positions()
    }
    return Assemblage(scenario=scenario, blocks=blocks)


def _marginal_block(a: Assemblage, kept: tuple[int, ...], a_kept, x_kept, x_dropped) -> np.ndarray:
    """Sum blocks over dropped-party outcomes at fixed dropped settings."""
    s = a.scenario
    dropped = [i for i in range(s.n) if i not in kept]
    d = s.trusted_dim
    acc = np.zeros((d, d), dtype=complex)
    x_full = [0] * s.n
    for i, xi in zip(kept, x_kept):
        x_full[i] = xi
    for i, xi in zip(dropped, x_dropped):
        x_full[i] = xi
    for a_rest in product(*(range(s.outcomes[i]) for i in dropped)):
        a_full = [0] * s.n
        for i, ai in zip(kept, a_kept):
            a_full[i] = ai
        for i, ai in zip(dropped, a_rest):
            a_full[i] = ai
        acc += a.blocks[Position(tuple(a_full), tuple(x_full))]
    return acc


def validate(a: Assemblage, ns_tol: float = NS_TOL, psd_tol: float = linalg.PSD_TOL) -> ValidationReport:
    """Check positivity, normalization and no-signaling; report, never raise.

    The report lists every violated constraint with its magnitude so the CLI
    can show all problems at once.
    """
    s = a.scenario
    offending: list[dict] = []
    worst = 0.0

    psd_ok = True
    for pos in s.positions():
        block = a.blocks[pos]
        defect = linalg.hermiticity_defect(block)
        lam_min = float(np.linalg.eigvalsh(linalg.hermitian_part(block))[0])
        if defect > linalg.HERMITICITY_TOL:
            psd_ok = False
            worst = max(worst, defect)
            offending.append(
                {"constraint": "hermiticity", "position": position_str(pos, s), "magnitude": defect}
            )
        if lam_min < -psd_tol:
            psd_ok = False
            worst = max(worst, -lam_min)
            offending.append(
                {"constraint": "psd", "position": position_str(pos, s), "magnitude": -lam_min}
            )

    setting_tuples = s.setting_tuples()
    sums = {}
    for x in setting_tuples:
        acc = np.zeros((s.trusted_dim, s.trusted_dim), dtype=complex)
        for a_t in s.outcome_tuples():
            acc += a.blocks[Position(a_t, x)]
        sums[x] = acc

    normalization_ok = True
    ref = sums[setting_tuples[0]]
    for x in setting_tuples:
        trace_dev = abs(float(np.trace(sums[x]).real) - 1.0)
        match_dev = float(np.max(np.abs(sums[x] - ref)))
        dev = max(trace_dev, match_dev)
        if dev > ns_tol:
            normalization_ok = False
            worst = max(worst, dev)
            offending.append(
                {
                    "constraint": "normalization",
                    "settings": list(x),
                    "magnitude": dev,
                }
            )

    no_signaling_ok = True
    for size in range(1, s.n):
        for kept in combinations(range(s.n), size):
            dropped = [i for i in range(s.n) if i not in kept]
            dropped_settings = list(product(*(range(s.settings[i]) for i in dropped)))
            for x_kept in product(*(range(s.settings[i]) for i in kept)):
                for a_kept in product(*(range(s.outcomes[i]) for i in kept)):
                    ref_block = _marginal_block(a, kept, a_kept, x_kept, dropped_settings[0])
                    for x_dropped in dropped_settings[1:]:
                        dev = float(
                            np.max(np.abs(_marginal_block(a, kept, a_kept, x_kept, x_dropped) - ref_block))
                        )
                        if dev > ns_tol:
                            no_signaling_ok = False
                            worst = max(worst, dev)
                            offending.append(
                                {
                                    "constraint": "no_signaling",
                                    "kept_parties": list(kept),
                                    "kept_outcomes": list(a_kept),
                                    "kept_settings": list(x_kept),
                                    "dropped_settings": list(x_dropped),
                                    "magnitude": dev,
                                }
                            )

    return ValidationReport(
        psd_ok=psd_ok,
        normalization_ok=normalization_ok,
        no_signaling_ok=no_signaling_ok,
        worst_violation=worst,
        offending=offending,
        ns_tol=ns_tol,
    )


def marginal(
    a: Assemblage,
    kept_parties,
    settings_for_dropped,
    ns_tol: float = NS_TOL,
) -> Assemblage:
    """Reduced assemblage over a proper nonempty subset of parties.

    The result must not depend on the settings chosen for the dropped
    parties; a dependence beyond ``ns_tol`` raises ``SignalingDetectedError``.
    """
    s = a.scenario
    kept = tuple(sorted(kept_parties))
    if not kept or len(kept) >= s.n:
        raise ValueError("kept_parties must be a proper nonempty subset of the parties")
    if any(i < 0 or i >= s.n for i in kept):
        raise ValueError("kept_parties out of range")
    dropped = [i for i in range(s.n) if i not in kept]
    x_dropped = tuple(settings_for_dropped)
    if len(x_dropped) != len(dropped):
        raise ValueError(f"need {len(dropped)} settings for the dropped parties")
    for i, xi in zip(dropped, x_dropped):
        if not 0 <= xi < s.settings[i]:
            raise ValueError(f"setting {xi} out of range for party {i}")

    reduced = Scenario(
        settings=tuple(s.settings[i] for i in kept),
        outcomes=tuple(s.outcomes[i] for i in kept),
        trusted_dim=s.trusted_dim,
    )
    all_dropped_settings = list(product(*(range(s.settings[i]) for i in dropped)))
    blocks = {}
    for pos in reduced.positions():
        ref = _marginal_block(a, kept, pos.a, pos.x, x_dropped)
        for other in all_dropped_settings:
            dev = float(np.max(np.abs(_marginal_block(a, kept, pos.a, pos.x, other) - ref)))
            if dev > ns_tol:
                raise SignalingDetectedError(
                    f"marginal at {pos} depends on dropped settings (deviation {dev:.3e})"
                )
        blocks[pos] = ref
    return Assemblage(scenario=reduced, blocks=blocks)


def total_trace(a: Assemblage) -> float:
    """Sum of block traces; equals the number of setting tuples for a valid assemblage."""
    return float(sum(np.trace(b).real for b in a.blocks.values()))


def to_json_dict(a: Assemblage) -> dict:
    s = a.scenario
    return {
        "scenario": {
            "n": s.n,
            "settings": list(s.settings),
            "outcomes": list(s.outcomes),
            "d": s.trusted_dim,
        },
        "blocks": {
            position_str(pos, s): serialize.matrix_to_json(a.blocks[pos])
            for pos in s.positions()
        },
        "meta": a.meta,
    }


def from_json_dict(data: dict) -> Assemblage:
    try:
        sc = data["scenario"]
        scenario = Scenario(
            settings=tuple(sc["settings"]),
            outcomes=tuple(sc["outcomes"]),
            trusted_dim=int(sc["d"]),
        )
        if "n" in sc and int(sc["n"]) != scenario.n:
            raise ValueError("scenario field n disagrees with the settings list")
        raw = data["blocks"]
        blocks = {}
        for key, mat in raw.items():
            pos = parse_position(key, scenario)
            blocks[pos] = serialize.matrix_from_json(mat, scenario.trusted_dim)
        meta = data.get("meta", {})
        if not isinstance(meta, dict):
            raise ValueError("meta must be an object")
        return Assemblage(scenario=scenario, blocks=blocks, meta=meta)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed assemblage data: {exc}") from exc


def save_assemblage(a: Assemblage, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(a), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_assemblage(path) -> Assemblage:
    with open(path) as fh:
        data = json.load(fh)
    return from_json_dict(data)
