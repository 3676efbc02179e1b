"""Built-in reference objects for tests, docs and the CLI.

``example1``: a rank-two three-qubit state measured with two projective pairs
whose assemblage admits no LHS part, together with its analytic block box,
kernel projectors and witness shift.  ``example1-sigma-p`` is the flat family
obtained by redistributing its two equal rows.  ``pr-box-d1`` embeds the
maximally nonlocal binary box as a trusted-dimension-one assemblage, and
``ghz`` is the standard three-qubit state used by the realization search.
"""

from __future__ import annotations

from math import sqrt

import numpy as np

from .assemblage import Assemblage, MeasurementSet, from_quantum, mix
from .scenario import DeterministicBox, Position, Scenario
from .witness import BlockOperator

KET_0 = np.array([1.0, 0.0], dtype=complex)
KET_1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = np.array([1.0, 1.0], dtype=complex) / sqrt(2.0)
KET_MINUS = np.array([1.0, -1.0], dtype=complex) / sqrt(2.0)

EXAMPLE1_EPSILON = (3.0 - sqrt(5.0)) / 2.0

FIXTURE_NAMES = ("example1", "example1-sigma-p", "pr-box-d1", "ghz")


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def binary_two_party_scenario(d: int = 2) -> Scenario:
    return Scenario(settings=(2, 2), outcomes=(2, 2), trusted_dim=d)


def example1_state() -> np.ndarray:
    """Equal mixture of |0>(|00>+|11>)/sqrt(2) and |1>(|00>-|11>)/sqrt(2)."""
    phi_plus = (np.kron(KET_0, KET_0) + np.kron(KET_1, KET_1)) / sqrt(2.0)
    phi_minus = (np.kron(KET_0, KET_0) - np.kron(KET_1, KET_1)) / sqrt(2.0)
    psi1 = np.kron(KET_0, phi_plus)
    psi2 = np.kron(KET_1, phi_minus)
    return 0.5 * _proj(psi1) + 0.5 * _proj(psi2)


def example1_measurements() -> MeasurementSet:
    """Both parties measure {|0><0|, |1><1|} and {|+><+|, |-><-|}."""
    setting0 = (_proj(KET_0), _proj(KET_1))
    setting1 = (_proj(KET_PLUS), _proj(KET_MINUS))
    pair = (setting0, setting1)
    return MeasurementSet(elements=(pair, pair))


def example1_assemblage() -> Assemblage:
    asm = from_quantum(example1_state(), example1_measurements())
    return Assemblage(scenario=asm.scenario, blocks=asm.blocks, meta={"fixture": "example1"})


def example1_expected_blocks() -> dict[Position, np.ndarray]:
    """The analytic block box of the fixture, written out directly.

    Layout per setting pair (x, y): rank-one quarters for any setting pair
    involving the computational-basis measurement, maximally mixed blocks
    when both parties use the rotated basis and outcomes decouple.
    """
    p0, p1 = _proj(KET_0), _proj(KET_1)
    pp, pm = _proj(KET_PLUS), _proj(KET_MINUS)
    eye = np.eye(2, dtype=complex)
    blocks: dict[Position, np.ndarray] = {}

    def put(a, b, x, y, m):
        blocks[Position((a, b), (x, y))] = m

    for x in (0, 1):
        for a in (0, 1):
            # second party measures in the computational basis: b picks |b><b|
            put(a, 0, x, 0, p0 / 4.0)
            put(a, 1, x, 0, p1 / 4.0)
    # first party in the computational basis, second rotated: sign of the
    # conditioned vector follows a xor b
    put(0, 0, 0, 1, pp / 4.0)
    put(0, 1, 0, 1, pm / 4.0)
    put(1, 0, 0, 1, pm / 4.0)
    put(1, 1, 0, 1, pp / 4.0)
    # both rotated: outcomes decouple from the trusted side
    for a in (0, 1):
        for b in (0, 1):
            put(a, b, 1, 1, eye / 8.0)
    return blocks


def example1_kernel_projectors() -> BlockOperator:
    """Analytic complement projectors of the fixture blocks."""
    p0, p1 = _proj(KET_0), _proj(KET_1)
    pp, pm = _proj(KET_PLUS), _proj(KET_MINUS)
    zero = np.zeros((2, 2), dtype=complex)
    blocks: dict[Position, np.ndarray] = {}
    for x in (0, 1):
        for a in (0, 1):
            blocks[Position((a, 0), (x, 0))] = p1.copy()
            blocks[Position((a, 1), (x, 0))] = p0.copy()
    blocks[Position((0, 0), (0, 1))] = pm.copy()
    blocks[Position((0, 1), (0, 1))] = pp.copy()
    blocks[Position((1, 0), (0, 1))] = pp.copy()
    blocks[Position((1, 1), (0, 1))] = pm.copy()
    for a in (0, 1):
        for b in (0, 1):
            blocks[Position((a, b), (1, 1))] = zero.copy()
    return BlockOperator(scenario=binary_two_party_scenario(), blocks=blocks)


def example1_row_split() -> tuple[Assemblage, Assemblage]:
    """The two assemblages averaging to the fixture.

    The fixture's two first-party-rotated rows coincide, so doubling one row
    and zeroing the other (either way) keeps all constraints.
    """
    base = example1_assemblage()
    s = base.scenario

    def reweight(zero_a: int) -> Assemblage:
        blocks = {}
        for pos in s.positions():
            m = base.blocks[pos]
            if pos.x[0] == 1:  # first party's rotated setting
                m = 2.0 * m if pos.a[0] != zero_a else np.zeros_like(m)
            blocks[pos] = m
        return Assemblage(scenario=s, blocks=blocks)

    return reweight(zero_a=1), reweight(zero_a=0)


def example1_sigma_p(p: float) -> Assemblage:
    """Flat family p * Sigma_1 + (1 - p) * Sigma_2; on the edge for every p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    one, two = example1_row_split()
    out = mix([(p, one), (1.0 - p, two)])
    return Assemblage(
        scenario=out.scenario,
        blocks=out.blocks,
        meta={"fixture": "example1-sigma-p", "p": p},
    )


def pr_box_probabilities() -> dict[Position, float]:
    """p(ab|xy) = 1/2 when a xor b = xy, else 0."""
    probs = {}
    for x in (0, 1):
        for y in (0, 1):
            for a in (0, 1):
                for b in (0, 1):
                    val = 0.5 if (a ^ b) == (x * y) else 0.0
                    probs[Position((a, b), (x, y))] = val
    return probs


def box_to_d1_assemblage(probs: dict[Position, float], meta: dict | None = None) -> Assemblage:
    """Embed a bipartite binary no-signaling box as a trusted-dimension-one assemblage."""
    s = binary_two_party_scenario(d=1)
    blocks = {
        pos: np.array([[probs.get(pos, 0.0)]], dtype=complex) for pos in s.positions()
    }
    return Assemblage(scenario=s, blocks=blocks, meta=meta or {})


def pr_box_assemblage() -> Assemblage:
    return box_to_d1_assemblage(pr_box_probabilities(), meta={"fixture": "pr-box-d1"})


def deterministic_d1_assemblage(box: DeterministicBox) -> Assemblage:
    s = binary_two_party_scenario(d=1)
    probs = {pos: box.prob(pos) for pos in s.positions()}
    return box_to_d1_assemblage(probs, meta={"fixture": "deterministic-d1"})


def ghz_state_vector() -> np.ndarray:
    """(|000> + |111>) / sqrt(2) on qubit x qubit x qubit."""
    v = np.zeros(8, dtype=complex)
    v[0] = 1.0 / sqrt(2.0)
    v[7] = 1.0 / sqrt(2.0)
    return v


def fixture_assemblage(name: str) -> Assemblage:
    """Resolve a CLI fixture name to an assemblage.

    ``example1-sigma-p`` takes an optional parameter after a colon, e.g.
    ``example1-sigma-p:0.3`` (default 0.5).
    """
    base, _, param = name.partition(":")
    if base == "example1":
        return example1_assemblage()
    if base == "example1-sigma-p":
        p = float(param) if param else 0.5
        return example1_sigma_p(p)
    if base == "pr-box-d1":
        return pr_box_assemblage()
    raise KeyError(f"unknown assemblage fixture {name!r}; available: example1, example1-sigma-p[:p], pr-box-d1")


def fixture_state(name: str) -> tuple[np.ndarray, tuple[int, ...]]:
    """Resolve a CLI fixture name to a state (vector or density matrix) and dims."""
    if name == "ghz":
        return ghz_state_vector(), (2, 2, 2)
    if name == "example1":
        return example1_state(), (2, 2, 2)
    raise KeyError(f"unknown state fixture {name!r}; available: ghz, example1")
