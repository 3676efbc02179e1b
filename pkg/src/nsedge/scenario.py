"""Steering scenarios, position bookkeeping and local deterministic boxes."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import prod
from typing import Iterator, NamedTuple

from .errors import CombinatorialOverflowError

BOX_ENUMERATION_CAP = 1_000_000


class Position(NamedTuple):
    """One slot a|x of an assemblage: joint outcomes ``a`` under joint settings ``x``."""

    a: tuple[int, ...]
    x: tuple[int, ...]


@dataclass(frozen=True)
class Scenario:
    """Counts describing one steering scenario.

    ``settings[i]`` and ``outcomes[i]`` are the numbers of measurement
    settings and outcomes of untrusted party ``i``; ``trusted_dim`` is the
    Hilbert-space dimension of the characterized party.
    """

    settings: tuple[int, ...]
    outcomes: tuple[int, ...]
    trusted_dim: int

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(int(v) for v in self.settings))
        object.__setattr__(self, "outcomes", tuple(int(v) for v in self.outcomes))
        if len(self.settings) != len(self.outcomes):
            raise ValueError("settings and outcomes must list the same parties")
        if not self.settings:
            raise ValueError("need at least one untrusted party")
        if any(v < 1 for v in self.settings) or any(v < 1 for v in self.outcomes):
            raise ValueError("every setting/outcome count must be >= 1")
        if self.trusted_dim < 1:
            raise ValueError("trusted_dim must be >= 1")

    @property
    def n(self) -> int:
        return len(self.settings)

    @property
    def num_setting_tuples(self) -> int:
        return prod(self.settings)

    @property
    def num_outcome_tuples(self) -> int:
        return prod(self.outcomes)

    @property
    def num_positions(self) -> int:
        return self.num_setting_tuples * self.num_outcome_tuples

    def setting_tuples(self) -> list[tuple[int, ...]]:
        return list(product(*(range(v) for v in self.settings)))

    def outcome_tuples(self) -> list[tuple[int, ...]]:
        return list(product(*(range(v) for v in self.outcomes)))

    def positions(self) -> list[Position]:
        """All positions, settings-major then outcomes, both lexicographic."""
        return [Position(a, x) for x in self.setting_tuples() for a in self.outcome_tuples()]

    def contains(self, pos: Position) -> bool:
        return (
            len(pos.a) == self.n
            and len(pos.x) == self.n
            and all(0 <= ai < na for ai, na in zip(pos.a, self.outcomes))
            and all(0 <= xi < nx for xi, nx in zip(pos.x, self.settings))
        )


def position_str(pos: Position, scenario: Scenario) -> str:
    """Serialize a position as "a1...an|x1...xn".

    Digits are concatenated when every count is <= 10; otherwise the
    comma-separated form "a1,a2|x1,x2" is used.
    """
    compact = all(v <= 10 for v in scenario.settings) and all(v <= 10 for v in scenario.outcomes)
    if compact:
        return "".join(map(str, pos.a)) + "|" + "".join(map(str, pos.x))
    return ",".join(map(str, pos.a)) + "|" + ",".join(map(str, pos.x))


def parse_position(text: str, scenario: Scenario) -> Position:
    """Inverse of :func:`position_str`.

    The scenario decides the encoding: compact digit strings only exist when
    every count is <= 10, so larger scenarios always parse the comma form.
    """
    compact = all(v <= 10 for v in scenario.settings) and all(v <= 10 for v in scenario.outcomes)
    left, _, right = text.partition("|")
    if compact and "," not in left and "," not in right:
        a = tuple(int(c) for c in left)
        x = tuple(int(c) for c in right)
    else:
        a = tuple(int(v) for v in left.split(","))
        x = tuple(int(v) for v in right.split(","))
    pos = Position(a, x)
    if not scenario.contains(pos):
        raise ValueError(f"position {text!r} is outside the scenario")
    return pos


@dataclass(frozen=True, order=True)
class DeterministicBox:
    """Local deterministic strategy: per-party response tables x_i -> a_i."""

    tables: tuple[tuple[int, ...], ...]

    def response(self, party: int, setting: int) -> int:
        return self.tables[party][setting]

    def outcome_tuple(self, x: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(table[xi] for table, xi in zip(self.tables, x))

    def prob(self, pos: Position) -> float:
        return 1.0 if self.outcome_tuple(pos.x) == pos.a else 0.0


def deterministic_box_count(scenario: Scenario) -> int:
    return prod(a ** x for a, x in zip(scenario.outcomes, scenario.settings))


def check_box_cap(scenario: Scenario, cap: int = BOX_ENUMERATION_CAP) -> int:
    count = deterministic_box_count(scenario)
    if count > cap:
        raise CombinatorialOverflowError(
            f"{count} deterministic boxes exceed the cap of {cap}; refusing to enumerate"
        )
    return count


def iter_deterministic_boxes(scenario: Scenario, cap: int = BOX_ENUMERATION_CAP) -> Iterator[DeterministicBox]:
    """Yield all local deterministic boxes in canonical (lexicographic) order.

    The order is lexicographic over the concatenated per-party response
    tables, party 0 outermost; it defines the box index used everywhere.
    """
    check_box_cap(scenario, cap)
    per_party = [
        list(product(range(na), repeat=nx))
        for na, nx in zip(scenario.outcomes, scenario.settings)
    ]
    for tables in product(*per_party):
        yield DeterministicBox(tables=tables)


def enumerate_deterministic_boxes(scenario: Scenario, cap: int = BOX_ENUMERATION_CAP) -> list[DeterministicBox]:
    return list(iter_deterministic_boxes(scenario, cap))


def box_by_index(scenario: Scenario, index: int, cap: int = BOX_ENUMERATION_CAP) -> DeterministicBox:
    count = check_box_cap(scenario, cap)
    if not 0 <= index < count:
        raise ValueError(f"box index {index} out of range [0, {count})")
    for k, box in enumerate(iter_deterministic_boxes(scenario, cap)):
        if k == index:
            return box
    raise AssertionError("unreachable")


def support_set(box: DeterministicBox, scenario: Scenario) -> tuple[Position, ...]:
    """Positions where the box assigns probability one.

    Ordered by setting tuple (lexicographic); this is the canonical position
    order used for projector products and epsilon minimization.
    """
    return tuple(
        Position(box.outcome_tuple(x), x) for x in scenario.setting_tuples()
    )


def rectangle_partition(scenario: Scenario) -> list[tuple[Position, ...]]:
    """Partition all positions into supports of deterministic boxes.

    Uses the constant-response boxes: the support of the box answering ``c``
    regardless of setting contains exactly the positions with ``a == c``, so
    the prod(outcomes) supports are disjoint and cover every position.
    """
    parts = []
    for c in scenario.outcome_tuples():
        tables = tuple((ci,) * nx for ci, nx in zip(c, scenario.settings))
        parts.append(support_set(DeterministicBox(tables=tables), scenario))
    return parts
