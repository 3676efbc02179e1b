import math

import numpy as np
import pytest

from nsedge import fixtures as fx
from nsedge.assemblage import Assemblage, lhs_point, mix, validate
from nsedge.edge import (
    det_criterion,
    is_on_edge,
    max_subtraction,
    qubit_rectangle_criterion,
    rank_screen,
    subtractable_along,
    total_rank_bound,
)
from nsedge.errors import VectorNotInImageError, WrongDimensionError
from nsedge.realization import make_rng, random_lhs_assemblage
from nsedge.scenario import (
    DeterministicBox,
    Position,
    Scenario,
    enumerate_deterministic_boxes,
    support_set,
)

from generators import random_mixture_assemblage, random_quantum_assemblage
from oracles import bisection_epsilon, d1_support_on_edge, rectangle_rule_for_box

KET0 = np.array([1.0, 0.0], dtype=complex)
BINARY2 = fx.binary_two_party_scenario(d=2)


def diag_assemblage(blocks_by_str, scenario):
    blocks = {}
    from nsedge.scenario import parse_position

    for key, m in blocks_by_str.items():
        blocks[parse_position(key, scenario)] = np.asarray(m, dtype=complex)
    return Assemblage(scenario=scenario, blocks=blocks)


class TestSubtractableAlong:
    def test_fixture_has_no_subtractable_box(self, example1):
        for box in enumerate_deterministic_boxes(BINARY2):
            assert subtractable_along(example1, box) is None
            # independent zero/rank-one classification agrees
            assert not rectangle_rule_for_box(example1, box)

    def test_lhs_point_recovers_its_vector(self):
        box = DeterministicBox(tables=((0, 0), (0, 0)))
        asm = lhs_point(box, np.outer(KET0, KET0.conj()), BINARY2)
        vec = subtractable_along(asm, box)
        assert vec is not None
        assert abs(abs(vec.conj() @ KET0) - 1.0) < 1e-10

    def test_vector_lies_in_every_image(self, rng):
        asm = random_lhs_assemblage(BINARY2, rng)
        for box in enumerate_deterministic_boxes(BINARY2):
            vec = subtractable_along(asm, box)
            oracle = rectangle_rule_for_box(asm, box)
            assert (vec is not None) == oracle
            if vec is None:
                continue
            from nsedge.linalg import image_projector

            for pos in support_set(box, asm.scenario):
                r = image_projector(asm.blocks[pos])
                assert np.linalg.norm(r @ vec - vec) <= 1e-8


class TestIsOnEdge:
    def test_fixture_on_edge(self, example1):
        report = is_on_edge(example1)
        assert report.on_edge
        assert report.witness_vector is None
        assert all(d.intersection_dim == 0 for d in report.per_box)
        assert min(d.margin for d in report.per_box) > 0.3

    @pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_flat_family_on_edge(self, p):
        asm = fx.example1_sigma_p(p)
        assert validate(asm).ok
        assert is_on_edge(asm).on_edge

    def test_lhs_never_on_edge(self, rng):
        for _ in range(10):
            asm = random_lhs_assemblage(BINARY2, rng)
            report = is_on_edge(asm)
            assert not report.on_edge
            assert report.witness_vector is not None
            assert report.witness_box_index == report.per_box[report.witness_box_index].box_index

    def test_mixing_kills_the_edge(self, example1):
        point = lhs_point(
            DeterministicBox(tables=((0, 0), (0, 0))), np.outer(KET0, KET0.conj()), BINARY2
        )
        mixed = mix([(0.7, example1), (0.3, point)])
        report = is_on_edge(mixed)
        assert not report.on_edge


class TestDetCriterion:
    def test_single_position_full_rank(self):
        s = Scenario(settings=(1,), outcomes=(2,), trusted_dim=2)
        asm = diag_assemblage(
            {"0|0": np.diag([0.3, 0.3]), "1|0": np.diag([0.2, 0.2])}, s
        )
        box = DeterministicBox(tables=((0,),))
        assert det_criterion(asm, box) == pytest.approx(0.0, abs=1e-12)
        assert subtractable_along(asm, box) is not None

    def test_orthogonal_projectors_give_one(self):
        s = Scenario(settings=(2,), outcomes=(2,), trusted_dim=2)
        asm = diag_assemblage(
            {
                "0|0": np.diag([0.5, 0.0]),
                "1|0": np.diag([0.0, 0.5]),
                "0|1": np.diag([0.0, 0.5]),
                "1|1": np.diag([0.5, 0.0]),
            },
            s,
        )
        box = DeterministicBox(tables=((0, 0),))  # images |0>, |1>: product is 0
        assert det_criterion(asm, box) == pytest.approx(1.0, abs=1e-12)
        assert subtractable_along(asm, box) is None

    def test_fixture_bounded_away(self, example1):
        values = [
            det_criterion(example1, box) for box in enumerate_deterministic_boxes(BINARY2)
        ]
        assert min(values) > 1e-6
        for box, val in zip(enumerate_deterministic_boxes(BINARY2), values):
            assert (val < 1e-8) == (subtractable_along(example1, box) is not None)


class TestMaxSubtraction:
    def test_pure_point_gives_epsilon_one(self):
        box = DeterministicBox(tables=((0, 1), (1, 0)))
        asm = lhs_point(box, np.outer(KET0, KET0.conj()), BINARY2)
        sub = max_subtraction(asm, box, KET0)
        assert sub.epsilon == pytest.approx(1.0, abs=1e-12)
        assert sub.renormalized_residual is None
        for blk in sub.residual.blocks.values():
            np.testing.assert_allclose(blk, 0, atol=1e-12)

    def test_diagonal_block(self):
        s = Scenario(settings=(1,), outcomes=(2,), trusted_dim=2)
        asm = diag_assemblage(
            {"0|0": np.diag([0.6, 0.0]), "1|0": np.diag([0.4, 1.0])}, s
        )
        box = DeterministicBox(tables=((0,),))
        sub = max_subtraction(asm, box, KET0)
        assert sub.epsilon == pytest.approx(0.6, abs=1e-12)

    def test_mixture_epsilon_matches_bisection(self, example1):
        box = DeterministicBox(tables=((0, 0), (0, 0)))
        point = lhs_point(box, np.outer(KET0, KET0.conj()), BINARY2)
        mixed = mix([(0.5, example1), (0.5, point)])
        vec = subtractable_along(mixed, box)
        sub = max_subtraction(mixed, box, vec)
        assert sub.epsilon >= 0.5 - 1e-12
        oracle = bisection_epsilon(mixed, box, vec)
        assert sub.epsilon == pytest.approx(oracle, abs=1e-7)

    def test_soundness_and_tightness(self, rng):
        for _ in range(25):
            asm = random_lhs_assemblage(BINARY2, rng)
            report = is_on_edge(asm)
            sub = max_subtraction(asm, report.witness_box, report.witness_vector)
            # reconstruction
            assert sub.reconstruction_error(asm) <= 1e-9
            # residual PSD
            for blk in sub.residual.blocks.values():
                assert np.linalg.eigvalsh((blk + blk.conj().T) / 2)[0] >= -1e-9
            # tightness: some support block hits a zero eigenvalue
            lowest = min(
                np.linalg.eigvalsh(
                    (sub.residual.blocks[p] + sub.residual.blocks[p].conj().T) / 2
                )[0]
                for p in support_set(sub.box, asm.scenario)
            )
            assert abs(lowest) <= 1e-9
            # convex-decomposition witness: both parts valid
            if sub.renormalized_residual is not None:
                assert validate(sub.renormalized_residual).ok

    def test_rejects_vector_outside_image(self):
        s = Scenario(settings=(1,), outcomes=(2,), trusted_dim=2)
        asm = diag_assemblage(
            {"0|0": np.diag([0.5, 0.0]), "1|0": np.diag([0.5, 1.0])}, s
        )
        box = DeterministicBox(tables=((0,),))
        with pytest.raises(VectorNotInImageError):
            max_subtraction(asm, box, np.array([0.0, 1.0]))


class TestScreens:
    def test_full_rank_fires(self, rng):
        asm = random_quantum_assemblage(rng)
        box = rank_screen(asm)
        assert box is not None
        ranks = sum(
            np.linalg.matrix_rank(asm.blocks[p]) for p in support_set(box, asm.scenario)
        )
        assert ranks > (4 - 1) * 2
        assert not is_on_edge(asm).on_edge

    def test_fixture_screen_silent(self, example1):
        assert rank_screen(example1) is None

    def test_single_position_bound(self):
        s = Scenario(settings=(1,), outcomes=(2,), trusted_dim=2)
        asm = diag_assemblage(
            {"0|0": np.diag([0.5, 0.0]), "1|0": np.diag([0.0, 0.5])}, s
        )
        assert rank_screen(asm) is not None  # |I_L| = 1: any nonzero block exceeds 0

    def test_total_rank_bound_formula(self, example1, rng):
        rank_sum, bound, satisfied = total_rank_bound(example1)
        assert bound == (4 - 1) * 4 * 2 == 24
        assert rank_sum == 20
        assert satisfied
        full = random_quantum_assemblage(rng)
        rank_sum, bound, satisfied = total_rank_bound(full)
        assert rank_sum == 32 and not satisfied
        assert not is_on_edge(full).on_edge


class TestRectangleCriterion:
    def test_fixture_false(self, example1):
        assert qubit_rectangle_criterion(example1) is False

    def test_full_rank_true(self, rng):
        assert qubit_rectangle_criterion(random_quantum_assemblage(rng)) is True

    def test_wrong_dimension(self):
        with pytest.raises(WrongDimensionError):
            qubit_rectangle_criterion(fx.pr_box_assemblage())

    def test_three_route_agreement(self, rng):
        boxes = enumerate_deterministic_boxes(BINARY2)
        for k in range(40):
            if k % 3 == 0:
                asm = random_quantum_assemblage(rng)
            elif k % 3 == 1:
                asm = random_lhs_assemblage(BINARY2, rng)
            else:
                asm = random_mixture_assemblage(rng)
            report = is_on_edge(asm)
            if report.marginal_boxes:
                continue
            kernel_verdict = report.on_edge
            rect_verdict = not qubit_rectangle_criterion(asm)
            det_verdict = min(det_criterion(asm, b) for b in boxes) > 1e-6
            assert kernel_verdict == rect_verdict == det_verdict


class TestSingleUntrustedParty:
    def test_full_rank_draws_never_on_edge(self):
        # a lone untrusted party always admits a subtraction when the state
        # has full rank: blocks are full rank, every box qualifies
        from nsedge.assemblage import MeasurementSet, from_quantum
        from nsedge.realization import random_mixed_state, random_povm

        rng = make_rng(0x51)
        s = Scenario(settings=(2,), outcomes=(2,), trusted_dim=2)
        for _ in range(500):
            state = random_mixed_state(4, 4, rng)
            meas = MeasurementSet(elements=((random_povm(2, 2, rng), random_povm(2, 2, rng)),))
            asm = from_quantum(state, meas)
            assert asm.scenario == s
            assert not is_on_edge(asm).on_edge


class TestTrustedDimensionOne:
    def test_pr_box_on_edge(self):
        pr = fx.pr_box_assemblage()
        assert validate(pr).ok
        report = is_on_edge(pr)
        assert report.on_edge
        assert d1_support_on_edge(fx.pr_box_probabilities(), pr.scenario)

    def test_deterministic_boxes_not_on_edge(self):
        s = fx.binary_two_party_scenario(d=1)
        for box in enumerate_deterministic_boxes(s):
            asm = fx.deterministic_d1_assemblage(box)
            report = is_on_edge(asm)
            assert not report.on_edge
            probs = {p: float(np.real(asm.blocks[p][0, 0])) for p in s.positions()}
            assert not d1_support_on_edge(probs, s)
