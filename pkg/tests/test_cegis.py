"""CEGIS loop tests.

Finding-phase models are never trusted: every matrix the solver returns is
re-checked against its sample constraints by exact arithmetic, and every
synthesized reduction goes through the grid oracle on top of the loop's
own verification.
"""

from fractions import Fraction as F

import pytest

from linred.cegis import (
    CegisConfig,
    ExhaustedLattice,
    SynthesisSuccess,
    SynthesisUnknown,
    candidate_from_model,
    cegis_synthesize,
    encode_reduction_finding,
    encode_refutation,
    first_cell,
    initial_samples,
    next_cell,
    replay_check,
    schedule_cells,
)
from linred.lang import bind, eval_predicate
from linred.parser import parse_spec
from linred.reduction import Reduction, encodes_at
from linred.smt import run_query
from linred.verify import Valid, brute_force_verify

from fixtures import big_m_max_reduction, drop_cover_row, max_decls, max_predicate


HALF_DECLS, HALF_PHI = parse_spec(
    "var a: real in [0, 2]; var b: real in [0, 2]; assert a + 2*b <= 3;")
SIGN_DECLS, SIGN_PHI = parse_spec(
    "var y: real in [-1, 1]; assert y <= 0;")
NEQ_DECLS, NEQ_PHI = parse_spec(
    "var y: int in [-1, 1]; assert y != 0;")


def _sample_set(phi, decls, points):
    from linred.cegis import SampleSet

    fresh = SampleSet()
    for point in points:
        point = tuple(F(v) for v in point)
        fresh.add(point, eval_predicate(phi, bind(decls, point)))
    return fresh


class TestSchedule:
    def test_min_size_successors(self):
        config = CegisConfig(max_rows=5, max_aux=2)
        assert next_cell(1, 0, config) == (2, 0)
        assert next_cell(2, 0, config) == (1, 1)

    def test_min_size_full_sequence(self):
        config = CegisConfig(max_rows=5, max_aux=2)
        cells = [first_cell(config)]
        while True:
            successor = next_cell(*cells[-1], config)
            if successor is None:
                break
            cells.append(successor)
        assert cells == [(1, 0), (2, 0), (1, 1), (3, 0), (2, 1), (1, 2),
                         (4, 0), (3, 1), (2, 2), (5, 0), (4, 1), (3, 2),
                         (5, 1), (4, 2), (5, 2)]
        assert cells == schedule_cells(config)

    def test_min_size_orders_ties_by_smaller_k(self):
        config = CegisConfig(max_rows=6, max_aux=6)
        cells = schedule_cells(config)
        keys = [(l + k, k) for l, k in cells]
        assert keys == sorted(keys)

    def test_diagonal(self):
        config = CegisConfig(max_rows=5, max_aux=2, schedule="diagonal")
        assert first_cell(config) == (1, 0)
        assert next_cell(1, 0, config) == (2, 1)
        assert next_cell(2, 1, config) == (3, 2)
        assert next_cell(3, 2, config) is None
        assert next_cell(5, 2, config) is None

    def test_cell_outside_ceilings_rejected(self):
        config = CegisConfig(max_rows=2, max_aux=0)
        with pytest.raises(ValueError):
            next_cell(3, 0, config)


class TestInitialSamples:
    def test_corners_one_real_variable(self):
        decls, phi = parse_spec("var x: real in [0, 1]; assert x <= 1;")
        samples = initial_samples(phi, decls, CegisConfig(samples=0))
        assert {p for p, _ in samples.entries()} == {(F(0),), (F(1),)}

    def test_corners_binary_square(self):
        decls, phi = parse_spec(
            "var p: binary; var q: binary; assert p + q <= 1;")
        samples = initial_samples(phi, decls, CegisConfig(samples=0))
        points = {p for p, _ in samples.entries()}
        assert points == {(F(0), F(0)), (F(0), F(1)), (F(1), F(0)),
                          (F(1), F(1))}

    def test_corner_cap_at_64(self):
        decls, phi = parse_spec(
            "; ".join(f"var b{i}: binary" for i in range(7))
            + "; assert b0 <= 1;")
        samples = initial_samples(phi, decls, CegisConfig(samples=0))
        assert len(samples) == 64

    def test_tags_match_evaluator(self):
        config = CegisConfig(samples=12, seed=3)
        samples = initial_samples(HALF_PHI, HALF_DECLS, config)
        for point, tag in samples.entries():
            assert tag == eval_predicate(HALF_PHI, bind(HALF_DECLS, point))

    def test_integer_domains_sample_integers(self):
        decls, phi = parse_spec("var n: int in [-4, 9]; assert n <= 2;")
        samples = initial_samples(phi, decls, CegisConfig(samples=20, seed=1))
        for point, _ in samples.entries():
            assert point[0].denominator == 1
            assert F(-4) <= point[0] <= F(9)

    def test_seed_determinism(self):
        config = CegisConfig(samples=16, seed=5)
        one = initial_samples(HALF_PHI, HALF_DECLS, config).entries()
        two = initial_samples(HALF_PHI, HALF_DECLS, config).entries()
        assert one == two
        other = initial_samples(HALF_PHI, HALF_DECLS,
                                CegisConfig(samples=16, seed=6)).entries()
        assert one != other


class TestReductionFinding:
    def test_two_sample_halfspace_sat(self, solver):
        samples = _sample_set(SIGN_PHI, SIGN_DECLS, [(-1,), (1,)])
        query = encode_reduction_finding(SIGN_PHI, SIGN_DECLS, samples, 1, 0)
        result = run_query(solver, query)
        assert result.status == "sat"
        x1 = result.model["x_1_1"]
        x2 = result.model["x_1_2"]
        assert -x1 + x2 <= 0
        assert x1 + x2 > 0

    def test_three_sample_model_encodes_all(self, solver):
        samples = _sample_set(SIGN_PHI, SIGN_DECLS, [(-1,), (0,), (1,)])
        query = encode_reduction_finding(SIGN_PHI, SIGN_DECLS, samples, 1, 0)
        result = run_query(solver, query)
        assert result.status == "sat"
        candidate = candidate_from_model(result.model, ("y",), 1, 0)
        for point, _ in samples.entries():
            assert encodes_at(candidate, SIGN_DECLS, SIGN_PHI, point)

    def test_neq_three_samples_unsat(self, solver):
        samples = _sample_set(NEQ_PHI, NEQ_DECLS, [(-1,), (0,), (1,)])
        query = encode_reduction_finding(NEQ_PHI, NEQ_DECLS, samples, 1, 0)
        assert run_query(solver, query, want_model=False).status == "unsat"

    def test_empty_sample_set_rejected(self):
        from linred.cegis import SampleSet

        with pytest.raises(ValueError):
            encode_reduction_finding(SIGN_PHI, SIGN_DECLS, SampleSet(), 1, 0)

    def test_coeff_bound_respected(self, solver):
        samples = _sample_set(SIGN_PHI, SIGN_DECLS, [(-1,), (1,)])
        query = encode_reduction_finding(SIGN_PHI, SIGN_DECLS, samples, 1, 0,
                                         coeff_bound=F(2))
        result = run_query(solver, query)
        assert result.status == "sat"
        for value in result.model.values():
            assert abs(value) <= 2

    def test_integer_coeffs_are_integer(self, solver):
        samples = _sample_set(SIGN_PHI, SIGN_DECLS, [(-1,), (1,)])
        query = encode_reduction_finding(SIGN_PHI, SIGN_DECLS, samples, 1, 0,
                                         coeff_bound=F(3),
                                         integer_coeffs=True)
        result = run_query(solver, query)
        assert result.status == "sat"
        for value in result.model.values():
            assert value.denominator == 1


class TestRefutation:
    def test_valid_sign_reduction_unsat(self, solver):
        candidate = Reduction(("y",), 0, ((F(1), F(0)),))
        query = encode_refutation(SIGN_PHI, SIGN_DECLS, candidate)
        assert run_query(solver, query, want_model=False).status == "unsat"

    def test_zero_row_sat_with_positive_witness(self, solver):
        candidate = Reduction(("y",), 0, ((F(0), F(0)),))
        query = encode_refutation(SIGN_PHI, SIGN_DECLS, candidate)
        result = run_query(solver, query)
        assert result.status == "sat"
        assert result.model["y"] > 0

    def test_dropped_cover_row_sat(self, solver):
        decls = max_decls(-5, 5)
        mutated = drop_cover_row(big_m_max_reduction(16))
        query = encode_refutation(max_predicate(), decls, mutated)
        result = run_query(solver, query)
        assert result.status == "sat"
        witness = tuple(result.model[n] for n in ("a", "b", "c"))
        assert not encodes_at(mutated, decls, max_predicate(), witness)

    def test_variable_mismatch_rejected(self):
        candidate = Reduction(("z",), 0, ((F(1), F(0)),))
        with pytest.raises(ValueError):
            encode_refutation(SIGN_PHI, SIGN_DECLS, candidate)


class TestLoop:
    def test_sign_predicate_succeeds_at_first_cell(self, solver):
        config = CegisConfig(max_rows=3, max_aux=1)
        outcome = cegis_synthesize(SIGN_PHI, SIGN_DECLS, config, solver)
        assert isinstance(outcome, SynthesisSuccess)
        assert outcome.reduction.row_count == 1
        assert outcome.reduction.aux_count == 0
        oracle = brute_force_verify(SIGN_PHI, outcome.reduction, SIGN_DECLS,
                                    resolution=F(1, 100), random_count=0)
        assert isinstance(oracle, Valid)
        assert replay_check(outcome.report) == []

    def test_halfspace_normalizes_to_primitive_row(self, solver):
        config = CegisConfig(max_rows=2, max_aux=0, coeff_bound=F(10),
                             integer_coeffs=True)
        outcome = cegis_synthesize(HALF_PHI, HALF_DECLS, config, solver)
        assert isinstance(outcome, SynthesisSuccess)
        # the boundary segment pins the hyperplane: only one primitive row
        assert outcome.reduction.rows == ((F(1), F(2), F(-3)),)
        assert replay_check(outcome.report) == []

    def test_neq_exhausts_lattice(self, solver):
        config = CegisConfig(max_rows=1, max_aux=0)
        outcome = cegis_synthesize(NEQ_PHI, NEQ_DECLS, config, solver)
        assert isinstance(outcome, ExhaustedLattice)
        assert (outcome.max_rows, outcome.max_aux) == (1, 0)
        assert outcome.report["outcome"]["kind"] == "exhausted"
        kinds = [e["type"] for e in outcome.report["events"]]
        assert kinds == ["cell_start", "cell_unsat"]

    def test_iteration_cap_reports_unknown(self, solver):
        # rational search on the halfspace boundary never lands exactly;
        # a tiny cap turns that into an honest Unknown
        config = CegisConfig(max_rows=1, max_aux=0, iteration_cap=3)
        outcome = cegis_synthesize(HALF_PHI, HALF_DECLS, config, solver)
        assert isinstance(outcome, SynthesisUnknown)
        assert outcome.phase == "iteration-cap"
        assert replay_check(outcome.report) == []

    def test_samples_retained_across_cells(self, solver):
        config = CegisConfig(max_rows=2, max_aux=0, coeff_bound=F(10),
                             integer_coeffs=True)
        outcome = cegis_synthesize(HALF_PHI, HALF_DECLS, config, solver)
        initial = len(outcome.report["initial_samples"])
        counterexamples = sum(1 for e in outcome.report["events"]
                              if e["type"] == "counterexample")
        assert len(outcome.samples) == initial + counterexamples


class TestCellSkipSoundness:
    def test_unsat_cell_rejects_random_matrices(self, solver):
        import random

        samples = _sample_set(NEQ_PHI, NEQ_DECLS, [(-1,), (0,), (1,)])
        query = encode_reduction_finding(NEQ_PHI, NEQ_DECLS, samples, 1, 0)
        assert run_query(solver, query, want_model=False).status == "unsat"
        rng = random.Random(0)
        for _ in range(100):
            row = (F(rng.randint(-8, 8), rng.randint(1, 4)),
                   F(rng.randint(-8, 8), rng.randint(1, 4)))
            candidate = Reduction(("y",), 0, (row,))
            disagreements = [
                point for point, _ in samples.entries()
                if not encodes_at(candidate, NEQ_DECLS, NEQ_PHI, point)]
            assert disagreements, f"matrix {row} slipped past the unsat proof"


class TestReplayChecker:
    def _successful_report(self, solver):
        # corners-only sampling forces a few refinement rounds, so the
        # report records real counterexamples to tamper with
        config = CegisConfig(max_rows=2, max_aux=0, samples=0,
                             coeff_bound=F(10), integer_coeffs=True)
        outcome = cegis_synthesize(HALF_PHI, HALF_DECLS, config, solver)
        assert isinstance(outcome, SynthesisSuccess)
        assert any(e["type"] == "counterexample"
                   for e in outcome.report["events"])
        return outcome.report

    def test_clean_report_passes(self, solver):
        assert replay_check(self._successful_report(solver)) == []

    def test_tampered_sample_tag_detected(self, solver):
        import copy

        report = copy.deepcopy(self._successful_report(solver))
        report["initial_samples"][0]["phi"] = (
            not report["initial_samples"][0]["phi"])
        assert replay_check(report) != []

    def test_tampered_candidate_detected(self, solver):
        import copy

        report = copy.deepcopy(self._successful_report(solver))
        for event in report["events"]:
            if event["type"] == "candidate":
                event["rows"] = [["0"] * len(event["rows"][0])]
                break
        assert replay_check(report) != []

    def test_duplicate_counterexample_detected(self, solver):
        import copy

        report = copy.deepcopy(self._successful_report(solver))
        first = report["initial_samples"][0]["point"]
        for event in report["events"]:
            if event["type"] == "counterexample":
                event["point"] = list(first)
                break
        assert replay_check(report) != []
