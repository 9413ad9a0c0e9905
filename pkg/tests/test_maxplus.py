"""Max-plus algebra tests, including the independent fixed-point oracles."""

import random

import pytest
from hypothesis import given, strategies as st

from calsim.maxplus import (
    CycleClass,
    MaxPlusMatrix,
    OffsetSolution,
    PositiveCycleError,
    ShapeError,
    build_gamma,
    cal_unavailability,
    classify_cycles,
    kleene_star,
    mp_mat_add,
    mp_mat_mul,
    mp_mat_vec,
    mp_vec_add,
    pessimistic_offsets,
)
from calsim.timekit import INF, NEG_INF, ms

NI = NEG_INF


def M(*rows):
    return MaxPlusMatrix.from_rows(rows)


# --- independent oracles -------------------------------------------------

def star_by_iteration(g: MaxPlusMatrix) -> MaxPlusMatrix:
    """Oracle: S <- I; repeat S <- I + (g x S) until it stops changing."""
    ident = MaxPlusMatrix.identity(g.n)
    s = ident
    for _ in range(g.n + 2):
        nxt = mp_mat_add(ident, mp_mat_mul(g, s))
        if nxt == s:
            return s
        s = nxt
    return s


def offsets_by_iteration(g: MaxPlusMatrix, z):
    """Oracle: O <- Z + gO iterated from all-(-inf) until stable."""
    o = tuple(NI for _ in z)
    for _ in range(g.n + 2):
        nxt = mp_vec_add(z, mp_mat_vec(g, o))
        if nxt == o:
            return o
        o = nxt
    return o


def random_negative_matrix(rng: random.Random, n: int, lo=-50, hi=50) -> MaxPlusMatrix:
    """Random matrix resampled until its cycles classify negative."""
    while True:
        rows = []
        for _ in range(n):
            row = []
            for _ in range(n):
                if rng.random() < 0.4:
                    row.append(NI)
                else:
                    row.append(rng.randint(lo, hi))
            rows.append(tuple(row))
        g = MaxPlusMatrix(tuple(rows))
        if classify_cycles(g) is CycleClass.NEGATIVE:
            return g


class TestMatMul:
    def test_identity(self):
        g = M((1, 2), (NI, 3))
        ident = MaxPlusMatrix.identity(2)
        assert mp_mat_mul(ident, g) == g
        assert mp_mat_mul(g, ident) == g

    def test_hand_expanded_vector(self):
        g = M((NI, 3), (NI, NI))
        assert mp_mat_vec(g, (0, 0)) == (3, NI)

    def test_all_neg_inf_annihilates(self):
        g = MaxPlusMatrix.full(2, NI)
        any_m = M((5, INF), (0, -3))
        assert mp_mat_mul(g, any_m) == g
        assert mp_mat_vec(g, (INF, 7)) == (NI, NI)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            mp_mat_mul(MaxPlusMatrix.identity(2), MaxPlusMatrix.identity(3))
        with pytest.raises(ShapeError):
            mp_mat_vec(MaxPlusMatrix.identity(2), (0,))


class TestClassify:
    def test_acyclic_is_negative(self):
        assert classify_cycles(M((NI, 3), (NI, NI))) is CycleClass.NEGATIVE

    def test_zero_cycle(self):
        assert classify_cycles(M((NI, 2), (-2, NI))) is CycleClass.ZERO

    def test_positive_cycle(self):
        assert classify_cycles(M((NI, 2), (-1, NI))) is CycleClass.POSITIVE

    def test_positive_self_loop(self):
        assert classify_cycles(M((1,),)) is CycleClass.POSITIVE


class TestKleeneStar:
    def test_single_negative_entry(self):
        assert kleene_star(M((-5,),)) == M((0,),)

    def test_two_node_chain(self):
        assert kleene_star(M((NI, 3), (NI, NI))) == M((0, 3), (NI, 0))

    def test_positive_self_loop_raises(self):
        with pytest.raises(PositiveCycleError) as e:
            kleene_star(M((1,),))
        assert e.value.cycle == (0,)

    def test_matches_iterative_oracle(self):
        rng = random.Random(1234)
        for _ in range(50):
            g = random_negative_matrix(rng, rng.randint(1, 5))
            assert kleene_star(g) == star_by_iteration(g)


class TestBuildGamma:
    def test_exact_cancellation(self):
        lat = MaxPlusMatrix.full(2, ms(100))
        inc = MaxPlusMatrix.full(2, ms(100))
        assert build_gamma(lat, inc, (0, 0)) == MaxPlusMatrix.full(2, 0)

    def test_infinite_inconsistency_severs_edge(self):
        lat = MaxPlusMatrix.full(2, ms(50))
        inc = M((0, INF), (0, 0))
        g = build_gamma(lat, inc, (0, 0))
        assert g.rows[0][1] == NI
        assert g.rows[1][0] == ms(50)

    def test_all_zero(self):
        z2 = MaxPlusMatrix.full(2, 0)
        assert build_gamma(z2, z2, (0, 0)) == z2


class TestCalUnavailability:
    def test_nonpositive_rows_zero(self):
        gamma = M((NI, -5), (-3, NI))
        assert cal_unavailability(gamma, (0, 0)) == (0, 0)

    def test_row_max_rule(self):
        gamma = M((NI, ms(50)), (NI, NI))
        assert cal_unavailability(gamma, (0, 0)) == (ms(50), 0)

    def test_infinite_latency_row(self):
        gamma = M((NI, INF), (NI, NI))
        assert cal_unavailability(gamma, (0, 0)) == (INF, 0)

    def test_elementwise_max_of_zero_and_row_max(self):
        rng = random.Random(7)
        for _ in range(25):
            g = random_negative_matrix(rng, 3)
            avail = cal_unavailability(g, (0, 0, 0))
            for i in range(3):
                row_max = max(g.rows[i])
                assert avail[i] == max(0, row_max)


class TestPessimisticOffsets:
    def test_no_physical_inputs(self):
        gamma = M((NI, 3), (NI, NI))
        sol = pessimistic_offsets(gamma, (NI, NI))
        assert sol.offsets == (NI, NI)

    def test_two_node_chain_derived(self):
        gamma = M((NI, ms(3)), (NI, NI))
        z = (0, 0)
        sol = pessimistic_offsets(gamma, z)
        assert sol.offsets == (ms(3), 0)
        assert sol.offsets == offsets_by_iteration(gamma, z)

    def test_positive_cycle_all_infinite(self):
        gamma = M((NI, 2), (-1, NI))
        sol = pessimistic_offsets(gamma, (0, 0))
        assert sol.offsets == (INF, INF)
        assert sol.cycle_class is CycleClass.POSITIVE
        assert sol.witness_cycle is not None
        assert sol.warning is not None

    def test_zero_cycle_warns(self):
        gamma = M((NI, 2), (-2, NI))
        sol = pessimistic_offsets(gamma, (0, 0))
        assert sol.cycle_class is CycleClass.ZERO
        assert sol.warning is not None
        # still a genuine solution of O = Z + gamma O
        assert sol.offsets == mp_vec_add((0, 0), mp_mat_vec(gamma, sol.offsets))

    def test_fixed_point_property(self):
        rng = random.Random(99)
        for _ in range(60):
            n = rng.randint(1, 5)
            g = random_negative_matrix(rng, n)
            z = tuple(rng.choice([0, 0, NI, rng.randint(-5, 5)]) for _ in range(n))
            sol = pessimistic_offsets(g, z)
            assert sol.offsets == mp_vec_add(z, mp_mat_vec(g, sol.offsets))

    def test_monotone_in_inconsistency(self):
        # raising any tolerated inconsistency never raises unavailability
        rng = random.Random(5)
        lat = MaxPlusMatrix.full(3, ms(40))
        for _ in range(20):
            base = [[rng.randint(0, 30) for _ in range(3)] for _ in range(3)]
            i, j = rng.randrange(3), rng.randrange(3)
            bumped = [row[:] for row in base]
            bumped[i][j] += rng.randint(1, 20)
            a0 = cal_unavailability(build_gamma(lat, M(*base), (0, 0, 0)), (0, 0, 0))
            a1 = cal_unavailability(build_gamma(lat, M(*bumped), (0, 0, 0)), (0, 0, 0))
            assert all(x1 <= x0 for x0, x1 in zip(a0, a1))


@given(st.integers(1, 4), st.integers(0, 2**32))
def test_star_oracle_property(n, seed):
    g = random_negative_matrix(random.Random(seed), n)
    assert kleene_star(g) == star_by_iteration(g)
