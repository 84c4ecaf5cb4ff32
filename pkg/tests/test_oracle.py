import numpy as np
import pytest

from hetnoma.oracle import (equal_split_score_fn, exhaustive_cf, grid_slave,
                            linear_system_omega)
from hetnoma.slave import (PDSC_TIGHT, QOS_TIGHT, ActiveSet, SlaveInput,
                           closed_form_omega, enumerate_active_sets, solve,
                           table2_omega)

from test_slave import feasible_inputs, make_input


# ------------------------------------------------------------- grid search

def test_grid_k1():
    inp = SlaveInput(varpi=0.8, theta=1.0, bandwidth=1.0, rho=[0.1],
                     q=[1.2], delta=[0.0], eps=[0.0])
    res = grid_slave(inp)
    assert not res.empty
    np.testing.assert_allclose(res.omega, [0.8])
    assert res.spectral == pytest.approx(np.log2(1 + 0.8 / 0.1))


def test_grid_matches_solver_k2():
    inp = SlaveInput(varpi=1.0, theta=1.0, bandwidth=1.0, rho=[0.05, 0.1],
                     q=[1.0, 2.0], delta=[0.0, 0.0], eps=[0.0, 0.0])
    sol = solve(inp)
    res = grid_slave(inp, resolution=1e-3)
    assert sol.spectral_sum >= res.spectral * (1 - 1e-2)
    # strict lattice points never beat the analytic optimum
    assert sol.spectral_sum >= res.strict_spectral - 1e-12
    assert np.abs(res.omega - sol.omega).max() <= 2e-3


def test_grid_and_solver_agree_on_feasibility_boundary():
    # shrink the budget until infeasible; both must flip together on the
    # strict grid (the relaxed grid keeps a tolerance band, so it may lag)
    base = dict(theta=1.0, bandwidth=1.0, rho=[0.02, 0.06, 0.1],
                q=[1.0, 1.8, 2.2], delta=[0.0, 0.01, 0.02],
                eps=[1e-3, 1e-3, 1e-3])
    for varpi in np.linspace(1.0, 0.05, 12):
        inp = SlaveInput(varpi=float(varpi), **base)
        sol = solve(inp)
        res = grid_slave(inp, resolution=1e-2)
        if sol.feasible:
            assert not res.strict_empty
            assert sol.spectral_sum >= res.strict_spectral - 1e-12
        if res.strict_empty:
            # without any strictly feasible lattice point, the analytic
            # optimum may still exist but must then be extremely tight
            if sol.feasible:
                assert sol.spectral_sum >= res.spectral * (1 - 1e-2) \
                    or res.empty


def test_grid_guards():
    inp5 = make_input(5, seed=0)
    with pytest.raises(ValueError):
        grid_slave(inp5)
    inp2 = make_input(2, seed=0)
    with pytest.raises(ValueError):
        grid_slave(inp2, resolution=0.1)
    inp4 = make_input(4, seed=0)
    with pytest.raises(ValueError):
        grid_slave(inp4, resolution=1e-3)   # (1001)^3 > 5e7 points


def test_grid_random_instances_dominated_by_solver():
    for k in (2, 3):
        for inp in feasible_inputs(k, 5, seed0=7000 + k):
            sol = solve(inp)
            res = grid_slave(inp, resolution=1e-3 if k == 2 else 1e-2)
            assert not res.empty
            assert sol.spectral_sum >= res.spectral * (1 - 1e-2)
            assert sol.spectral_sum >= res.strict_spectral - 1e-12


# ----------------------------------------------------------- linear system

def test_linear_system_worked_examples():
    inp = SlaveInput(varpi=1.0, theta=1.0, bandwidth=1.0, rho=[0.05, 0.1],
                     q=[1.0, 2.0], delta=[0.0, 0.0], eps=[0.0, 0.0])
    np.testing.assert_allclose(
        linear_system_omega(inp, ActiveSet((QOS_TIGHT,))), [0.45, 0.55],
        atol=1e-15)
    inp2 = SlaveInput(varpi=1.0, theta=1.0, bandwidth=1.0, rho=[0.05, 0.1],
                      q=[1.0, 1.2], delta=[0.0, 0.2], eps=[0.0, 0.0])
    np.testing.assert_allclose(
        linear_system_omega(inp2, ActiveSet((PDSC_TIGHT,))), [0.4, 0.6],
        atol=1e-15)


def test_linear_system_matches_explicit_tables():
    rng = np.random.default_rng(20)
    for k in (2, 3):
        for case in enumerate_active_sets(k):
            for _ in range(20):
                rho = np.sort(rng.uniform(1e-4, 0.1, k))
                q = 2.0 ** rng.uniform(0.0, 1.5, k)
                delta = np.sort(rng.uniform(0.0, 0.05, k))
                inp = SlaveInput(varpi=1.0, theta=1.0, bandwidth=1.0,
                                 rho=rho, q=q, delta=delta, eps=np.zeros(k))
                got = linear_system_omega(inp, case)
                np.testing.assert_allclose(got, table2_omega(inp, case),
                                           rtol=0, atol=1e-12)


def test_linear_system_matches_recursion_random():
    for k in (2, 3, 4, 5, 6):
        for trial in range(20):
            inp = make_input(k, seed=9000 * k + trial)
            for case in enumerate_active_sets(k):
                ref = linear_system_omega(inp, case)
                got = closed_form_omega(inp, case)
                np.testing.assert_allclose(got, ref, rtol=0, atol=1e-10)


# ------------------------------------------------------ partition benchmark

def test_exhaustive_partition_count():
    seen = []
    def evaluate(part):
        seen.append(tuple(sorted(tuple(sorted(b)) for b in part)))
        return 0.0
    exhaustive_cf([1, 2, 3, 4], 2, evaluate)
    # 4 items into 2 blocks of <= 2: {12|34, 13|24, 14|23} only
    assert sorted(set(seen)) == [((1, 2), (3, 4)), ((1, 3), (2, 4)),
                                 ((1, 4), (2, 3))]
    assert len(seen) == 3


def test_exhaustive_trivial_and_guard():
    part, score = exhaustive_cf([1, 2, 3], 3, lambda p: 1.0)
    assert part == [(1, 2, 3)] and score == 1.0
    assert exhaustive_cf([], 3, lambda p: 0.0) == ([], -np.inf)
    with pytest.raises(ValueError):
        exhaustive_cf(range(10), 2, lambda p: 0.0)


def test_equal_split_score_fn_sanity():
    gains = {1: 1e-7, 2: 1e-8, 3: 1e-9, 4: 1e-10}
    score = equal_split_score_fn(gains, eps=1e-5, theta=1.0, tx_power=1.0,
                                 ici_power=0.0, noise_psd=4e-21,
                                 bandwidth=20e6)
    a = score([(1, 3), (2, 4)])
    b = score([(1, 2), (3, 4)])
    assert np.isfinite(a) and np.isfinite(b) and a > 0
    # ordering inside a block must not matter (it sorts by gain)
    assert score([(3, 1), (4, 2)]) == pytest.approx(a, rel=1e-15)
    # pairing far-apart gains beats pairing neighbours here
    assert a > b
