import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poissoncdo.analytic import def_pv, phi0
from poissoncdo.model import (INDEX, STANDARD_TRANCHES, SUPER_SENIOR, Contract, DomainError,
                              LossSpec, ModelParams)
from poissoncdo.montecarlo import (BLOCK, SimConfig, block_rng, divergence_warning,
                                   generate_path, loss_surface, run_simulation, sample_paths,
                                   summary_bp, value_path)

CALM = ModelParams(0.05, 10.0)
ALT = ModelParams.from_mu(0.2, 0.3)


def cfg(**kw):
    base = dict(real=CALM, altered=ALT, contract=Contract(5.0, 0.03), tranches=STANDARD_TRANCHES,
                n_paths=40_000, seed=99)
    base.update(kw)
    return SimConfig(**base)


def test_config_validation():
    with pytest.raises(DomainError):
        cfg(n_paths=0)
    with pytest.raises(DomainError):
        cfg(seed=-1)
    with pytest.raises(DomainError):
        cfg(threads=0)


def test_bit_identical_reruns():
    a, b = run_simulation(cfg()), run_simulation(cfg())
    assert np.array_equal(a.default.mean, b.default.mean)
    assert np.array_equal(a.premium.m2, b.premium.m2)


def test_seed_changes_output():
    assert not np.array_equal(run_simulation(cfg()).default.mean,
                              run_simulation(cfg(seed=100)).default.mean)


@pytest.mark.parametrize("chunk, threads", [(1000, 1), (7777, 3), (BLOCK + 5, 2), (10 ** 6, 1)])
def test_chunking_and_threads_only_regroup(chunk, threads):
    ref = run_simulation(cfg())
    got = run_simulation(cfg(chunk_size=chunk, threads=threads))
    assert got.default.n == ref.default.n
    assert np.max(np.abs(got.default.mean - ref.default.mean)) <= 1e-10
    assert np.max(np.abs(got.default.variance - ref.default.variance)) <= 1e-10
    assert np.max(np.abs(got.premium.mean - ref.premium.mean)) <= 1e-10


def test_prefix_paths_are_stable():
    # path i does not depend on the run length
    short = sample_paths(cfg(), 0, 300)
    long = sample_paths(cfg(n_paths=10 ** 6), 0, 300)
    for p, q in zip(short, long):
        assert np.array_equal(p.jump_times, q.jump_times)


def test_engine_matches_per_path_reference():
    c = cfg(n_paths=3000)
    res = run_simulation(c, keep_paths=True)
    paths = sample_paths(c, 0, c.n_paths)
    w = np.array([p.rn_weight for p in paths])
    assert np.max(np.abs(w / res.per_path["weight"] - 1)) <= 1e-12
    legs = np.array([value_path(p, c.tranches, c.contract)[0] for p in paths])
    assert np.max(np.abs(legs - res.per_path["xdef"])) <= 1e-12


def test_stepwise_generator_weights():
    rng = block_rng(5, 0)
    for _ in range(200):
        p = generate_path(rng, ALT, 5.0, CALM)
        n, D = p.n_jumps, p.d_total
        direct = math.exp(n * math.log(CALM.rho * CALM.lam / (ALT.rho * ALT.lam))
                          - (CALM.rho - ALT.rho) * 5 - (CALM.lam - ALT.lam) * D)
        assert p.rn_weight == pytest.approx(direct, rel=1e-12)
        assert np.all(np.diff(p.jump_times) > 0) and (n == 0 or p.jump_times[-1] <= 5.0)


def test_weights_average_to_one():
    res = run_simulation(cfg(n_paths=200_000))
    assert abs(res.weights.mean - 1) < 3 * res.weights.se


def test_unweighted_weights_are_exactly_one():
    res = run_simulation(cfg(altered=CALM, n_paths=5000))
    assert res.weights.mean == pytest.approx(1.0, abs=1e-15) and res.weights.m2 < 1e-20


def test_jump_count_matches_altered_intensity():
    res = run_simulation(cfg(n_paths=100_000))
    assert abs(res.jumps.mean - ALT.rho * 5) < 4 * res.jumps.se


def test_reweighted_default_leg_unbiased():
    c = cfg(contract=Contract(5.0, 0.0), n_paths=200_000)
    res = run_simulation(c)
    for i, tr in enumerate(c.tranches):
        z = (res.default.mean[i] - def_pv(tr, c.contract, CALM)) / res.default.se[i]
        assert abs(z) < 4, tr.label


def test_empty_tranche_list():
    res = run_simulation(cfg(tranches=(), n_paths=1000))
    assert res.default.mean.shape == (0,) and summary_bp(res) == []


def test_loss_surface_marginal():
    c = cfg(altered=CALM, contract=Contract(5.0, 0.0), n_paths=100_000)
    surf = loss_surface(c, bins=20)
    assert surf.prob.shape == (20, 20)
    p_hit = surf.prob[-1].sum()
    exact = -math.expm1(-CALM.rho * 5)
    assert abs(p_hit - exact) < 4 * math.sqrt(exact * (1 - exact) / c.n_paths)
    assert np.all(np.diff(surf.prob.sum(axis=1)) >= -1e-15)


def test_linear_loss_spec_runs():
    res = run_simulation(cfg(loss_spec=LossSpec.LINEAR, n_paths=5000))
    assert np.all(res.default.mean >= 0)


def test_divergence_warning_message():
    assert divergence_warning(cfg()) is None
    msg = divergence_warning(cfg(altered=ModelParams.from_mu(0.05, 0.04)))
    assert "half" in msg and "infinite variance" in msg


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 64 - 1))
def test_any_u64_seed(seed):
    res = run_simulation(cfg(seed=seed, n_paths=500))
    assert np.all(np.isfinite(res.default.mean))
