import json

import numpy as np
import pytest

from conftest import constant_game
from drcore.ambiguity import AmbiguityConfig, TailParams
from drcore.core import (
    CorePolyhedron,
    build_dr_core,
    build_expected_core,
    check_allocation,
    check_containment,
    compute_worst_cases,
    find_allocation,
    find_allocation_monolithic,
)
from drcore.distributions import SamplingPlan, build_multisamples
from drcore.errors import ConfigurationError, EmptyCoreError, InputError
from drcore.game_model import mask_of

# truncated-normal mean of xi on [0, 1] with mu = 1, sigma = 1 (see test_distributions)
XI_MEAN = 0.5401377707135735


def toy(u_n, t1, t2):
    return CorePolyhedron(2, u_n, {1: t1, 2: t2})


def shared(game, dist, K, seed=0):
    return build_multisamples(SamplingPlan("shared", K, seed), dist, game)


def test_dr_thresholds_dominate_empirical_means(ref_game, ref_dist):
    s = shared(ref_game, ref_dist, 100)
    core = build_dr_core(ref_game, s, AmbiguityConfig.uniform_radius(0.3))
    assert len(core.thresholds) == 6
    for S, t in core.thresholds.items():
        assert t >= s[S].mean_value(ref_game.value_map[S]) - 1e-12


def test_zero_radius_gives_empirical_means(ref_game, ref_dist):
    s = shared(ref_game, ref_dist, 100)
    core = build_dr_core(ref_game, s, AmbiguityConfig.uniform_radius(0.0))
    for S, t in core.thresholds.items():
        assert t == pytest.approx(s[S].mean_value(ref_game.value_map[S]), abs=1e-12)


def test_thresholds_grow_with_radius(ref_game, ref_dist):
    s = shared(ref_game, ref_dist, 50)
    small = build_dr_core(ref_game, s, AmbiguityConfig.uniform_radius(0.05))
    large = build_dr_core(ref_game, s, AmbiguityConfig.uniform_radius(0.4))
    assert all(large.thresholds[S] >= small.thresholds[S] for S in small.coalitions)


def test_expected_core_reference(ref_game, ref_dist):
    core = build_expected_core(ref_game, ref_dist)
    intercepts = {(1,): 2.0, (2,): 1.5, (3,): 2.5, (1, 2): 6.0, (2, 3): 6.5, (1, 3): 7.0}
    for S, b in intercepts.items():
        assert core.thresholds[mask_of(S)] == pytest.approx(b + XI_MEAN, abs=1e-12)


def test_expected_core_constants():
    game = constant_game({(1,): 1.0, (2,): 2.5}, 4.0)
    from drcore.distributions import TruncatedGaussianSpec

    core = build_expected_core(game, TruncatedGaussianSpec(0.3, 2.0, 0.0, 1.0))
    assert core.thresholds == {1: 1.0, 2: 2.5}


def test_expected_core_symmetry(ref_dist):
    from drcore.game_model import BoxSupport, GameSpec, PiecewiseAffineValue

    u = PiecewiseAffineValue.from_pieces([(0.7, 1.0), (-0.2, 1.2)])
    game = GameSpec(2, {1: u, 2: u}, 5.0, BoxSupport([0.0], [1.0]))
    core = build_expected_core(game, ref_dist)
    assert core.thresholds[1] == core.thresholds[2]


def test_find_allocation_toy():
    x = find_allocation(toy(4.0, 1.0, 2.0))
    np.testing.assert_allclose(x.x, [2.0, 2.0], atol=1e-12)


def test_empty_core():
    with pytest.raises(EmptyCoreError):
        find_allocation(toy(2.0, 2.0, 2.0))


def test_reference_allocation_is_stable(ref_game, ref_dist):
    core = build_expected_core(ref_game, ref_dist)
    x = find_allocation(core)
    v = check_allocation(core, x)
    assert v.stable and all(s >= -1e-8 for s in v.slacks.values())
    assert x.x.sum() == pytest.approx(12.0, abs=1e-8)


def test_check_allocation_examples():
    core = toy(4.0, 1.0, 2.0)
    v = check_allocation(core, [2.0, 2.0])
    assert v.stable and v.slacks == {1: 1.0, 2: 0.0}
    v = check_allocation(core, [4.0, 0.0])
    assert not v.stable and v.violated == [2]
    with pytest.raises(InputError):
        check_allocation(core, [1.0, 1.0, 2.0])


@pytest.mark.parametrize("seed", range(30))
def test_solver_allocation_passes_own_check(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    x0 = rng.uniform(0, 3, n)
    th = {S: sum(x0[i] for i in range(n) if S >> i & 1) - rng.uniform(0, 1) for S in range(1, 2**n - 1)}
    core = CorePolyhedron(n, x0.sum(), th)
    assert check_allocation(core, find_allocation(core)).stable


@pytest.mark.parametrize("s", [0.5, 2.0, 10.0])
def test_scaling_covariance(ref_game, ref_dist, s):
    core = build_expected_core(ref_game.with_grand_value(11.0), ref_dist)
    x = find_allocation(core).x
    xs = find_allocation(core.scaled(s)).x
    np.testing.assert_allclose(xs, s * x, rtol=1e-10, atol=1e-10)


def test_scaling_value_functions(ref_game, ref_dist):
    """Scaling intercepts and u_N moves expected thresholds consistently (slopes fixed)."""
    from drcore.game_model import GameSpec

    s = 2.0
    scaled = GameSpec(3, {S: v.scaled(s) for S, v in ref_game.value_map.items()}, 9.0 * s, ref_game.support)
    base = build_expected_core(ref_game.with_grand_value(9.0), ref_dist)
    new = build_expected_core(scaled, ref_dist)
    for S in base.coalitions:
        assert new.thresholds[S] - base.thresholds[S] == pytest.approx(
            ref_game.value_map[S].intercepts[0] * (s - 1), abs=1e-12
        )


def test_containment_by_dominance():
    rep = check_containment(toy(4.0, 1.5, 2.5), toy(4.0, 1.0, 2.0))
    assert rep.all_dominate and rep.contained and not rep.vacuous


def test_containment_violated_on_active_facet():
    delta = 0.25
    dr, ex = toy(4.0, 1.0, 2.0 - delta), toy(4.0, 1.0, 2.0)
    rep = check_containment(dr, ex)
    assert not rep.dominance[2] and not rep.contained
    # facet-LP oracle: min x2 over {x1 + x2 = 4, x1 >= 1, x2 >= 2 - delta} is 2 - delta
    assert rep.max_violation == pytest.approx(delta, abs=1e-12)


def test_containment_without_dominance_can_hold():
    # threshold of {1} is lower, but efficiency and the {2} bound keep x1 <= 1.5
    dr, ex = toy(4.0, 0.5, 2.5), toy(4.0, 0.6, 2.0)
    rep = check_containment(dr, ex)
    assert not rep.all_dominate and not rep.contained
    dr2 = toy(4.0, 1.5, 2.5)
    assert check_containment(dr2, toy(4.0, 1.4, 2.4)).contained


def test_containment_vacuous_when_empty():
    rep = check_containment(toy(2.0, 2.0, 2.0), toy(2.0, 1.0, 1.0))
    assert rep.contained and rep.vacuous


@pytest.mark.parametrize("seed", range(30))
def test_dominance_implies_containment(seed):
    rng = np.random.default_rng(seed)
    n = 3
    ex_th = {S: rng.uniform(0, 3) for S in range(1, 7)}
    dr_th = {S: t + rng.uniform(0, 0.5) for S, t in ex_th.items()}
    u_n = float(rng.uniform(5, 12))
    rep = check_containment(CorePolyhedron(n, u_n, dr_th), CorePolyhedron(n, u_n, ex_th))
    assert rep.all_dominate and rep.contained


def test_core_json_round_trip():
    core = CorePolyhedron(3, 12.0, {S: 0.1 * S for S in range(1, 7)})
    d = json.loads(core.to_json(x=[4.0, 4.0, 4.0]))
    assert d["u_N"] == 12.0 and d["x"] == [4.0, 4.0, 4.0] and d["thresholds"]["5"] == 0.5
    assert CorePolyhedron.from_dict(d) == core


def test_thresholds_must_cover_all_coalitions():
    with pytest.raises(ConfigurationError):
        CorePolyhedron(3, 1.0, {1: 0.0})


@pytest.mark.parametrize("u_n, seed", [(11.0, 0), (11.3, 1), (12.0, 2)])
def test_monolithic_matches_decomposed(ref_game, ref_dist, u_n, seed):
    game = ref_game.with_grand_value(u_n)
    s = shared(game, ref_dist, 4, seed)
    cfg = AmbiguityConfig.uniform_radius(0.1)
    x_dec = find_allocation(build_dr_core(game, s, cfg, engine="dual_lp")).x
    x_mono = find_allocation_monolithic(game, s, cfg).x
    np.testing.assert_allclose(x_mono, x_dec, atol=1e-5)


def test_parallel_worst_cases_match(ref_game, ref_dist):
    s = build_multisamples(SamplingPlan("per_coalition", 6, 3), ref_dist, ref_game)
    cfg = AmbiguityConfig.uniform_radius(0.2)
    a = compute_worst_cases(ref_game, s, cfg, "dual_lp", workers=1)
    b = compute_worst_cases(ref_game, s, cfg, "dual_lp", workers=4)
    assert {S: r.value for S, r in a.items()} == {S: r.value for S, r in b.items()}


def test_confidence_bound_holds_empirically(ref_game, ref_dist):
    """Dominance frequency over independent per-coalition samples beats prod(1 - beta_S)."""
    from drcore.ambiguity import aggregate_confidence, radius_from_beta
    from drcore.distributions import Role, derive_seed

    K, beta, trials = 30, 0.2, 200
    cfg = AmbiguityConfig.uniform_beta(beta, tail=TailParams())
    expected = build_expected_core(ref_game, ref_dist)
    bound = aggregate_confidence([beta] * ref_game.m_impl)
    assert bound > 0
    hits = 0
    for t in range(trials):
        s = build_multisamples(SamplingPlan("per_coalition", K, derive_seed(1, Role.TRIAL, t)), ref_dist, ref_game)
        dr = build_dr_core(ref_game, s, cfg)
        hits += check_containment(dr, expected).all_dominate
    assert hits / trials >= bound
