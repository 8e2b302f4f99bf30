import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drcore.errors import ConfigurationError, InputError
from drcore.game_model import (
    BoxSupport,
    GameSpec,
    NormTag,
    PiecewiseAffineValue,
    enumerate_subcoalitions,
    evaluate_value,
    lipschitz_constant,
    mask_of,
    members,
)


def test_enumerate_three_agents():
    assert enumerate_subcoalitions(3) == [0b001, 0b010, 0b011, 0b100, 0b101, 0b110]


def test_enumerate_two_agents():
    assert enumerate_subcoalitions(2) == [0b01, 0b10]


def test_enumeration_matches_reference_example(ref_game):
    labels = {members(S) for S in enumerate_subcoalitions(3)}
    assert labels == {(1,), (2,), (3,), (1, 2), (2, 3), (1, 3)}
    assert set(ref_game.coalitions) == set(enumerate_subcoalitions(3))


@pytest.mark.parametrize("n", range(2, 11))
def test_enumeration_count(n):
    cs = enumerate_subcoalitions(n)
    full = (1 << n) - 1
    assert len(cs) == 2**n - 2
    assert 0 not in cs and full not in cs
    assert cs == sorted(set(cs))


@pytest.mark.parametrize("n", [0, 1, 21])
def test_enumeration_range(n):
    with pytest.raises(ConfigurationError):
        enumerate_subcoalitions(n)


@pytest.mark.parametrize(
    "pieces, xi, expected",
    [
        ([(1.0, 2.0)], 0.5, 2.5),
        ([(2.0, 1.0), (-3.0, 0.0)], 0.0, 1.0),
        ([(2.0, 1.0), (-3.0, 0.0)], -1.0, 3.0),
    ],
)
def test_evaluate_value(pieces, xi, expected):
    assert evaluate_value(PiecewiseAffineValue.from_pieces(pieces), [xi]) == expected


def test_evaluate_dimension_mismatch():
    v = PiecewiseAffineValue.from_pieces([((1.0, 2.0), 0.0)])
    with pytest.raises(InputError):
        evaluate_value(v, [1.0])


def test_lipschitz_examples():
    assert lipschitz_constant(PiecewiseAffineValue.from_pieces([(1.0, 2.0)]), NormTag.EUCLIDEAN) == 1.0
    assert lipschitz_constant(PiecewiseAffineValue.from_pieces([(2.0, 1.0), (-3.0, 0.0)]), NormTag.EUCLIDEAN) == 3.0
    assert lipschitz_constant(PiecewiseAffineValue.from_pieces([((1.0, -2.0), 0.0)]), NormTag.ONE) == 2.0


def test_norm_duality_is_involution():
    for n in NormTag:
        assert n.dual.dual is n


def test_piece_dimensions_must_agree():
    with pytest.raises(ConfigurationError):
        PiecewiseAffineValue.from_pieces([((1.0, 2.0), 0.0), (1.0, 0.0)])
    with pytest.raises(ConfigurationError):
        PiecewiseAffineValue.from_pieces([])


def test_box_requires_ordered_bounds():
    with pytest.raises(ConfigurationError):
        BoxSupport([1.0], [0.0])


def test_game_requires_every_coalition(ref_game):
    vm = dict(ref_game.value_map)
    vm.pop(mask_of([1, 2]))
    with pytest.raises(ConfigurationError):
        GameSpec(3, vm, 12.0, ref_game.support)


def test_game_json_round_trip(ref_game, tmp_path):
    path = tmp_path / "game.json"
    ref_game.save(path)
    assert GameSpec.load(path) == ref_game


def test_json_round_trip_is_bit_exact():
    rng = np.random.default_rng(3)
    vm = {
        S: PiecewiseAffineValue(rng.normal(size=(3, 2)), rng.normal(size=3))
        for S in enumerate_subcoalitions(3)
    }
    game = GameSpec(3, vm, float(rng.normal()), BoxSupport(rng.uniform(-2, -1, 2), rng.uniform(1, 2, 2)))
    again = GameSpec.from_json(game.to_json())
    assert again == game
    assert again.to_json() == game.to_json()


def test_reported_coalition_counts(ref_game):
    assert ref_game.m_impl == 6
    assert ref_game.m_reported == 7


# -- properties ---------------------------------------------------------------

pieces_st = st.lists(
    st.tuples(
        st.lists(st.floats(-5, 5), min_size=2, max_size=2),
        st.floats(-5, 5),
    ),
    min_size=1,
    max_size=4,
)


@settings(max_examples=50, deadline=None)
@given(pieces=pieces_st, norm=st.sampled_from(list(NormTag)), seed=st.integers(0, 2**32 - 1))
def test_lipschitz_bound_holds(pieces, norm, seed):
    v = PiecewiseAffineValue.from_pieces(pieces)
    L = lipschitz_constant(v, norm)
    rng = np.random.default_rng(seed)
    xs, ys = rng.uniform(-3, 3, (1000, 2)), rng.uniform(-3, 3, (1000, 2))
    du = np.abs(v.evaluate_many(xs) - v.evaluate_many(ys))
    dist = np.linalg.norm(xs - ys, ord=norm.ord, axis=1)
    assert np.all(du <= L * dist + 1e-9)


@settings(max_examples=50, deadline=None)
@given(pieces=pieces_st, seed=st.integers(0, 2**32 - 1))
def test_midpoint_convexity(pieces, seed):
    v = PiecewiseAffineValue.from_pieces(pieces)
    rng = np.random.default_rng(seed)
    xs, ys = rng.uniform(-3, 3, (200, 2)), rng.uniform(-3, 3, (200, 2))
    mid = v.evaluate_many((xs + ys) / 2)
    assert np.all(mid <= (v.evaluate_many(xs) + v.evaluate_many(ys)) / 2 + 1e-9)
