import pytest

from drcore.distributions import TruncatedGaussianSpec
from drcore.game_model import BoxSupport, GameSpec, PiecewiseAffineValue, mask_of, reference_game

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture
def ref_game():
    return reference_game()


@pytest.fixture
def ref_dist():
    return TruncatedGaussianSpec(mean=1.0, variance=1.0, lo=0.0, hi=1.0)


@pytest.fixture
def unit_box():
    return BoxSupport([0.0], [1.0])


def constant_game(values: dict, grand_value: float, n: int = 2) -> GameSpec:
    vm = {mask_of(S): PiecewiseAffineValue.constant(v) for S, v in values.items()}
    return GameSpec(n, vm, grand_value, BoxSupport([0.0], [1.0]))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_instance(rng, max_pieces=3, max_atoms=20):
    """Desk-scale worst-case instance: (u, emp, eps, box) with p = 1."""
    from drcore.distributions import EmpiricalDistribution

    lo = rng.uniform(-1.0, 0.5)
    hi = lo + rng.uniform(0.2, 2.0)
    box = BoxSupport([lo], [hi])
    M = int(rng.integers(1, max_pieces + 1))
    u = PiecewiseAffineValue(rng.uniform(-3, 3, (M, 1)), rng.uniform(-2, 2, M))
    K = int(rng.integers(1, max_atoms + 1))
    emp = EmpiricalDistribution(rng.uniform(lo, hi, K), box)
    eps = float(rng.uniform(0, 1))
    return u, emp, eps, box
