import json

import numpy as np
import pytest

from conftest import constant_game
from drcore.cli import EXIT_EMPTY, EXIT_INPUT, EXIT_OK, main
from drcore.distributions import EmpiricalDistribution
from drcore.game_model import BoxSupport


@pytest.fixture
def toy_game_file(tmp_path):
    path = tmp_path / "toy.json"
    constant_game({(1,): 1.0, (2,): 2.0}, grand_value=4.0).save(path)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_toy_allocation(capsys, toy_game_file):
    code, out, _ = run(capsys, "allocate", "--game", toy_game_file, "--eps", "0", "--K", "5")
    assert code == EXIT_OK
    d = json.loads(out)
    np.testing.assert_allclose(d["allocation"], [2.0, 2.0], atol=1e-9)
    assert d["stable"] is True
    assert d["thresholds"] == {"1": 1.0, "2": 2.0}


def test_empty_core_exit_code(capsys, toy_game_file):
    code, out, err = run(capsys, "allocate", "--game", toy_game_file, "--grand-value", "2.5", "--eps", "0", "--K", "5")
    assert code == EXIT_EMPTY
    assert "empty DR core" in err
    assert json.loads(out)["allocation"] is None


def test_reference_game_with_beta(capsys):
    code, out, _ = run(capsys, "allocate", "--beta", "0.05", "--K", "50", "--seed", "3")
    assert code == EXIT_OK
    d = json.loads(out)
    assert set(d["radii"]) == {"1", "2", "3", "12", "13", "23"}
    assert all(r > 0 for r in d["radii"].values())
    assert d["aggregate_confidence"] == pytest.approx(0.95**6)
    assert d["aggregation"] == "product"
    assert len(d["allocation"]) == 3
    assert sum(d["allocation"]) == pytest.approx(12.0)
    assert d["constants"]["c"] == 1.0


def test_per_agent_uses_bonferroni(capsys):
    code, out, _ = run(capsys, "allocate", "--beta", "0.01", "--K", "20", "--plan", "per-agent")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["aggregation"] == "bonferroni"
    assert d["aggregate_confidence"] == pytest.approx(1 - 6 * 0.01)


def test_samples_file(capsys, tmp_path):
    path = tmp_path / "xi.csv"
    EmpiricalDistribution(np.linspace(0.2, 0.9, 8), BoxSupport([0.0], [1.0])).save_csv(path)
    code, out, _ = run(capsys, "allocate", "--samples", path, "--eps", "0.1", "--engine", "dual")
    assert code == EXIT_OK
    d = json.loads(out)
    mean = np.linspace(0.2, 0.9, 8).mean()
    assert d["thresholds"]["1"] == pytest.approx(2 + mean + 0.1, abs=1e-8)


def test_engines_agree(capsys):
    vals = {}
    for eng in ("dual", "closed"):
        code, out, _ = run(capsys, "allocate", "--eps", "0.2", "--K", "30", "--engine", eng)
        assert code == EXIT_OK
        vals[eng] = json.loads(out)["thresholds"]
    for k in vals["dual"]:
        assert vals["dual"][k] == pytest.approx(vals["closed"][k], abs=1e-8)


@pytest.mark.parametrize(
    "argv",
    [
        ["allocate", "--beta", "1.5"],
        ["allocate", "--eps", "-0.1"],
        ["allocate", "--eps", "0.1", "--K", "0"],
        ["allocate", "--eps", "0.1", "--game", "/nonexistent/game.json"],
        ["allocate", "--eps", "0.1", "--var", "-1"],
    ],
)
def test_bad_input_exit_code(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INPUT
    assert err.startswith("error:")


def test_malformed_game_file(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n_agents": 2}')
    code, _, _ = run(capsys, "allocate", "--game", path, "--eps", "0.1")
    assert code == EXIT_INPUT


def test_radius_flag_required():
    with pytest.raises(SystemExit):
        main(["allocate"])


def test_check_reports_containment(capsys):
    code, out, _ = run(capsys, "check", "--eps", "0.3", "--K", "100")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["contained"] is True
    assert all(d["dominance"].values())
    assert set(d["E"]) == set(d["W"])


def test_sweep_k_writes_files(capsys, tmp_path):
    out_dir = tmp_path / "sk"
    code, out, _ = run(capsys, "sweep-k", "--ks", "5,10", "--trials", "3", "--out", out_dir)
    assert code == EXIT_OK
    assert "constants: c=1.0 q=1.0 a=2.0 p=1" in out
    assert (out_dir / "trials.csv").read_text().startswith("axis,trial,coalition,W,E,dominates,all_dominate\n")
    assert (out_dir / "summary.csv").exists()
    assert json.loads((out_dir / "meta.json").read_text())["radius"] == 0.3


def test_sweep_k_worker_independent(capsys, tmp_path):
    for w in (1, 2):
        run(capsys, "sweep-k", "--ks", "5,10", "--trials", "4", "--workers", w, "--out", tmp_path / f"w{w}")
    assert (tmp_path / "w1" / "trials.csv").read_bytes() == (tmp_path / "w2" / "trials.csv").read_bytes()


def test_sweep_eps_writes_files(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep-eps", "--K", "20", "--eps-grid", "0.01,0.5", "--trials", "3", "--out", tmp_path)
    assert code == EXIT_OK
    assert "axis=0.5 empirical_confidence=1.0000" in out
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["sample_size"] == 20
    assert meta["axis"] == "radius"


def test_consistency_writes_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "consistency", "--ks", "10,100", "--trials", "2", "--out", tmp_path)
    assert code == EXIT_OK
    text = (tmp_path / "consistency.csv").read_text()
    assert text.splitlines()[0] == "K,radius,beta,mean_gap,max_gap"
    assert text in out


def test_p2_requires_override(capsys, tmp_path):
    from drcore.game_model import GameSpec, PiecewiseAffineValue

    box = BoxSupport([0.0, 0.0], [1.0, 1.0])
    u = PiecewiseAffineValue.from_pieces([([1.0, 0.0], 0.0)])
    game = GameSpec(2, {1: u, 2: u}, 5.0, box)
    path = tmp_path / "g2.json"
    game.save(path)
    xi = tmp_path / "xi2.csv"
    EmpiricalDistribution(np.random.default_rng(0).uniform(0, 1, (6, 2)), box).save_csv(xi)
    common = ["allocate", "--game", path, "--samples", xi, "--beta", "0.1"]
    code, _, err = run(capsys, *common)
    assert code == EXIT_INPUT
    code, out, _ = run(capsys, *common, "--allow-p2-exponent", "2.5")
    assert code == EXIT_OK
    assert json.loads(out)["constants"]["p"] == 2
