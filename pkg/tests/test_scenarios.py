import json
from pathlib import Path

import numpy as np
import pytest

from bclab.cli import main
from bclab.errors import ConfigError
from bclab.plane import BoxRect
from bclab.region import circle_region
from bclab.scenarios import ScenarioConfig, run
from bclab.svg import Figure

CONFIGS = Path(__file__).resolve().parent.parent / "scenarios"


def cfg(name, **kw):
    return ScenarioConfig.load(CONFIGS / f"{name}.cfg").with_overrides(**kw)


def test_parse_config():
    c = ScenarioConfig.parse("""
        # comment line
        scenario = theorem_a   # trailing comment
        family = quadratic
        a = 0.25+0.5i
        frame = -1, 1, -2, 2
        delta = 0.05
    """)
    assert c.scenario == "theorem_a" and c.params == {"a": 0.25 + 0.5j}
    assert c.frame == BoxRect(-1, 1, -2, 2) and c.delta == 0.05
    assert c.with_overrides(seed=4, delta=None).seed == 4


@pytest.mark.parametrize("text", [
    "family = quadratic",
    "scenario = nope",
    "scenario = theorem_a\nwhat = 1",
    "scenario = theorem_a\ndelta = -1",
    "scenario = theorem_a\ndelta = abc",
    "scenario = theorem_a\nframe = 0 1 2",
    "scenario = theorem_a\nbudget = 0",
    "scenario = theorem_a\nno equals sign",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        ScenarioConfig.parse(text)


def test_theorem_a_report():
    rep = run(cfg("theorem_a"))
    assert rep.passed and rep.exit_code == 0
    assert {h.name for h in rep.hypotheses} >= {"totally_invariant", "c_fc_not_separated"}
    roots = np.array([0.5 + 0.5j * 3 ** 0.5, 0.5 - 0.5j * 3 ** 0.5])
    assert len(rep.certificates) == 2
    for c in rep.certificates:
        assert np.abs(roots - c.box.center).min() < 1e-6


@pytest.mark.parametrize("name,region", [("theorem_b", "fill(U + f(U))"), ("theorem_c_fill", "Fill(K)"),
                                         ("theorem_c_essential", "Fill(K) minus puncture")])
def test_theorem_b_c_pass(name, region):
    rep = run(cfg(name))
    assert rep.passed, rep.reason
    assert rep.conclusion["region"] == region
    assert rep.certificates and rep.certificates[0].index != 0


def test_essential_case_reports_region():
    rep = run(cfg("theorem_c_essential"))
    assert rep.conclusion["case"] == "essential"
    assert rep.conclusion["in_K"] + rep.conclusion["in_bounded_component"] == len(rep.certificates)
    assert rep.conclusion["lift_deck_residual"] < 1e-9


@pytest.mark.parametrize("name", ["theorem_b_violated", "theorem_c_violated"])
def test_violations_have_no_verdict(name):
    rep = run(cfg(name))
    assert rep.verdict == "hypothesis_violated" and rep.exit_code == 1
    assert not rep.certificates and not rep.conclusion


def test_theorem_a_violated_when_K_separates():
    c = ScenarioConfig(scenario="theorem_a", family="quadratic", params={"a": 1}, K="circle", K_radius=0.5)
    rep = run(c)
    assert rep.exit_code == 1
    names = {h.name for h in rep.hypotheses if not h.passed}
    assert "c_fc_not_separated" in names and "totally_invariant" in names


def test_annulus_rate_scenario():
    rep = run(cfg("annulus_rate"))
    assert rep.passed
    assert rep.conclusion["counts"] == [[1, 1], [2, 3], [3, 7], [4, 15]]


def test_budget_exhaustion_is_undecided():
    rep = run(cfg("theorem_a", budget=10))
    assert rep.verdict == "undecided" and rep.exit_code == 2


def test_proposition_model_scenario(tmp_path):
    rep = run(cfg("proposition_model", box_delta=1e-2))
    assert rep.passed
    assert len([c for c in rep.certificates if c.status == "contains_fixed"]) == 1
    assert rep.certificates[0].contains(1 + 0j)
    paths = rep.write(tmp_path)
    svg = paths["figure"].read_text()
    assert svg.count("<path") > 100          # h-flow arrows
    assert 'stroke="red"' in svg             # certificate box


def test_outputs_and_determinism(tmp_path):
    a = run(cfg("theorem_a")).write(tmp_path / "a")
    b = run(cfg("theorem_a")).write(tmp_path / "b")
    for key in ("json", "csv", "figure"):
        assert a[key].read_bytes() == b[key].read_bytes()
    doc = json.loads(a["json"].read_text())
    assert doc["verdict"] == "pass" and "wall" not in a["json"].read_text()
    assert "wall-clock" in a["text"].read_text()
    assert a["csv"].read_text().splitlines()[0] == "x_lo,x_hi,y_lo,y_hi,index,status,margin"


def test_seed_changes_dust():
    a = run(cfg("theorem_a", seed=1)).figure.to_string()
    b = run(cfg("theorem_a", seed=2)).figure.to_string()
    assert a != b


def test_figure_is_deterministic_and_valid():
    K = circle_region(0, 1.0, BoxRect(-2, 2, -2, 2), 0.05)
    svgs = []
    for _ in range(2):
        fig = Figure(BoxRect(-2, 2, -2, 2), title="t")
        fig.mask(K)
        fig.rect(BoxRect(-0.1, 0.1, -0.1, 0.1), stroke="red", min_px=6)
        fig.arrow(0, 1 + 1j)
        fig.marker(0.5, label="c<1>")
        svgs.append(fig.to_string())
    assert svgs[0] == svgs[1]
    assert svgs[0].startswith("<svg") and svgs[0].rstrip().endswith("</svg>")
    assert "c&lt;1&gt;" in svgs[0]
    # one rect per horizontal run of the mask
    runs = sum(int(np.count_nonzero(np.diff(np.concatenate([[0], r.astype(int), [0]])) == 1)) for r in K.mask)
    assert svgs[0].count("<rect") == runs + 2


def test_cli_run(tmp_path, capsys):
    code = main(["run", str(CONFIGS / "theorem_a.cfg"), "--out", str(tmp_path), "--seed", "0"])
    assert code == 0
    for name in ("report.json", "report.txt", "certificates.csv", "figure.svg"):
        assert (tmp_path / name).exists()
    assert "verdict:  pass" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    assert main(["run", str(CONFIGS / "theorem_c_violated.cfg"), "--out", str(tmp_path / "v")]) == 1
    assert main(["run", str(CONFIGS / "theorem_a.cfg"), "--out", str(tmp_path / "u"), "--budget", "5"]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 3
    assert main(["run"]) == 3
    assert main(["frobnicate"]) == 3
    assert main(["run", str(CONFIGS / "theorem_a.cfg"), "--delta", "-1"]) == 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("scenario = theorem_a\nzzz = 1\n")
    assert main(["run", str(bad)]) == 3


def test_cli_rate(capsys):
    assert main(["rate", "--family", "monomial", "--d", "2", "--N", "4"]) == 0
    out = capsys.readouterr().out
    assert "15" in out and "0.6770125503" in out


def test_cli_verify_perturbation(tmp_path, capsys):
    assert main(["verify-perturbation", "--delta", "1e-2", "--samples", "2000", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "perturbation.csv").exists()
    assert "[PASS] search" in capsys.readouterr().out
