import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from villadsen.cli import EXIT_CAP, EXIT_FAIL, EXIT_INPUT, EXIT_OK, main, results_bytes, run_command
from villadsen.config import ConfigError, parse_config
from villadsen.dimension_system import compose

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

CHAIN = {"levels": [{"n": [1], "theta": [[2]]}, {"theta": [[2]]}, {}]}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def run_main(argv, capsys):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_parse_minimal_and_errors():
    cfg = parse_config(json.dumps(CHAIN))
    assert cfg.system.n(3) == (4,)
    with pytest.raises(ConfigError) as exc:
        parse_config({"levels": [{"n": [1], "theta": [[-2]]}]})
    assert exc.value.errors[0][0] == "$.levels[0].theta[0][0]"
    with pytest.raises(ConfigError) as exc:
        parse_config({"levels": [{"n": [1], "theta": [[2]]}, {"n": [3]}]})
    assert "unitality at (1,1)" in str(exc.value)
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config({"levels": [{"n": [1], "theta": [[2]]}], "partitions": {"1": [[[[1], [1]]]]}})


@given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.integers(1, 3))
def test_round_trip_normal_form(thetas, n1):
    doc = {"levels": [{"n": [n1], "theta": [[thetas[0]]]}] + [{"theta": [[t]]} for t in thetas[1:]]}
    once = parse_config(doc).to_dict()
    assert parse_config(once).to_dict() == once


def test_validate_and_compose(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"levels": [{"n": [1, 1], "theta": [[1, 1], [1, 1]]}, {"theta": [[2, 1], [1, 2]]}, {}]})
    code, rep = run_main(["validate", "--system", cfg], capsys)
    assert code == EXIT_OK and rep["verdict"] == "OK"
    code, rep = run_main(["compose", "--system", cfg, "--from", "1", "--to", "3"], capsys)
    assert code == EXIT_OK
    parsed = parse_config(Path(cfg).read_text())
    assert rep["results"]["theta"] == [list(r) for r in compose(parsed.system, 1, 2)] == [[3, 3], [3, 3]]
    assert rep["results"]["pullback_matrix"] == [["1/2", "1/2"], ["1/2", "1/2"]]
    assert rep["input_digests"]["system"].startswith("sha256:")


def test_poulsen_cert_example(capsys):
    argv = [
        "poulsen-cert",
        "--system", str(CONFIGS / "chain_2_4_8_16.json"),
        "--trace", str(CONFIGS / "uniform_trace_level2.json"),
        "--observables", str(CONFIGS / "indicators_level2.json"),
        "--epsilon", "1/100",
        "--horizon", "3",
    ]
    code, rep = run_main(argv, capsys)
    assert code == EXIT_OK and rep["verdict"] == "Pass"
    assert rep["results"]["recheck_reproduced"]
    code, rep = run_main(argv[:-4] + ["--epsilon", "3/0", "--horizon", "3"], capsys)
    assert code == EXIT_INPUT


def test_exit_codes(tmp_path, capsys):
    blocky = write(tmp_path, "b.json", {"levels": [{"n": [1, 1], "theta": [[1, 0], [0, 1]]}, {}], "tail_rule": {"thetas": [[[1, 0], [0, 1]]]}})
    code, rep = run_main(["simplicity", "--system", blocky, "--horizon", "3"], capsys)
    assert code == EXIT_FAIL and rep["verdict"] == "NotSimplePeriodic"
    bad = write(tmp_path, "bad.json", {"levels": [{"n": [1], "theta": [[2]]}, {"n": [3]}]})
    code, rep = run_main(["validate", "--system", bad], capsys)
    assert code == EXIT_INPUT and rep["results"]["errors"]
    code, rep = run_main(["compose", "--system", write(tmp_path, "c.json", CHAIN), "--from", "1", "--to", "9"], capsys)
    assert code == EXIT_INPUT
    code, rep = run_main(["intertwine", "--system", str(CONFIGS / "af_divergent.json"), "--depth", "12", "--mode", "cone"], capsys)
    assert code == EXIT_FAIL and "ModeMismatch" in rep["results"]["errors"][0]


def test_resource_cap(tmp_path):
    cfg = parse_config({"levels": [{"n": [21], "theta": [[2]]}, {}]})
    trace = {"tower": {"levels": [{"level": 1, "lambda": ["1"], "measures": [{"type": "uniform", "n": 21, "m": 2}]}]}}
    flags = {"trace_doc": trace, "observables_doc": {"indicators": {"level": 1}}, "epsilon": "1/10", "horizon": 2}
    _, code = run_command(cfg, "poulsen-cert", flags)
    assert code == EXIT_CAP


def test_unknown_command_and_missing_flags():
    cfg = parse_config(CHAIN)
    with pytest.raises(ValueError):
        run_command(cfg, "frobnicate")
    rep, code = run_command(cfg, "compose", {"from_level": 1})
    assert code == EXIT_INPUT and "--to-level" in rep["results"]["error"]


@pytest.mark.parametrize("command,flags", [("permute-partitions", {"levels": 2, "trials": 3}), ("extend-trace", {"depth": 4})])
def test_determinism(command, flags):
    cfg = parse_config((CONFIGS / "periodic_j3.json").read_text())
    a, _ = run_command(cfg, command, flags)
    b, _ = run_command(cfg, command, flags)
    assert results_bytes(a) == results_bytes(b)
    c, _ = run_command(cfg, command, dict(flags, rng_seed=cfg.rng_seed + 1))
    assert results_bytes(a) != results_bytes(c)


def test_report_shape_and_out_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["unique-trace", "--system", str(CONFIGS / "periodic_j3.json"), "--horizon", "4", "--out", str(out)])
    rep = json.loads(out.read_text())
    assert code == EXIT_OK
    assert {"schema", "command", "flags", "input_digests", "rng_seed", "results", "verdict", "wall_time_s"} <= set(rep)
    assert rep["schema"] == "villadsen-report/1"
