import json
import struct

import numpy as np
import pytest
import yaml

from adaptsde.cli import main
from adaptsde.config import ExperimentConfig
from adaptsde.core import ConfigError
from adaptsde.outputs import (
    RESULT_COLUMNS,
    STABILITY_COLUMNS,
    fmt,
    read_csv,
    read_samples,
    write_csv,
    write_samples,
)

SMALL = {"dim": 4, "n_samples": 32, "threads": 1}


def _write(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def test_config_round_trip():
    cfg = ExperimentConfig.from_dict({"seed": 3, "process": {"name": "ve", "sigma_max": 20.0},
                                      "data": {"kind": "mixture"}, "solver": {"eps_rel": 0.05}})
    again = ExperimentConfig.from_dict(yaml.safe_load(cfg.dump()))
    assert again == cfg
    assert again.dump() == cfg.dump()


@pytest.mark.parametrize("doc", [
    {"bogus": 1}, {"method": "rk4"}, {"solver": {"eps_rel": -1}}, {"data": {"kind": "image"}},
    {"process": {"name": "subvp"}}, {"benchmark": {"baselines": ["ddim"]}}, {"seed": -1},
    {"stability": {"limit_hs": [0.1]}}, {"em": {"n_steps": 0}}, {"pc": {"warp": 2}},
    {"solver": {"norm_order": "l1"}},
])
def test_config_rejects(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_config_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: [1,\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)


def test_unknown_method_exit_code(tmp_path, capsys):
    rc = main(["solve", "--method", "rk4", "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    for m in ("adaptive", "em", "pc", "ode"):
        assert m in err


def test_numeric_abort_exit_code(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "solver": {"eps_abs": 1e-9, "eps_rel": 0.0,
                                                "max_attempts": 3}})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_solve_em_outputs(tmp_path):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--method", "em",
                 "--steps", "1000"]) == 0
    rep = yaml.safe_load((out / "report.yaml").read_text())
    assert rep["nfe_solver_mean"] == 1000.0
    assert rep["denoise_evals"] == 32
    assert rep["nfe_per_sample"] == [1001] * 32
    x = read_samples(out / "samples.bin")
    assert x.shape == (32, 4)
    raw = (out / "samples.bin").read_bytes()
    assert raw[:4] == b"ADSM"
    assert struct.unpack_from("<IQQ", raw, 4) == (1, 32, 4)
    assert len(raw) == 24 + 8 * 32 * 4


def test_solve_adaptive_trace(tmp_path):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--trace",
                 "--eps-rel", "0.05"]) == 0
    lines = (out / "trace.ndjson").read_text().splitlines()
    recs = [json.loads(s) for s in lines]
    assert set(recs[0]) == {"sample_id", "t", "h", "E", "accepted"}
    ids = [r["sample_id"] for r in recs]
    assert ids == sorted(ids) and set(ids) == set(range(32))
    rep = yaml.safe_load((out / "report.yaml").read_text())
    assert len(recs) == rep["steps_accepted"] + rep["steps_rejected"]
    assert isinstance(rep["w2"], float)


def test_benchmark_csv_shape_and_determinism(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "benchmark": {"eps_rel": [0.1, 0.5], "baselines": ["em"],
                                                   "em_steps": 20, "n_projections": 8}})
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["benchmark", "--config", str(cfg), "--out", str(out), "--no-timing"]) == 0
        outs.append((out / "benchmark.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = read_csv(tmp_path / "o0" / "benchmark.csv")
    assert tuple(rows[0]) == RESULT_COLUMNS and len(RESULT_COLUMNS) == 8
    assert [r[0] for r in rows[1:]] == ["adaptive", "em_matched", "adaptive", "em_matched", "em"]
    assert all(len(r) == 8 for r in rows)
    assert b"\r\n" in outs[0]


def test_ablate_rows(tmp_path):
    cfg = _write(tmp_path, {**SMALL, "ablation": {"eps_rel": 0.1, "r_values": [0.5]},
                            "benchmark": {"n_projections": 4}})
    out = tmp_path / "o"
    assert main(["ablate", "--config", str(cfg), "--out", str(out), "--no-timing"]) == 0
    labels = [r[0] for r in read_csv(out / "ablation.csv")[1:]]
    assert labels == ["baseline", "tolerance_variant=current", "extrapolate=off",
                      "norm_order=linf", "integrator=lamba", "r=0.5"]


def test_stability_csv(tmp_path):
    cfg = _write(tmp_path, {"stability": {"lams": [-30.0, -1.0], "hs": [0.1, 0.05],
                                          "n_paths": 500, "n_steps": 200, "limit_paths": 2000,
                                          "limit_steps": 200}})
    out = tmp_path / "o"
    assert main(["stability", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "stability.csv")
    assert tuple(rows[0]) == STABILITY_COLUMNS
    body = [dict(zip(rows[0], r)) for r in rows[1:]]
    cell = next(r for r in body if float(r["lam"]) == -30.0 and float(r["h"]) == 0.1)
    assert cell["stable"] == "false" and cell["diverged"] == "true"
    for r in body:
        lam, h = float(r["lam"]), float(r["h"])
        if r["stable"] == "true":
            assert float(r["analytic_m2"]) == -1.0 / (2 * lam + lam * lam * h)
    sweep = {float(r["h"]) for r in body if float(r["lam"]) == -1.0}
    assert {0.2, 0.1, 0.05, 0.025} <= sweep
    lim = read_csv(out / "stability_limit.csv")
    assert float(lim[1][3]) == 0.5


def test_fmt_and_csv_round_trip(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, 2.0 ** 60, -0.0]
    assert [float(fmt(v)) for v in vals] == vals
    assert fmt(True) == "true" and fmt(None) == "" and fmt(np.int64(7)) == "7"
    p = tmp_path / "t.csv"
    write_csv(p, ("a", "b"), [("x,y", 0.1)])
    assert read_csv(p) == [["a", "b"], ["x,y", "0.10000000000000001"]]
    with pytest.raises(ValueError):
        write_csv(p, ("a",), [(1, 2)])


def test_sample_file_errors(tmp_path):
    p = tmp_path / "s.bin"
    x = np.arange(6.0).reshape(2, 3)
    write_samples(p, x)
    assert np.array_equal(read_samples(p), x)
    raw = p.read_bytes()
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        read_samples(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_samples(tmp_path / "short.bin")
