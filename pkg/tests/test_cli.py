import json
import os
import subprocess
import sys

import pytest

from spreadperc import InvalidConfigError
from spreadperc.cli import main, parse_config


def run_cli(args, env=None):
    e = dict(os.environ)
    e.update(env or {})
    return subprocess.run([sys.executable, "-m", "spreadperc.cli", *args], capture_output=True, text=True, env=e)


def test_defaults():
    cfg = parse_config()
    assert cfg.kernel["shape"] == "ball" and cfg.boundary == "torus"
    assert cfg.window_scale == 48 and cfg.replicates == 32 and cfg.d == 2


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"d": 3, "lambda": 1.5, "r-list": [2, 4]}))
    cfg = parse_config(path, r=5.0)
    assert (cfg.d, cfg.lam, cfg.r_list, cfg.r) == (3, 1.5, [2, 4], 5.0)


@pytest.mark.parametrize("bad,needle", [({"d": 0}, "d must"), ({"r_list": [2, -4]}, "r_list[1]"),
                                        ({"replicates": 0}, "replicates"), ({"colour": 1}, "colour"),
                                        ({"r": float("nan")}, "finite"), ({"boundary": "mirror"}, "boundary")])
def test_invalid_configs(bad, needle):
    with pytest.raises(InvalidConfigError) as exc:
        parse_config(bad)
    assert needle in str(exc.value)


def test_exit_codes(tmp_path, capsys):
    assert main(["gw", "--lambda", "2"]) == 0
    assert capsys.readouterr().out.splitlines() == ["lambda,psi,residual", f"2.0,{0.7968121300200193!r},{4.440892098500626e-16!r}"]
    assert main(["gw", "--d", "0"]) == 1
    assert main(["gw", "--nonsense"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["gw", "--config", str(bad)]) == 1
    # a threshold run whose bracket cannot be met is a numerical error
    assert main(["threshold", "--r", "3", "--window-scale", "10", "--replicates", "2", "--batches", "1",
                 "--lam-lo", "4", "--lam-hi", "6", "--tol", "0.05"]) == 2
    assert main(["opnorm", "--lambda", "1.5", "--L", "4", "--m", "16", "--max-iter", "2", "--tol", "1e-300"]) == 2


def test_outputs_and_sidecar(tmp_path):
    out = tmp_path / "op.csv"
    assert main(["opnorm", "--lambda", "1.5", "--L", "4", "--m", "16", "--out", str(out)]) == 0
    head, row = out.read_text().splitlines()
    assert head == "d,lambda,L,m,norm,iterations"
    meta = json.loads((tmp_path / "op.csv.json").read_text())
    assert meta["seed"] == 0 and meta["config"]["lam"] == 1.5
    assert {"numpy", "scipy", "numba", "spreadperc"} <= set(meta["versions"])
    assert "time" not in json.dumps(meta).lower()


@pytest.mark.parametrize("args,header", [
    (["sample", "--r", "3", "--window-scale", "8", "--replicates", "2"], "replicate,d,r,lambda,n,C1,C2,components,wrap_any"),
    (["sweep", "--r", "3", "--window-scale", "8", "--replicates", "3", "--lambda-grid", "0.5,1.5"],
     "lambda,mean_C1_frac,mean_C2_frac,ci_lo,ci_hi,wrap_frac"),
    (["bond", "--p", "0.8639", "--bond-shape", "16,16", "--replicates", "3"], "replicate,spanning"),
    (["renorm", "--r", "3", "--L", "2", "--a", "0.2", "--replicates", "30"], "r,lambda,L,a,p_good,ci_lo,ci_hi"),
    (["threshold", "--r", "3", "--window-scale", "10", "--replicates", "3", "--batches", "2", "--tol", "0.05"],
     "r,lambda_c,ci_lo,ci_hi,criterion"),
])
def test_subcommand_headers(tmp_path, args, header):
    out = tmp_path / "o.csv"
    assert main(args + ["--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == header


def test_renorm_spanning_output(tmp_path):
    span = tmp_path / "span.csv"
    assert main(["renorm", "--r", "2", "--L", "1.5", "--a", "0.2", "--replicates", "30", "--bond-grid", "8",
                 "--spanning-out", str(span), "--out", str(tmp_path / "g.csv")]) == 0
    lines = span.read_text().splitlines()
    assert lines[0] == "replicate,spanning" and len(lines) == 31
    assert (tmp_path / "span.csv.json").exists()


def test_points_out(tmp_path):
    pts = tmp_path / "pts.csv"
    assert main(["sample", "--r", "3", "--window-scale", "6", "--replicates", "1", "--points-out", str(pts),
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert pts.read_text().startswith("id,x0,x1")


def test_console_script_runs():
    res = run_cli(["gw", "--lambda", "4"])
    assert res.returncode == 0 and res.stdout.startswith("lambda,psi,residual")
    assert run_cli(["gw", "--d", "0"]).returncode == 1
