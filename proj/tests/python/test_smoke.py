import json
import math
import os
import pathlib
import subprocess

import pytest

import cpbound

ROOT = pathlib.Path(__file__).resolve().parents[2]
CONFIGS = sorted((ROOT / "configs").glob("*.json"))


def load(name):
    return json.loads((ROOT / "configs" / name).read_text())


def schema(name):
    return json.loads((ROOT / "schema" / name).read_text())


def test_exponential_bound_is_zero():
    r = cpbound.renewal_bound(cpbound.Distribution.exponential(1.0), 1.0, 10.0)
    assert abs(r["total"]) < 1e-12
    assert r["pi"]["norm"] == pytest.approx(10.0, rel=1e-12)


def test_hyperexponential_profile_and_bound():
    d = cpbound.Distribution.hyperexponential([0.05, 0.95], [5.0, 1.0])
    prof = cpbound.build_profile(d, 1.0)
    assert prof.c0 == pytest.approx(0.95, rel=1e-9)
    assert prof.sigma(2.0) == pytest.approx(0.95 * math.exp(-2.0), rel=1e-9)
    r = cpbound.renewal_bound(d, 1.0, 5.0)
    assert r["total"] == pytest.approx(0.1215277777777779, rel=1e-9)
    assert r["h1"]["regime"] == "theta"


def test_inapplicable_raises():
    with pytest.raises(cpbound.Error, match="Inapplicable"):
        cpbound.renewal_bound(cpbound.Distribution.uniform(0.0, 1.0), 1.0, 5.0)


def test_compound_pmf_against_convolution():
    norm, c0, n = 2.0, 0.6, 30
    got = cpbound.geometric_compound_pmf(norm, c0, n)
    sev = [(1 - c0) ** i * c0 for i in range(n)]
    ref = [0.0] * (n + 1)
    power = [1.0] + [0.0] * n
    for u in range(120):
        w = math.exp(u * math.log(norm) - norm - math.lgamma(u + 1))
        ref = [r + w * p for r, p in zip(ref, power)]
        nxt = [0.0] * (n + 1)
        for k, p in enumerate(power):
            for i, s in enumerate(sev):
                if k + i + 1 <= n:
                    nxt[k + i + 1] += p * s
        power = nxt
    assert max(abs(a - b) for a, b in zip(got, ref)) < 1e-12


def test_tv_distance():
    assert cpbound.tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert cpbound.tv_distance([1.0], [0.25, 0.75]) == pytest.approx(0.75)
    with pytest.raises(cpbound.Error, match="NotNormalized"):
        cpbound.tv_distance([0.5], [1.0])


def test_h1_regimes():
    assert cpbound.h1([1.0, 0.0, 0.0])["regime"] in {"monotone", "theta"}
    assert cpbound.h1([0.1, 0.5])["monotone_holds"] is False


def test_exact_lattice_is_binomial():
    law = cpbound.exact_lattice_distribution(load("geometric_lattice.json"), 50)
    for k in range(51):
        b = math.comb(50, k) * 0.1**k * 0.9 ** (50 - k)
        assert law[k] == pytest.approx(b, abs=1e-12)


def test_empirical_distribution_is_seeded():
    cfg = load("hyperexponential.json")
    a = cpbound.empirical_distribution(cfg, 2000, 9)
    b = cpbound.empirical_distribution(cfg, 2000, 9)
    assert a == b
    assert a["replications"] == 2000


def test_bound_from_config():
    r = cpbound.bound(load("two_state.json"))
    assert r["kind"] == "mrpp"
    assert 0.0 < r["total"] < 1.0


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_configs_match_schema(path):
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(json.loads(path.read_text()), schema("config.schema.json"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_command_outputs_match_schema(path):
    jsonschema = pytest.importorskip("jsonschema")
    out_schema = schema("output.schema.json")
    cfg = json.loads(path.read_text())
    cfg.setdefault("simulation", {})["replications"] = 2000
    cfg.setdefault("output", {})["format"] = "json"
    commands = ["bound", "simulate"] + (["sweep"] if "sweep" in cfg else [])
    for command in commands:
        status, text, log = cpbound.run(command, cfg)
        assert status == 0, log
        jsonschema.validate(json.loads(text), out_schema)


def test_run_reports_config_errors():
    status, text, log = cpbound.run("bound", {"t": 1.0, "model": {"type": "renewal"}, "bogus": 1})
    assert status == 2
    assert text == ""
    assert "ConfigError" in log


@pytest.mark.skipif(not os.environ.get("CPBOUND_CLI"), reason="CLI path not given")
def test_cli_validate_output_matches_schema():
    jsonschema = pytest.importorskip("jsonschema")
    proc = subprocess.run(
        [os.environ["CPBOUND_CLI"], "validate", str(ROOT / "configs" / "exponential.json")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    jsonschema.validate(json.loads(proc.stdout), schema("output.schema.json"))
