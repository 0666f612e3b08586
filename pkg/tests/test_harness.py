import json
import math

import numpy as np
import pytest

from randbell import serialize
from randbell.cli import main
from randbell.coplanar import EigenRecord, OptimizerConfig
from randbell.core import AngleConfig, BellSpec, PolarConfig, derive_seed, make_coefficients, sample_signs
from randbell.errors import ConfigError
from randbell.harness import (
    CSV_COLUMNS,
    CampaignConfig,
    bounds_satisfied,
    emit_results,
    read_records_csv,
    records_csv,
    results_json,
    run_campaign,
    run_trial,
)
from randbell.lhv import lhv_norm_exact
from randbell.statevector import ghz
from randbell.wernerwolf import sample_f

FAST = OptimizerConfig(starts=8, max_iters=200)


def test_config_defaults_and_validation():
    cfg = CampaignConfig("coplanar_mc", 4)
    assert cfg.trials == 1000 and cfg.r == 2
    for bad in (dict(n=1), dict(n=4, trials=0), dict(n=4, threads=0), dict(n=4, r=0)):
        with pytest.raises(ConfigError):
            CampaignConfig("coplanar_mc", **{"n": 4, **bad})
    with pytest.raises(ConfigError):
        CampaignConfig("ww_mc", 3, r=3)
    with pytest.raises(ConfigError):
        CampaignConfig("coplanar_mc", 3, scheme="explicit")
    with pytest.raises(ConfigError):
        CampaignConfig("no_such_kind", 3)
    with pytest.raises(ConfigError):
        CampaignConfig.from_dict({"kind": "coplanar_mc", "n": 3, "bogus": 1})


def test_config_round_trip():
    cfg = CampaignConfig("expectation_mc", 3, r=2, trials=4, master_seed=9, state="random", optimizer=FAST)
    assert CampaignConfig.from_dict(cfg.to_dict()) == cfg
    assert serialize.loads(serialize.dumps(cfg)) == cfg


def test_trial_is_pure_function_of_index():
    cfg = CampaignConfig("coplanar_mc", 4, trials=5, master_seed=3, optimizer=FAST)
    a, b = run_trial(cfg, 2), run_trial(cfg, 2)
    assert a.trial_seed == derive_seed(3, 2)
    assert (a.norm_estimate, a.passed) == (b.norm_estimate, b.passed)


def test_csv_layout(tmp_path):
    cfg = CampaignConfig("coplanar_mc", 3, trials=4, master_seed=1, optimizer=FAST, lhv=True)
    summary, records = run_campaign(cfg)
    path = emit_results(summary, records, "csv", tmp_path / "out.csv")
    rows = read_records_csv(path)
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [int(r["trial_index"]) for r in rows] == [0, 1, 2, 3]
    for row, rec in zip(rows, records):
        assert float(row["norm_estimate"]) == rec.norm_estimate
        assert row["passed"] in ("true", "false")
        assert row["elapsed_ms"] == ""
        assert float(row["lhv_value"]) <= float(row["norm_estimate"]) + 1e-9


def test_byte_determinism_across_workers():
    base = dict(kind="coplanar_mc", n=4, trials=12, master_seed=21, optimizer=FAST)
    one = run_campaign(CampaignConfig(**base, threads=1))
    four = run_campaign(CampaignConfig(**base, threads=4))
    assert records_csv(one[1]) == records_csv(four[1])
    assert results_json(*one) == results_json(*four)
    assert "threads" not in one[0].config


def test_pass_flag_soundness():
    cfg = CampaignConfig("coplanar_mc", 3, trials=6, optimizer=FAST)
    _, records = run_campaign(cfg)
    for rec in records:
        assert rec.passed == (rec.norm_estimate <= rec.bound)


def test_forced_chsh_trial():
    cfg = CampaignConfig(
        "coplanar_mc", 2, trials=1, scheme="explicit", coefficients=(0.5,) * 4, signs=(1, 1, 1, -1)
    )
    rec = run_trial(cfg, 0)
    assert rec.norm_estimate == pytest.approx(math.sqrt(2), abs=1e-6)
    assert rec.bound == pytest.approx(9 * math.sqrt(4 * math.log(2)), rel=1e-15)
    assert rec.passed


def test_summary_json_fields():
    cfg = CampaignConfig("coplanar_mc", 10, trials=3, optimizer=FAST)
    summary, records = run_campaign(cfg)
    doc = json.loads(results_json(summary, records))
    s = doc["summary"]
    assert s["paper_bound_fraction"] == pytest.approx(1 - 2.06115362243856e-11, abs=1e-15)
    assert s["empirical_pass_fraction"] == 1.0
    assert s["bound"] == pytest.approx(61.0752638197360, rel=1e-13)
    assert s["mk_reference"] == pytest.approx(2**4.5)
    assert doc["log_base"] == "natural"
    assert bounds_satisfied(summary)


def test_ww_campaigns():
    summary, records = run_campaign(CampaignConfig("ww_mc", 2, exhaustive=True, optimizer=FAST, lhv=True))
    assert len(records) == 16
    assert all(rec.lhv_value == 1.0 for rec in records)
    assert summary.notes["ww_constant_13"] == 13 * math.sqrt(2)
    fixed = CampaignConfig("ww_mc", 3, trials=5, optimizer=OptimizerConfig(starts=0))
    s, recs = run_campaign(fixed)
    assert all(1e-9 < rec.norm_estimate <= 2.0 + 1e-9 for rec in recs)
    assert s.paper_bound_fraction == pytest.approx(1 - math.exp(-1) / 64)


def test_expectation_and_mk_campaigns():
    s, recs = run_campaign(CampaignConfig("expectation_mc", 3, trials=3, optimizer=FAST, state="eigen"))
    assert all(rec.passed for rec in recs)
    s, recs = run_campaign(CampaignConfig("mk_baseline", 6))
    assert [rec.n for rec in recs] == [2, 3, 4, 5, 6]
    for rec in recs:
        assert rec.norm_estimate == pytest.approx(2 ** ((rec.n - 1) / 2), abs=1e-9)
        assert rec.lhv_value == pytest.approx(1.0, abs=1e-12)


def test_lhv_sweep():
    _, recs = run_campaign(CampaignConfig("lhv_sweep", 3, trials=4, optimizer=FAST))
    assert all(rec.lhv_value <= rec.norm_estimate + 1e-9 for rec in recs)


# --- CLI -------------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    assert main(["coplanar-mc", "--n", "1"]) == 2
    assert main(["coplanar-mc", "--n", "3", "--trials", "0"]) == 2
    assert main(["ww-mc", "--n", "5", "--exhaustive"]) == 2
    assert main(["coplanar-mc", "--n", "40", "--trials", "1"]) == 3
    out = tmp_path / "a.csv"
    code = main(["coplanar-mc", "--n", "3", "--trials", "3", "--starts", "4", "--out", str(out),
                 "--format", "csv", "--assert-bounds"])
    assert code == 0
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_cli_config_file_override(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"n": 3, "trials": 7, "master_seed": 4, "optimizer": {"starts": 4}}))
    assert main(["coplanar-mc", "--config", str(conf), "--trials", "2"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["trials"] == 2
    assert summary["config"]["master_seed"] == 4
    assert summary["config"]["optimizer"]["starts"] == 4


def test_cli_bound(capsys):
    assert main(["bound", "--n", "10"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["prop1"] == pytest.approx(61.0752638197360, rel=1e-13)
    assert doc["prop3"] == pytest.approx(13 * math.sqrt(10))


# --- serialization ---------------------------------------------------------------

def _round_trip(obj):
    return serialize.loads(serialize.dumps(obj))


def test_serialize_round_trips():
    spec = BellSpec.from_parts(make_coefficients("random_normalized", 2, 3, seed=1), sample_signs(1, 2, 3))
    np.testing.assert_array_equal(_round_trip(spec).values, spec.values)
    a = AngleConfig(np.random.default_rng(0).uniform(0, 6, (3, 2)))
    np.testing.assert_array_equal(_round_trip(a).angles, a.angles)
    p = PolarConfig([[0.1, 0.2]], [[0.3, 0.4]])
    np.testing.assert_array_equal(_round_trip(p).phis, p.phis)
    f = sample_f(5, 4)
    np.testing.assert_array_equal(_round_trip(f).values, f.values)
    g = ghz(3)
    np.testing.assert_array_equal(_round_trip(g).amplitudes, g.amplitudes)
    assert _round_trip(EigenRecord((1, -1), 0.5, 1.25)) == EigenRecord((1, -1), 0.5, 1.25)
    res = lhv_norm_exact(spec)
    back = _round_trip(res)
    assert back.value == res.value
    np.testing.assert_array_equal(back.argmax, res.argmax)
    _, recs = run_campaign(CampaignConfig("coplanar_mc", 2, trials=1, optimizer=FAST))
    assert _round_trip(recs[0]) == recs[0]
    with pytest.raises(TypeError):
        serialize.to_dict(object())
