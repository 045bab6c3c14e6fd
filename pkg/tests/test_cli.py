import csv
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from fiberpol import data_path, schema_path
from fiberpol.cli import main
from fiberpol.decomposition import analyze_fiber
from fiberpol.fiber import TwistedPCF
from fiberpol.fixtures import generate_fixture
from fiberpol.report import AnalysisReport
from fiberpol.retrieval import read_measurements, stokes_statistics

GOLDEN = Path(__file__).parent / "golden"
TWISTED = '{"variant": "TwistedPCF", "params": {"delta_n_cb": 8e-7, "residual_delta_n_lb": 1e-7, "residual_axis": 0.3}}'


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def validate(obj, name):
    schema = json.loads(schema_path(name).read_text())
    jsonschema.validate(obj, schema)


def test_psg_json_matches_golden(capsys):
    code, out, _ = run(capsys, "psg", "--format", "json")
    assert code == 0
    assert out == (GOLDEN / "psg.json").read_text()
    validate(json.loads(out), "psg")


def test_psg_text_lists_six_states(capsys):
    code, out, _ = run(capsys, "psg")
    rows = out.strip().splitlines()[1:]
    assert code == 0 and [r.split()[0] for r in rows] == ["H", "V", "D", "A", "+", "-"]


def test_fixture_matches_golden(tmp_path, capsys):
    out = tmp_path / "f.csv"
    code, _, _ = run(capsys, "fixture", "--model", TWISTED, "--length", 0.8, "--noise", 0.005,
                     "--repeats", 3, "--seed", 7, "--out", out)
    assert code == 0
    assert out.read_bytes() == (GOLDEN / "fixture_small.csv").read_bytes()


def test_fixture_byte_identical_for_seed(tmp_path, capsys):
    paths = []
    for name, seed in (("a", 3), ("b", 3), ("c", 4)):
        p = tmp_path / f"{name}.csv"
        run(capsys, "fixture", "--model", TWISTED, "--length", 0.8, "--noise", 0.01,
            "--repeats", 20, "--seed", seed, "--out", p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1] != paths[2]


def test_fixture_noise_statistics():
    sigma, n = 0.005, 400
    mset = generate_fixture(TwistedPCF(8e-7, 1e-7, 0.3), 0.8, 808e-9, sigma, n, seed=11)
    bound = 3 * sigma ** 2 * np.sqrt(2 / (n - 1))
    for rec in mset.records:
        cov = stokes_statistics(rec.samples_out).covariance
        assert np.all(np.abs(np.diag(cov) - sigma ** 2) < bound)
        off = cov[~np.eye(4, dtype=bool)]
        assert np.all(np.abs(off) < 4 * sigma ** 2 / np.sqrt(n - 1))


def test_loop_closure_noise_free(tmp_path, capsys):
    p = tmp_path / "clean.csv"
    run(capsys, "fixture", "--model", TWISTED, "--length", 0.8, "--noise", 0, "--repeats", 2,
        "--seed", 1, "--out", p)
    mset = read_measurements(p, wavelength=808e-9, fiber_length=0.8)
    res = analyze_fiber(mset, 8e-7, 1e-7, n_resamples=0)
    assert abs(res.circular.delta_n - 8e-7) < 1e-9
    assert abs(res.linear.delta_n - 1e-7) < 1e-9


def test_pipeline_on_bundled_fixture(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _, _ = run(capsys, "pipeline", "--input", data_path("twisted_pcf_fixture.csv"),
                     "--length", 0.8, "--prior-cb", 8e-7, "--prior-lb", 1e-7, "--seed", 1, "--out", out)
    assert code == 0
    obj = json.loads(out.read_text())
    validate(obj, "report")
    circ = obj["birefringence"]["circular"]
    assert circ["delta_n"] == pytest.approx(8e-7, rel=0.01)
    assert abs(circ["delta_n"] - 8e-7) < 3 * circ["sigma"] + 1e-12
    assert obj["provenance"]["seed"] == 1


def test_pipeline_deterministic_and_round_trips(tmp_path, capsys):
    texts = []
    for name in "ab":
        out = tmp_path / f"{name}.json"
        run(capsys, "pipeline", "--input", data_path("twisted_pcf_fixture.csv"), "--length", 0.8,
            "--prior-cb", 8e-7, "--prior-lb", 1e-7, "--seed", 5, "--resamples", 150, "--out", out)
        texts.append(out.read_text())
    assert texts[0] == texts[1]
    report = AnalysisReport.from_json(texts[0])
    assert report.to_json() == texts[0]


def test_pipeline_text_format(capsys):
    code, out, _ = run(capsys, "pipeline", "--input", data_path("twisted_pcf_fixture.csv"),
                       "--length", 0.8, "--prior-cb", 8e-7, "--prior-lb", 1e-7, "--seed", 1,
                       "--format", "text", "--resamples", 100)
    assert code == 0 and "circular: dn = 8.00" in out


def test_simulate_twisted_h_stays_linear(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    model = '{"variant": "TwistedPCF", "params": {"delta_n_cb": 8e-7}}'
    code, _, _ = run(capsys, "simulate", "--model", model, "--input", "H", "--length", 2.0,
                     "--dz", 0.05, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert list(rows[0]) == ["z", "s0", "s1", "s2", "s3"]
    assert len(rows) == 41
    assert all(abs(float(r["s3"])) < 1e-10 for r in rows)


def test_simulate_accepts_stokes_json(capsys):
    code, out, _ = run(capsys, "simulate", "--model", '{"variant": "LinearPMF", "params": {"delta_n_lb": 3e-4}}',
                       "--input", "[1, 0, 0, 1]", "--length", 0.1, "--dz", 0.05)
    assert code == 0 and len(out.splitlines()) == 4


def test_ensemble_schema_and_determinism(tmp_path, capsys):
    model = '{"variant": "StandardRandom", "params": {"correlation_length": 1.0, "delta_rms": 1.0}}'
    outs = []
    for name in "ab":
        p = tmp_path / f"{name}.json"
        code, _, _ = run(capsys, "ensemble", "--model", model, "--n", 500, "--length", 30,
                         "--seed", 2, "--out", p)
        assert code == 0
        outs.append(p.read_text())
    assert outs[0] == outs[1]
    obj = json.loads(outs[0])
    validate(obj, "ensemble")
    assert obj["n_fibers"] == 500 and sum(obj["octant_counts"]) == 500


def test_reconstruct_and_decompose(tmp_path, capsys):
    code, out, _ = run(capsys, "reconstruct", "--input", GOLDEN / "fixture_small.csv", "--seed", 1,
                       "--resamples", 200)
    assert code == 0
    obj = json.loads(out)
    assert len(obj["m"]) == 16 and obj["condition_number"] == pytest.approx(np.sqrt(3), rel=1e-9)
    mfile = tmp_path / "m.json"
    mfile.write_text(json.dumps(obj["m"]))
    code, out, _ = run(capsys, "decompose", "--matrix", mfile)
    assert code == 0
    dec = json.loads(out)
    assert dec["retardance"]["fast_axis"] == pytest.approx(0.3, abs=0.05)


def test_plan_penalty_beat_length(capsys):
    model = '{"variant": "TwistedPCF", "params": {"delta_n_cb": 8e-7}}'
    code, out, _ = run(capsys, "plan", "--model", model, "--length", 0.5, "--calibrate", "H")
    obj = json.loads(out)
    validate(obj, "plan")
    assert code == 0 and obj["analyzer_kind"] == "linear" and obj["extra_noise_units"] == 0
    code, out, _ = run(capsys, "plan", "--model", model, "--length", 0.5)
    assert json.loads(out)["extra_noise_units"] == 1
    code, out, _ = run(capsys, "plan", "--model", '{"variant": "StandardRandom", "params": {}}', "--length", 5)
    assert json.loads(out)["extra_noise_units"] == 2
    assert run(capsys, "penalty", "--observables", 3)[1].strip() == "2"
    assert float(run(capsys, "beat-length", "--bm", 1e-6)[1]) == pytest.approx(0.808)


@pytest.mark.parametrize("argv, code", [
    (["pipeline", "--input", "/nonexistent.csv", "--length", 1, "--prior-cb", 1e-7, "--prior-lb", 0, "--seed", 1], 2),
    (["simulate", "--model", '{"variant": "Bogus"}', "--input", "H", "--length", 1, "--dz", 0.5], 2),
    (["simulate", "--model", "{not json", "--input", "H", "--length", 1, "--dz", 0.5], 2),
    (["simulate", "--model", TWISTED, "--input", "H", "--length", -1, "--dz", 0.5], 3),
    (["beat-length", "--bm", 0], 3),
    (["penalty", "--observables", 5], 3),
])
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_ill_posed_exit_code_names_stage(tmp_path, capsys):
    rows = (GOLDEN / "fixture_small.csv").read_text().splitlines()
    keep = [rows[0]] + [r for r in rows[1:] if r[0] in "HV"]
    p = tmp_path / "hv.csv"
    p.write_text("\n".join(keep) + "\n")
    code, _, err = run(capsys, "pipeline", "--input", p, "--length", 0.8, "--prior-cb", 8e-7,
                       "--prior-lb", 1e-7, "--seed", 1)
    assert code == 4 and "[retrieval]" in err


def test_ambiguous_prior_exit_code(capsys):
    # wrapped circular retardance is about 1.31 rad; a prior of 6 pi rad sits midway
    # between the branches 6 pi - 1.31 and 6 pi + 1.31, both within 10 % of it
    prior = 6 * np.pi * 808e-9 / (2 * np.pi * 0.8)
    code, _, err = run(capsys, "pipeline", "--input", data_path("twisted_pcf_fixture.csv"), "--length", 0.8,
                       "--prior-cb", prior, "--prior-lb", 1e-7, "--seed", 1, "--resamples", 0)
    assert code == 4 and "[unwrapping]" in err


def test_argparse_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == 2


def test_plot_flags_write_png(tmp_path, capsys):
    traj_png, ens_png, rep_png = tmp_path / "t.png", tmp_path / "e.png", tmp_path / "r.png"
    run(capsys, "simulate", "--model", TWISTED, "--input", "D", "--length", 1.0, "--dz", 0.1,
        "--out", tmp_path / "t.csv", "--plot", traj_png)
    run(capsys, "ensemble", "--model", '{"variant": "StandardRandom", "params": {}}', "--n", 200,
        "--length", 20, "--seed", 1, "--out", tmp_path / "e.json", "--plot", ens_png)
    run(capsys, "pipeline", "--input", data_path("twisted_pcf_fixture.csv"), "--length", 0.8,
        "--prior-cb", 8e-7, "--prior-lb", 1e-7, "--seed", 1, "--resamples", 100,
        "--out", tmp_path / "r.json", "--plot", rep_png)
    for p in (traj_png, ens_png, rep_png):
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_model_schema_accepts_cli_models():
    for text in (TWISTED, '{"variant": "StandardRandom", "params": {"seed": 3}}'):
        validate(json.loads(text), "model")
    with pytest.raises(jsonschema.ValidationError):
        validate({"variant": "Other", "params": {}}, "model")
