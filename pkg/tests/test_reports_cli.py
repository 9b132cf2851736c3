"""Report schema round trips and the command-line surface."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from slplab.cli import main
from slplab.reports import Report, emit_report, parse_report, render_report


# ------------------------------------------------------------------- reports

def test_report_round_trip_through_text():
    report = Report(check="demo", passed=True, max_deviation=0.25,
                    details={"worst": [1, 2, 3], "label": "x"},
                    provenance={"seed": 7})
    assert parse_report(render_report(report)) == report


def test_report_round_trip_through_file(tmp_path):
    report = Report(check="demo", passed=False, max_deviation=1.5,
                    details={"note": "failing on purpose"})
    path = tmp_path / "report.json"
    emit_report(report, path)
    assert parse_report(path) == report


def test_render_is_deterministic_and_newline_terminated():
    report = Report(check="demo", passed=True, details={"b": 1, "a": 2})
    text = render_report(report)
    assert text == render_report(report)
    assert text.endswith("\n")
    doc = json.loads(text)
    assert list(doc) == sorted(doc)
    assert doc["pass"] is True  # serialized key is "pass"


def test_provenance_omitted_when_absent():
    doc = json.loads(render_report(Report(check="demo", passed=True)))
    assert "provenance" not in doc
    with_prov = Report(check="demo", passed=True, provenance={"seed": 0})
    assert json.loads(render_report(with_prov))["provenance"] == {"seed": 0}


def test_nan_and_inf_rejected_anywhere():
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(ValueError, match="details.x"):
            render_report(Report(check="demo", passed=True,
                                 details={"x": bad}))
        with pytest.raises(ValueError, match=r"deep\[1\]"):
            render_report(Report(check="demo", passed=True,
                                 details={"deep": [0.0, bad]}))
        with pytest.raises(ValueError):
            render_report(Report(check="demo", passed=True,
                                 max_deviation=bad))


def test_emit_failure_is_wrapped(tmp_path):
    report = Report(check="demo", passed=True)
    with pytest.raises(OSError, match="failed writing report"):
        emit_report(report, tmp_path / "missing_dir" / "report.json")


# ----------------------------------------------------------- CLI exit status

def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_passing_check_exits_zero_and_prints_report(capsys):
    code, out, _ = run_cli(capsys, "relalg-laws", "--entities", "3",
                           "--exhaustive", "--pairs", "50", "--triples", "20")
    assert code == 0
    report = parse_report(out)
    assert report.check == "relalg_laws" and report.passed
    assert report.details["unary_relations_checked"] == 512
    assert report.provenance["seed"] == 0
    assert set(report.provenance) == {"config_hash", "seed", "version"}


def test_failing_check_exits_one_but_still_reports(capsys, tmp_path):
    store = tmp_path / "map.json"
    code, _, _ = run_cli(capsys, "build-slp", "--entities", "3",
                         "--relations", "1", "--seed", "3",
                         "--save", str(store))
    assert code == 0
    doc = json.loads(store.read_text())
    doc["matrix"][0] = [x + 0.5 for x in doc["matrix"][0]]
    store.write_text(json.dumps(doc))
    out_path = tmp_path / "verify.json"
    code, _, _ = run_cli(capsys, "verify-slp", "--load", str(store),
                         "--out", str(out_path))
    assert code == 1
    report = parse_report(out_path)
    assert not report.passed
    assert report.max_deviation > 0.1


def test_usage_errors_exit_two_without_reports(capsys, tmp_path):
    out_path = tmp_path / "never.json"
    cases = [
        ("no-such-command",),
        ("relalg-laws", "--no-such-flag"),
        ("gradlab",),                                  # --config required
        ("verify-slp",),                               # --load required
        ("isotypic", "--entities", "6", "--out", str(out_path)),
        ("audit", "--family", "99", "--out", str(out_path)),
    ]
    for argv in cases:
        code = main(list(argv))
        capsys.readouterr()
        assert code == 2, argv
        assert not out_path.exists(), argv


def test_version_flag(capsys):
    code, out, _ = run_cli(capsys, "--version")
    assert code == 0
    assert out.strip()


# ------------------------------------------------------------ seed resolution

def test_seed_falls_back_to_environment(capsys, monkeypatch):
    monkeypatch.setenv("SLPLAB_SEED", "42")
    code, out, _ = run_cli(capsys, "families", "--entities", "3",
                           "--relations", "1")
    assert code == 0
    assert parse_report(out).provenance["seed"] == 42


def test_explicit_seed_beats_environment(capsys, monkeypatch):
    monkeypatch.setenv("SLPLAB_SEED", "42")
    code, out, _ = run_cli(capsys, "families", "--entities", "3",
                           "--relations", "1", "--seed", "5")
    assert code == 0
    assert parse_report(out).provenance["seed"] == 5


def test_garbage_environment_seed_is_a_usage_error(capsys, monkeypatch):
    monkeypatch.setenv("SLPLAB_SEED", "not-a-number")
    code, _, err = run_cli(capsys, "families", "--entities", "3",
                           "--relations", "1")
    assert code == 2
    assert "SLPLAB_SEED" in err


def test_same_seed_gives_byte_identical_reports(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["factorize", "--entities", "3", "--relations", "1", "--seed", "9"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    other = tmp_path / "c.json"
    assert main(argv[:-1] + ["10", "--out", str(other)]) == 0
    capsys.readouterr()
    assert a.read_bytes() != other.read_bytes()


# ------------------------------------------------------------- subcommands

def test_families_prints_partition_when_report_goes_to_file(capsys, tmp_path):
    out_path = tmp_path / "families.json"
    code, out, _ = run_cli(capsys, "families", "--entities", "3",
                           "--relations", "1", "--seed", "0",
                           "--out", str(out_path))
    assert code == 0
    partition = json.loads(out)
    report = parse_report(out_path)
    assert report.details["families"] == partition
    assert report.details["n_families"] == len(partition)
    for family in partition:
        members = [m["query"] for m in family["members"]]
        assert family["representative"] in members
        signs = {m["sign"] for m in family["members"]}
        assert signs == {1, -1}
    total = sum(len(f["members"]) for f in partition)
    assert total == report.details["n_queries"]


def test_build_then_verify_round_trip(capsys, tmp_path):
    for fmt in ("json", "csv"):
        store = tmp_path / f"map.{fmt}"
        code, out, _ = run_cli(capsys, "build-slp", "--entities", "3",
                               "--relations", "1", "--seed", "1",
                               "--fmt", fmt, "--save", str(store))
        assert code == 0
        built = parse_report(out)
        assert built.details["equivariance"]["max_deviation"] == 0.0
        code, out, _ = run_cli(capsys, "verify-slp", "--load", str(store),
                               "--fmt", fmt)
        assert code == 0
        verified = parse_report(out)
        assert verified.details["slp_rank"]["pass"] is True
        assert verified.details["kernel_decomposition"]["pass"] is True


def test_factorize_reports_pure_minus_split(capsys):
    code, out, _ = run_cli(capsys, "factorize", "--entities", "3",
                           "--relations", "1", "--seed", "2")
    assert code == 0
    report = parse_report(out)
    split = report.details["negation_split"]
    assert split["plus_dim"] == 0
    assert split["minus_dim"] == split["span_dim"] > 0


def test_isotypic_image_dims_fill_the_span(capsys):
    code, out, _ = run_cli(capsys, "isotypic", "--entities", "3",
                           "--relations", "1", "--seed", "0")
    assert code == 0
    report = parse_report(out)
    dims = [entry["image_dim"] for entry in report.details["irreps"]]
    assert sum(dims) == report.details["properties"]["span_dim"]
    assert report.max_deviation <= 1e-8


def test_parity_cross_residual_is_zero_for_builds(capsys):
    code, out, _ = run_cli(capsys, "parity", "--entities", "3",
                           "--relations", "1", "--seed", "4")
    assert code == 0
    report = parse_report(out)
    assert report.max_deviation == 0.0
    n = 3
    assert report.details["pair_space_dims"] == \
        [n * (n + 1) // 2, n * (n - 1) // 2]


def test_kernel_stability_and_fit_bilinear(capsys):
    for cmd in ("kernel-stability", "fit-bilinear"):
        code, out, _ = run_cli(capsys, cmd, "--atoms", "2", "--worlds", "4",
                               "--seed", "0")
        assert code == 0, cmd
        report = parse_report(out)
        assert report.passed


def test_collapse_unit_atom_certificate(capsys):
    code, out, _ = run_cli(capsys, "collapse", "--atoms", "1", "--dim", "4",
                           "--seed", "7")
    assert code == 0
    report = parse_report(out)
    assert report.details["verdict"] == "infeasible"
    assert abs(report.details["residual_sq"] - 2.0) <= 1e-6
    code, out, _ = run_cli(capsys, "collapse", "--atoms", "1", "--dim", "4",
                           "--seed", "7", "--no-neg-equiv")
    assert code == 0
    assert parse_report(out).details["verdict"] == "feasible"


def test_audit_subcommand_runs(capsys):
    code, out, _ = run_cli(capsys, "audit", "--entities", "3",
                           "--relations", "1", "--family", "1",
                           "--eta", "0.2", "--seed", "0")
    assert code == 0
    assert parse_report(out).passed


# ------------------------------------------------------------------ gradlab

def write_config(tmp_path, **overrides):
    config = {"entity_count": 3, "relations": 1, "density": 0.5,
              "arch": "slp_linear", "hidden": 9, "epochs": 5, "lr": 0.1,
              "eta": 0.1, "block": "all"}
    config.update(overrides)
    config = {k: v for k, v in config.items() if v is not ...}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_gradlab_slp_linear_is_exactly_antialigned(capsys, tmp_path):
    # hidden doubles as the context width; 9 matches the family count here
    config = write_config(tmp_path, hidden=9)
    histogram = tmp_path / "hist.csv"
    code, out, _ = run_cli(capsys, "gradlab", "--config", str(config),
                           "--seed", "0", "--histogram", str(histogram))
    assert code == 0
    report = parse_report(out)
    assert report.details["alignment"]["mean"] == -1.0
    assert report.details["alignment"]["excluded"] == 0
    neg = report.details["edit_step"]["exact"]["neg"]
    base = report.details["edit_step"]["exact"]["id"]
    assert neg == -base
    lines = histogram.read_text().strip().split("\n")
    assert lines[0] == "bin_lo,bin_hi,count"
    assert len(lines) == 41


def test_gradlab_mlp_reports_measurement(capsys, tmp_path):
    config = write_config(tmp_path, arch="mlp", hidden=8, epochs=50,
                          lr=0.5, block="emb")
    code, out, _ = run_cli(capsys, "gradlab", "--config", str(config))
    assert code == 0
    report = parse_report(out)
    assert report.details["accuracy"] >= 0.5
    cosines = report.details["alignment"]["cosines"]
    assert all(-1.0 <= c <= 1.0 for c in cosines)


def test_gradlab_config_validation(capsys, tmp_path):
    bad_cases = [
        write_config(tmp_path, extra_key=1),
        write_config(tmp_path, lr=...),
        write_config(tmp_path, arch="transformer"),
        write_config(tmp_path, block="everything"),
    ]
    for config in bad_cases:
        code = main(["gradlab", "--config", str(config)])
        capsys.readouterr()
        assert code == 2, config.read_text()
    missing = tmp_path / "absent.json"
    assert main(["gradlab", "--config", str(missing)]) == 2
    capsys.readouterr()


def test_gradlab_seed_conflict_rejected(capsys, tmp_path):
    config = write_config(tmp_path, seed=3)
    code = main(["gradlab", "--config", str(config), "--seed", "4"])
    capsys.readouterr()
    assert code == 2
    code, out, _ = run_cli(capsys, "gradlab", "--config", str(config))
    assert code == 0
    assert parse_report(out).provenance["seed"] == 3


def test_gradlab_divergence_reports_failure(capsys, tmp_path):
    config = write_config(tmp_path, arch="mlp", hidden=8, epochs=10, lr=1e307)
    with np.errstate(all="ignore"):
        code, out, _ = run_cli(capsys, "gradlab", "--config", str(config),
                               "--seed", "0")
    assert code == 1
    report = parse_report(out)
    assert "diverged" in report.details["error"]


# ------------------------------------------------------------ real process

def test_module_entry_point_runs_in_a_subprocess(tmp_path):
    out_path = tmp_path / "report.json"
    proc = subprocess.run(
        [sys.executable, "-m", "slplab", "families", "--entities", "2",
         "--relations", "1", "--seed", "0", "--out", str(out_path)],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    report = parse_report(out_path)
    assert report.check == "families" and report.passed
    json.loads(proc.stdout)  # the partition goes to stdout
