import csv
import io
import json
import math

import jsonschema
import pytest

from bellcal import cli
from bellcal.report import ExperimentReport, load_schema

SQ = 1 / math.sqrt(2)


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr().out


def as_json(capsys, *argv):
    code, out = run_cli(capsys, *argv, "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, load_schema())
    return code, doc


def records(doc, kind):
    return [r for r in doc["results"] if r.get("kind") == kind]


def numeric_leaves(value, prefix=""):
    """Flatten JSON into {dotted.key: float} for numeric leaves."""
    out = {}
    if isinstance(value, dict):
        for k, v in value.items():
            out.update(numeric_leaves(v, f"{prefix}.{k}" if prefix else k))
    elif isinstance(value, list):
        for i, v in enumerate(value):
            out.update(numeric_leaves(v, f"{prefix}.{i}" if prefix else str(i)))
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        out[prefix] = float(value)
    return out


def csv_numbers(text):
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["experiment", "record", "field", "value"]
    out = {}
    for _, record, fld, value in rows[1:]:
        try:
            out[f"{record}.{fld}"] = float(value)
        except ValueError:
            pass
    return out


class TestBellState:
    def test_v(self, capsys):
        code, doc = as_json(capsys, "bell-state", "--config", "V")
        assert code == 0 and doc["pass"]
        amps = {tuple(r["index"]): r["value"] for r in records(doc, "amplitude")}
        assert amps[(0, 0)]["im"] == pytest.approx(SQ) and amps[(1, 1)]["im"] == pytest.approx(SQ)
        assert amps[(0, 1)] == {"re": 0.0, "im": 0.0}
        assert records(doc, "schmidt_rank")[0]["value"] == 2
        tags = [r["tags"] for r in records(doc, "amplitude") if "tags" in r]
        assert {"a": "S1-red-V", "b": "S2-blue-V"} in tags
        assert [r["element"] for r in records(doc, "trace")][-1] == "output"

    def test_h(self, capsys):
        code, doc = as_json(capsys, "bell-state", "--config", "H")
        assert code == 0
        amps = {tuple(r["index"]): abs(complex(r["value"]["re"], r["value"]["im"]))
                for r in records(doc, "amplitude")}
        assert amps == pytest.approx({(0, 0): 0, (0, 1): SQ, (1, 0): SQ, (1, 1): 0})
        assert records(doc, "schmidt_rank")[0]["value"] == 2

    def test_csv_matches_json(self, capsys):
        _, doc = as_json(capsys, "bell-state")
        _, text = run_cli(capsys, "bell-state", "--format", "csv")
        from_json = {("parameters." + k if not k[0].isdigit() else k): v
                     for k, v in numeric_leaves(doc["results"]).items()}
        assert csv_numbers(text) == pytest.approx(from_json)

    def test_bad_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["bell-state", "--config", "D"])
        assert exc.value.code == 2


class TestChshScan:
    def test_explicit_settings(self, capsys):
        code, doc = as_json(capsys, "chsh-scan", "bell-V", "--settings",
                            "0,0.7853981634,1.5707963268,-0.7853981634")
        assert code == 0
        res = records(doc, "chsh")[0]
        assert res["s_value"] == pytest.approx(2 * math.sqrt(2), abs=1e-9)
        assert res["violates_bound"]
        assert len(records(doc, "correlation")) == 4
        assert len(records(doc, "lattice")) == 16 * 16

    def test_degrees(self, capsys):
        _, doc = as_json(capsys, "chsh-scan", "bell-V", "--settings", "0,45,90,-45", "--degrees")
        assert records(doc, "chsh")[0]["s_value"] == pytest.approx(2 * math.sqrt(2), abs=1e-12)

    def test_product_grid(self, capsys):
        code, doc = as_json(capsys, "chsh-scan", "product",
                            "0.7853981634,0,0.7853981634,0", "--grid", "8")
        assert code == 0
        assert records(doc, "chsh")[0]["abs_s"] <= 2 + 1e-6
        assert doc["parameters"]["schmidt_rank"] == 1

    def test_grid_refinement_non_decreasing(self, capsys):
        _, coarse = as_json(capsys, "chsh-scan", "bell-V", "--grid", "4")
        _, fine = as_json(capsys, "chsh-scan", "bell-V", "--grid", "16")
        assert records(fine, "grid")[0]["max_abs_s"] >= records(coarse, "grid")[0]["max_abs_s"]
        assert records(fine, "chsh")[0]["abs_s"] >= records(coarse, "chsh")[0]["abs_s"] - 1e-9

    def test_csv_matches_json(self, capsys):
        argv = ("chsh-scan", "bell-H", "--grid", "4")
        _, doc = as_json(capsys, *argv)
        _, text = run_cli(capsys, *argv, "--format", "csv")
        nums = csv_numbers(text)
        for k, v in numeric_leaves(doc["results"]).items():
            assert nums[k] == v
        for k, v in numeric_leaves(doc["parameters"]).items():
            assert nums[f"parameters.{k}"] == v

    @pytest.mark.parametrize("argv", [
        ["chsh-scan", "bell-X"],
        ["chsh-scan", "product"],
        ["chsh-scan", "product", "1,2,3"],
        ["chsh-scan", "product", "a,b,c,d"],
        ["chsh-scan", "bell-V", "0,0,0,0"],
        ["chsh-scan", "bell-V", "--grid", "3"],
        ["chsh-scan", "bell-V", "--settings", "0,0", ],
        ["chsh-scan", "bell-V", "--settings", "0,0,0,0", "--grid", "8"],
    ])
    def test_usage_errors(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == 2


class TestThermalVerify:
    def test_small_run_is_complete_and_deterministic(self, capsys):
        code, first = run_cli(capsys, "thermal-verify", "--n", "100", "--seed", "3")
        _, second = run_cli(capsys, "thermal-verify", "--n", "100", "--seed", "3")
        assert first == second
        doc = json.loads(first)
        jsonschema.validate(doc, load_schema())
        assert len(doc["results"]) == 11
        assert code == (0 if doc["pass"] else 1)
        for r in doc["results"]:
            assert set(r) >= {"name", "value", "std_error", "sigma_distance", "pass"}

    def test_workers_do_not_change_report(self, capsys):
        _, one = run_cli(capsys, "thermal-verify", "--n", "200000", "--seed", "9")
        _, many = run_cli(capsys, "thermal-verify", "--n", "200000", "--seed", "9",
                          "--workers", "4")
        assert one == many
        assert json.loads(one)["pass"]

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv(cli.SEED_ENV, "5")
        _, doc = as_json(capsys, "thermal-verify", "--n", "100")
        assert doc["parameters"]["seed"] == 5
        _, doc = as_json(capsys, "thermal-verify", "--n", "100", "--seed", "6")
        assert doc["parameters"]["seed"] == 6
        monkeypatch.delenv(cli.SEED_ENV)
        _, doc = as_json(capsys, "thermal-verify", "--n", "100")
        assert doc["parameters"]["seed"] == cli.DEFAULT_SEED

    def test_bad_env_seed(self, monkeypatch):
        monkeypatch.setenv(cli.SEED_ENV, "x")
        with pytest.raises(SystemExit) as exc:
            cli.main(["thermal-verify", "--n", "100"])
        assert exc.value.code == 2

    def test_too_few_samples(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["thermal-verify", "--n", "99"])
        assert exc.value.code == 2


class TestProductBound:
    def test_seeded_audit(self, capsys):
        code, doc = as_json(capsys, "product-bound", "--draws", "100", "--grid", "8",
                            "--seed", "7")
        assert code == 0 and doc["pass"]
        assert len(records(doc, "draw")) == 100
        assert records(doc, "summary")[0]["global_max_abs_s"] <= 2 + 1e-6
        assert records(doc, "probe")[0]["max_abs_s"] == pytest.approx(2, abs=1e-4)

    def test_single_draw(self, capsys):
        _, doc = as_json(capsys, "product-bound", "--draws", "1")
        assert len(records(doc, "draw")) == 1

    def test_deterministic(self, capsys):
        argv = ("product-bound", "--draws", "3", "--grid", "6", "--seed", "1")
        assert run_cli(capsys, *argv) == run_cli(capsys, *argv)

    def test_zero_draws(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["product-bound", "--draws", "0"])
        assert exc.value.code == 2


def test_exit_code_one_on_failed_check(monkeypatch, capsys):
    failing = ExperimentReport("product-bound", {}, [], {"bound": False})
    monkeypatch.setattr(cli, "run", lambda args: failing)
    code, out = run_cli(capsys, "product-bound")
    assert code == 1
    assert json.loads(out)["pass"] is False


def test_out_file(tmp_path, capsys):
    target = tmp_path / "r.json"
    code, out = run_cli(capsys, "bell-state", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["experiment"] == "bell-state"


def test_missing_command():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2


class TestReport:
    def test_round_trip(self, capsys):
        _, doc = as_json(capsys, "chsh-scan", "bell-V", "--grid", "4")
        rep = ExperimentReport.from_dict(doc)
        assert rep.to_dict() == doc
        assert ExperimentReport.from_json(rep.to_json()).to_dict() == doc

    def test_complex_encoding(self):
        doc = ExperimentReport("bell-state", {"z": 1 - 2j}, [], {}).to_dict()
        assert doc["parameters"]["z"] == {"re": 1.0, "im": -2.0}
        assert doc["pass"] is True

    def test_schema_rejects_bad_documents(self):
        schema = load_schema()
        good = ExperimentReport("bell-state", {}, [{"kind": "x"}], {"ok": True}).to_dict()
        jsonschema.validate(good, schema)
        for broken in ({**good, "schema_version": 2}, {**good, "experiment": "other"},
                       {k: v for k, v in good.items() if k != "pass"}):
            with pytest.raises(jsonschema.ValidationError):
                jsonschema.validate(broken, schema)

    def test_unsupported_version(self):
        with pytest.raises(ValueError):
            ExperimentReport.from_dict({"schema_version": 7})

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            ExperimentReport("bell-state").render("xml")

    def test_nan_refused(self):
        with pytest.raises(ValueError):
            ExperimentReport("bell-state", {"x": float("nan")}).to_json()
