from __future__ import annotations

import io
import json

import pytest

from algtt.cli import (
    Report,
    ScenarioError,
    bundled_scenarios,
    emit_report,
    eval_expression,
    load_scenario,
    main,
    run_scenario,
    run_scenario_data,
)
from algtt.mlalg import nat_algebra


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def strip_duration(payload):
    payload = dict(payload)
    payload.pop("duration_s")
    return payload


def test_bundled_list():
    names = bundled_scenarios()
    assert "nat-mlalg.json" in names and "scenario.schema.json" not in names


@pytest.mark.parametrize(
    "name", ["nat-mlalg.json", "omega-arrow.json", "hs-arrow.json", "hs-kappa3.json", "golden-types.json", "empty.json"]
)
def test_bundled_scenarios_pass(name):
    report = run_scenario(name)
    assert report.status == "pass", emit_report(report)
    assert report.exit_code == 0


def test_sabotaged_scenario_reports_witness():
    report = run_scenario("nat-sabotaged.json")
    assert report.exit_code == 1
    failing = [c for c in report.checks if c.status == "fail"]
    assert failing
    assert failing[0].to_json()["witness"] == [0, []]


def test_kappa3_marks_sigma_pi_not_applicable():
    report = run_scenario("hs-kappa3.json")
    statuses = {p.name: p.status for c in report.checks for p in c.parts}
    assert "not-applicable" in statuses.values()


def test_empty_scenario_has_zero_counters():
    report = run_scenario("empty.json")
    assert report.counters() == {"checks": 0, "fibers_checked": 0, "elements_checked": 0}
    assert "(no checks)" in emit_report(report)


def test_json_is_reproducible():
    a = json.loads(emit_report(run_scenario("nat-mlalg.json"), "json"))
    b = json.loads(emit_report(run_scenario("nat-mlalg.json"), "json"))
    assert strip_duration(a) == strip_duration(b)
    assert a["duration_s"] >= 0
    assert list(a) == sorted(a)


def test_seed_recorded_only_for_randomized_checks():
    assert run_scenario("nat-mlalg.json", seed=5).seed is None
    report = run_scenario("nat-typeiso.json", seed=7)
    assert report.seed == 7 and report.status == "pass"


def test_unknown_format():
    with pytest.raises(ValueError):
        emit_report(Report("x", []), "yaml")


def test_schema_violation(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(load_scenario("empty.json") | {"target": {"kind": "nat"}}))
    with pytest.raises(ScenarioError):
        load_scenario(path)


def test_run_validated_data():
    assert run_scenario_data(load_scenario("golden-types.json")).status == "pass"


def test_mismatched_target_kind(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "bad", "target": {"kind": "nat", "bound": 10}, "checks": [{"check": "hs-omega-iso"}]}))
    with pytest.raises(ScenarioError):
        run_scenario(path)


def test_out_of_bound_is_a_failure():
    report = run_scenario("nat-mlalg.json", bound=3)
    assert report.status == "fail"


def test_eval_expression_table():
    table = eval_expression("Fin y", "x : Fin 3, y : Fin x", nat_algebra(64))
    # environment entries are fiber points (size of the type, index)
    assert table == {((3, 1), (1, 0)): 0, ((3, 2), (2, 0)): 0, ((3, 2), (2, 1)): 1}


class TestMain:
    def test_verify_text(self, capsys):
        code, out, _ = run(capsys, "verify", "nat-mlalg.json")
        assert code == 0 and "PASS" in out

    def test_verify_json_failure(self, capsys):
        code, out, _ = run(capsys, "verify", "nat-sabotaged.json", "--format", "json")
        assert code == 1 and json.loads(out)["status"] == "fail"

    def test_verify_several(self, capsys):
        code, out, _ = run(capsys, "verify", "empty.json", "nat-sabotaged.json", "--format", "json")
        assert code == 1 and len(json.loads(out)) == 2

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "verify", "does-not-exist.json")
        assert code == 2 and err

    def test_malformed_json(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert run(capsys, "verify", str(path))[0] == 2

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["verify"])
        assert info.value.code == 2

    def test_poly_compose(self, capsys):
        code, out, _ = run(capsys, "poly", "compose", "--p", "0,1,2", "--q", "1,2", "--format", "json")
        assert code == 0 and json.loads(out)

    def test_poly_compose_random(self, capsys):
        code, _, _ = run(capsys, "poly", "compose", "--random", "3", "--seed", "1", "--sizes", "0,1,2")
        assert code == 0

    def test_poly_compose_needs_signatures(self, capsys):
        assert run(capsys, "poly", "compose")[0] == 2

    def test_presheaf_omega(self, capsys):
        code, out, _ = run(capsys, "presheaf", "omega", "--category", "arrow", "--verify", "--format", "json")
        assert code == 0 and out

    def test_universe_nerve(self, capsys):
        for kappa in ("2", "3"):
            code, out, _ = run(capsys, "universe", "nerve", "--kappa", kappa)
            assert code == 0 and out

    def test_equiv_fibers(self, capsys):
        code, out, _ = run(capsys, "equiv", "fibers", "--max-n", "3", "--format", "json")
        assert code == 0 and out

    def test_tt_eval_arguments(self, capsys):
        code, out, _ = run(capsys, "tt", "eval", "Pi (x : Fin 3) . Fin 2", "Sigma (x : Fin 3) . Fin x")
        assert code == 0 and out.split() == ["8", "3"]

    def test_tt_eval_stdin(self, capsys, monkeypatch):
        monkeypatch.setattr("sys.stdin", io.StringIO("Id(Fin 2, 0, 1)\n\nUnit\n"))
        code, out, _ = run(capsys, "tt", "eval")
        assert code == 0 and out.split() == ["0", "1"]

    def test_tt_eval_with_context_json(self, capsys):
        code, out, _ = run(capsys, "tt", "eval", "Fin x", "--context", "x : Fin 2", "--format", "json")
        assert code == 0
        assert json.loads(out)[0]["table"] == [{"env": [[2, 0]], "cardinal": 0}, {"env": [[2, 1]], "cardinal": 1}]

    def test_tt_eval_parse_error(self, capsys):
        code, _, err = run(capsys, "tt", "eval", "Pi (x : Fin")
        assert code == 2 and "1" in err
