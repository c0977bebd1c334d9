import io
import json
import math

import pytest

from solve import RunConfig, main, parse_args, run


def execute(config):
    stdout, stderr = io.StringIO(), io.StringIO()
    status = run(config, stdout=stdout, stderr=stderr)
    return status, stdout.getvalue(), stderr.getvalue()


def evaluate_config(**overrides):
    settings = dict(command="evaluate", zoo="linear_uniform", menu="[[1, 0.5]]", timing=False)
    settings.update(overrides)
    return RunConfig(**settings)


class TestParseArgs:

    def test_flags(self):
        config = parse_args(["evaluate", "--zoo", "piecewise_gap", "--params", '{"H": 4.0}', "--menu", "[[1, 0.5]]",
                             "--no-timing", "--H", "2,3", "--k", "2", "--format", "csv"])
        assert config.command == "evaluate"
        assert config.params == {"H": 4.0}
        assert config.menu == "[[1, 0.5]]"
        assert config.timing is False
        assert config.H == (2.0, 3.0)
        assert config.k == 2
        assert config.format == "csv"

    def test_defaults(self):
        config = parse_args(["gap-demo"])
        assert config.eps == 0.05
        assert config.k is None
        assert config.H == (math.e ** 2, math.e ** 4, math.e ** 6)
        assert config.timing

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            parse_args(["optimize"])


class TestEvaluate:

    def test_report(self):
        status, out, _ = execute(evaluate_config())
        assert status == 0
        report = json.loads(out)
        assert report["schema"] == 1
        assert report["command"] == "evaluate"
        assert report["instance"]["name"] == "linear_uniform"
        assert report["result"]["revenue"] == pytest.approx(0.25, abs=1e-8)
        assert report["result"]["buyer_surplus"] == pytest.approx(0.125, abs=1e-8)
        assert "wall_ms" not in report

    def test_deterministic_without_timing(self):
        assert execute(evaluate_config())[1] == execute(evaluate_config())[1]

    def test_timing(self):
        report = json.loads(execute(evaluate_config(timing=True))[1])
        assert report["wall_ms"] >= 0

    def test_csv(self):
        status, out, _ = execute(evaluate_config(format="csv"))
        assert status == 0
        lines = out.splitlines()
        assert lines[0] == "theta_from,theta_to,quality,price,mass"
        assert len(lines) == 3

    def test_menu_file_and_out(self, tmp_path):
        menu_path = tmp_path / "menu.json"
        menu_path.write_text("[[0.5, 0.1], [1.0, 0.5]]")
        out_path = tmp_path / "report.json"
        status, out, _ = execute(evaluate_config(menu=str(menu_path), out=str(out_path)))
        assert status == 0
        assert out == ""
        report = json.loads(out_path.read_text())
        assert report["result"]["menu"] == [[0.0, 0.0], [0.5, 0.1], [1.0, 0.5]]

    def test_instance_file(self, tmp_path):
        path = tmp_path / "instance.json"
        status, out, _ = execute(RunConfig(command="validate", zoo="piecewise_gap", params={"H": 3.0},
                                           timing=False))
        assert status == 0
        path.write_text(json.dumps(json.loads(out)["instance"]))
        status, out, _ = execute(evaluate_config(zoo=None, instance=str(path), menu="[[3, 1.5]]"))
        assert status == 0
        assert json.loads(out)["instance"]["params"] == {"H": 3.0}


class TestErrors:

    def test_pricing_instance_cannot_be_simulated(self):
        status, out, err = execute(evaluate_config(command="simulate"))
        assert status == 1
        assert out == ""
        assert json.loads(err)["error"] == "DomainError"

    def test_bad_eps(self):
        assert execute(evaluate_config(eps=1.5))[0] == 1

    def test_missing_menu(self):
        status, _, err = execute(evaluate_config(menu=None))
        assert status == 1
        assert "--menu" in json.loads(err)["message"]

    def test_bad_menu_json(self):
        assert execute(evaluate_config(menu="[[1, "))[0] == 1

    def test_missing_instance(self):
        assert execute(evaluate_config(zoo=None))[0] == 1

    @pytest.mark.parametrize("menu", ["[[1]]", "[[1, \"cheap\"]]", "5", "{\"q\": 1}"])
    def test_malformed_menu_pairs(self, menu):
        status, out, err = execute(evaluate_config(menu=menu))
        assert status == 1
        assert out == ""
        assert json.loads(err)["error"] == "DomainError"

    def test_absent_instance_file(self, tmp_path):
        status, _, err = execute(evaluate_config(zoo=None, instance=str(tmp_path / "absent.json")))
        assert status == 1
        assert json.loads(err)["error"] == "DomainError"

    def test_instance_file_that_is_not_json(self, tmp_path):
        path = tmp_path / "instance.json"
        path.write_text("name: linear_uniform")
        assert execute(evaluate_config(zoo=None, instance=str(path)))[0] == 1

    @pytest.mark.parametrize("argv", [["evaluate", "--zoo", "linear_uniform", "--params", "notjson"],
                                      ["evaluate", "--zoo", "linear_uniform", "--params", "[1]"],
                                      ["gap-demo", "--H", "2,lots"]])
    def test_bad_flags_give_a_record(self, argv):
        stderr = io.StringIO()
        assert main(argv, stderr=stderr) == 1
        assert json.loads(stderr.getvalue())["error"] == "DomainError"

    def test_oracle_over_budget(self):
        config = RunConfig(command="oracle", zoo="linear_uniform", eps=0.04, k=3, n_types=20, timing=False)
        status, _, err = execute(config)
        assert status == 2
        record = json.loads(err)
        assert record["error"] == "ResourceError"
        assert record["required"] > record["budget"]


class TestCommands:

    def test_oracle_agrees_with_dp(self):
        config = RunConfig(command="oracle", zoo="linear_uniform", eps=0.2, k=1, n_types=10, timing=False)
        status, out, _ = execute(config)
        assert status == 0
        result = json.loads(out)["result"]
        assert result["agree"] is True
        assert result["dp_value"] == pytest.approx(result["value"], abs=1e-12)

    def test_validate_economy(self):
        status, out, _ = execute(RunConfig(command="validate", zoo="quadratic_screening", timing=False))
        assert status == 0
        result = json.loads(out)["result"]
        assert result["kind"] == "economy"
        assert result["economy"]["passed"]
        assert result["pricing"]["passed"]

    def test_solve_revenue(self):
        config = RunConfig(command="solve-revenue", zoo="linear_uniform", eps=0.2, k=1, n_types=50, timing=False)
        status, out, _ = execute(config)
        assert status == 0
        result = json.loads(out)["result"]
        assert len(result["menu"]) == 2
        assert 0.15 < result["revenue"] <= 0.25
        assert "wall_ms" not in result["diagnostics"]

    def test_solve_welfare_dense(self):
        config = RunConfig(command="solve-welfare", zoo="linear_uniform", method="dense", n_grid=10, timing=False)
        status, out, _ = execute(config)
        assert status == 0
        result = json.loads(out)["result"]
        assert result["welfare"] == pytest.approx(0.5, abs=1e-6)
        assert result["first_best_welfare"] == pytest.approx(0.5, abs=1e-6)

    def test_simulate(self):
        config = RunConfig(command="simulate", zoo="quadratic_screening", menu="[[0.5, 0.05]]", timing=False)
        status, out, _ = execute(config)
        assert status == 0
        game = json.loads(out)["result"]["game"]
        assert [q for q, _ in game["consumer_prices"]] == [0.0, 0.5]

    def test_gap_demo(self):
        config = RunConfig(command="gap-demo", H=(2.0,), eps=0.2, n_types=50, timing=False)
        status, out, _ = execute(config)
        assert status == 0
        report = json.loads(out)
        assert report["instance"] is None
        (row,) = report["result"]["rows"]
        assert row["rich_menu_expected"] == pytest.approx((1.0 + math.log(2.0)) / 2.0)
        assert row["dp_revenue"] is None
