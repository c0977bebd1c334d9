import os
import sys
import json
import math
import time
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

from certmenu.choice import segment_outcome
from certmenu.errors import CertMenuError, DomainError
from certmenu.fptas import DEFAULT_TYPES, build_grids, dp_solve, solve_discrete
from certmenu.market import full_game_outcome
from certmenu.model import normalize_menu, validate_economy
from certmenu.oracle import brute_force_optimal, discretize_types
from certmenu.report import build_report, gap_table, render
from certmenu.utils import DEFAULT_TOLERANCES, configure_threads
from certmenu.welfare import first_best_welfare, welfare_dp, welfare_optimal_dense
from certmenu.zoo import load_instance, make_named_instance

logger = logging.getLogger("certmenu")

COMMANDS = ("solve-revenue", "solve-welfare", "evaluate", "simulate", "oracle", "validate", "gap-demo")
DEFAULT_GAP_H = (math.e ** 2, math.e ** 4, math.e ** 6)


@dataclass
class RunConfig:
    command: str
    zoo: Optional[str] = None
    instance: Optional[str] = None
    params: dict = field(default_factory=dict)
    eps: float = 0.05
    k: Optional[int] = None
    objective: str = "revenue"
    out: Optional[str] = None
    format: str = "json"
    seed: int = 42
    threads: Optional[int] = None
    tol_root: Optional[float] = None
    tol_quad: Optional[float] = None
    menu: Optional[str] = None
    H: tuple = DEFAULT_GAP_H
    n_grid: int = 100
    n_types: int = DEFAULT_TYPES
    method: str = "dp"
    timing: bool = True
    verbose: bool = False

    def check(self):
        if self.command not in COMMANDS:
            raise DomainError("Unknown command '{}'".format(self.command))
        if not 0 < self.eps < 1:
            raise DomainError("--eps must lie in (0, 1), got {}".format(self.eps))
        if self.k is not None and self.k < 0:
            raise DomainError("--k must be non-negative, got {}".format(self.k))
        if self.format not in ("json", "csv"):
            raise DomainError("--format must be json or csv, got '{}'".format(self.format))
        return self

    def tolerances(self):
        return DEFAULT_TOLERANCES.with_overrides(root=self.tol_root, quad=self.tol_quad, probe_seed=self.seed)

    def settings(self):
        record = asdict(self)
        for key in ("out", "format", "threads", "timing", "verbose"):
            record.pop(key)
        return record


def parse_menu(text):
    """Menu given inline as JSON pairs or as the path of a JSON file."""
    if text is None:
        raise DomainError("This command needs --menu")
    if os.path.exists(text):
        try:
            with open(text, encoding="utf-8") as handle:
                text = handle.read()
        except (OSError, UnicodeDecodeError) as err:
            raise DomainError("Cannot read menu file: {}".format(err)) from err
    try:
        pairs = json.loads(text)
    except json.JSONDecodeError as err:
        raise DomainError("Menu is not valid JSON: {}".format(err)) from err
    try:
        return [(float(q), float(p)) for q, p in pairs]
    except (TypeError, ValueError) as err:
        raise DomainError("Menu must be a list of [q, p] pairs, got {}".format(json.dumps(pairs))) from err


def parse_params(text):
    try:
        params = json.loads(text)
    except json.JSONDecodeError as err:
        raise DomainError("--params is not valid JSON: {}".format(err)) from err
    if not isinstance(params, dict):
        raise DomainError("--params must be a JSON object, got {}".format(text))
    return params


def parse_H(text):
    try:
        return tuple(float(h) for h in text.split(","))
    except ValueError as err:
        raise DomainError("--H must be comma-separated numbers, got '{}'".format(text)) from err


def load_spec(config):
    if config.instance:
        return load_instance(config.instance)
    if config.zoo:
        return make_named_instance(config.zoo, config.params)
    raise DomainError("Give an instance with --zoo or --instance")


def solve_revenue(config, spec, tol):
    inst = spec.pricing()
    menu, tables, diagnostics = dp_solve(inst, config.eps, config.k, n_types=config.n_types, tol=tol,
                                         progress=config.verbose, timing=config.timing)
    outcome = segment_outcome(inst, menu, tol)
    payload = {"menu": menu.to_list(), "revenue": outcome.revenue, "welfare": outcome.welfare,
               "outcome": outcome.to_dict(), "diagnostics": diagnostics, "grids": tables.grids.to_dict()}
    return payload, outcome.to_frame()


def solve_welfare(config, spec, tol):
    inst = spec.pricing()
    if config.method == "dense":
        menu, _ = welfare_optimal_dense(inst, config.n_grid, tol)
    elif config.method == "dp":
        k = config.k if config.k is not None else int(math.ceil(1.0 / config.eps))
        menu, _ = welfare_dp(inst, config.eps, k, n_types=config.n_types, tol=tol, progress=config.verbose)
    else:
        raise DomainError("--method must be dense or dp, got '{}'".format(config.method))
    outcome = segment_outcome(inst, menu, tol)
    payload = {"menu": menu.to_list(), "welfare": outcome.welfare, "revenue": outcome.revenue,
               "first_best_welfare": first_best_welfare(inst, tol), "outcome": outcome.to_dict()}
    return payload, outcome.to_frame()


def evaluate(config, spec, tol):
    inst = spec.pricing()
    menu = normalize_menu(parse_menu(config.menu), inst.q_max)
    outcome = segment_outcome(inst, menu, tol)
    return {"menu": menu.to_list(), "revenue": outcome.revenue, "welfare": outcome.welfare,
            "buyer_surplus": outcome.buyer_surplus, "outcome": outcome.to_dict()}, outcome.to_frame()


def simulate(config, spec, tol):
    economy = spec.economy()
    menu = normalize_menu(parse_menu(config.menu), economy.q_max)
    game = full_game_outcome(economy, menu, tol=tol)
    return {"menu": menu.to_list(), "game": game.to_dict()}, game.to_frame()


def oracle(config, spec, tol):
    inst = spec.pricing()
    k = 1 if config.k is None else config.k
    grids = build_grids(inst, config.eps, k)
    di = discretize_types(inst, config.n_types, grids.quantity_grid, grids.price_grid)
    menu, value = brute_force_optimal(di, k, config.objective, progress=config.verbose)
    dp = solve_discrete(di, k, config.objective)
    return {"menu": menu.to_list(), "value": value, "dp_value": dp.value, "dp_menu": dp.menu.to_list(),
            "agree": abs(value - dp.value) <= 1e-12}, None


def validate(config, spec, tol):
    # building the spec already raised on failure; report the details
    payload = {"kind": spec.kind}
    if spec.is_economy:
        payload["economy"] = validate_economy(spec.economy(), config.n_grid, tol).to_dict()
    payload["pricing"] = spec.pricing().validate(config.n_grid, tol).to_dict()
    return payload, None


def gap_demo(config, spec, tol):
    frame = gap_table(config.H, eps=config.eps, k=config.k, n_types=config.n_types, tol=tol,
                      progress=config.verbose)
    return {"rows": frame.to_dict(orient="records")}, frame


HANDLERS = {
    "solve-revenue": solve_revenue,
    "solve-welfare": solve_welfare,
    "evaluate": evaluate,
    "simulate": simulate,
    "oracle": oracle,
    "validate": validate,
    "gap-demo": gap_demo,
}


def run(config, stdout=None, stderr=None):
    """
    Execute one command and write its report.
    Returns:
        status: int. 0 on success, otherwise the error's exit code.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    started = time.perf_counter()
    try:
        config.check()
        configure_threads(config.threads)
        tol = config.tolerances()
        spec = None if config.command == "gap-demo" else load_spec(config)
        payload, frame = HANDLERS[config.command](config, spec, tol)
        wall_ms = 1000.0 * (time.perf_counter() - started) if config.timing else None
        report = build_report(config.command, spec, config.settings(), payload, tol, wall_ms)
    except CertMenuError as err:
        logger.error("%s failed: %s", config.command, err)
        stderr.write(json.dumps(err.to_dict(), sort_keys=True) + "\n")
        return err.exit_code

    text = render(report, config.format, frame)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as handle:
            handle.write(text)
        logger.info("Report written to %s", config.out)
    else:
        stdout.write(text)
    return 0


def parse_args(argv=None):
    import argparse

    parser = argparse.ArgumentParser(description="Compute and evaluate certification menus")
    parser.add_argument("command", choices=COMMANDS, help="What to run")
    parser.add_argument("--zoo", type=str, default=None, help="Named instance from the zoo")
    parser.add_argument("--instance", type=str, default=None, help="Path of an instance JSON file")
    parser.add_argument("--params", type=str, default="{}", help="Zoo parameters as a JSON object")
    parser.add_argument("--eps", type=float, default=0.05, help="Grid accuracy in (0, 1)")
    parser.add_argument("--k", type=int, default=None, help="Item limit; unlimited when omitted")
    parser.add_argument("--objective", type=str, default="revenue", choices=("revenue", "welfare"),
                        help="Objective of the oracle search")
    parser.add_argument("--out", type=str, default=None, help="Write the report here instead of stdout")
    parser.add_argument("--format", type=str, default="json", choices=("json", "csv"), help="Report format")
    parser.add_argument("--seed", type=int, default=42, help="Seed of the random cross-check types")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (else CERTMENU_THREADS)")
    parser.add_argument("--tol-root", type=float, default=None, help="Bisection tolerance on types")
    parser.add_argument("--tol-quad", type=float, default=None, help="Quadrature tolerance")
    parser.add_argument("--menu", type=str, default=None, help="Menu as JSON [[q, p], ...] or a file path")
    parser.add_argument("--H", type=str, default=None, help="Comma-separated H values for gap-demo")
    parser.add_argument("--n-grid", type=int, default=100, help="Grid size for validators and dense menus")
    parser.add_argument("--n-types", type=int, default=DEFAULT_TYPES, help="Atoms of the discrete type model")
    parser.add_argument("--method", type=str, default="dp", choices=("dense", "dp"),
                        help="Welfare solver for solve-welfare")
    parser.add_argument("--no-timing", action="store_true", help="Leave wall times out of the report")
    parser.add_argument("--verbose", action="store_true", help="Debug logging and progress bars")
    args = parser.parse_args(argv)

    H = parse_H(args.H) if args.H else DEFAULT_GAP_H
    return RunConfig(command=args.command, zoo=args.zoo, instance=args.instance, params=parse_params(args.params),
                     eps=args.eps, k=args.k, objective=args.objective, out=args.out, format=args.format,
                     seed=args.seed, threads=args.threads, tol_root=args.tol_root, tol_quad=args.tol_quad,
                     menu=args.menu, H=H, n_grid=args.n_grid, n_types=args.n_types, method=args.method,
                     timing=not args.no_timing, verbose=args.verbose)


def main(argv=None, stderr=None):
    stderr = stderr or sys.stderr
    try:
        config = parse_args(argv)
    except CertMenuError as err:
        stderr.write(json.dumps(err.to_dict(), sort_keys=True) + "\n")
        return err.exit_code
    logging.basicConfig(level=logging.DEBUG if config.verbose else logging.INFO, stream=stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    return run(config, stderr=stderr)


if __name__ == "__main__":
    sys.exit(main())
