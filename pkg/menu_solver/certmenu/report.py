"""
Report assembly for the command-line runner: versioned JSON documents, CSV
tables and the revenue / welfare gap table across H.
"""

import io
import json
import math
import hashlib
import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from certmenu.choice import segment_outcome
from certmenu.fptas import DEFAULT_TYPES, dp_solve, linear_single_item
from certmenu.utils import DEFAULT_TOLERANCES
from certmenu.welfare import first_best_welfare, welfare_optimal_dense
from certmenu.zoo import make_named_instance, rich_gap_menu

logger = logging.getLogger(__name__)

SCHEMA = 1
GAP_COLUMNS = ["H", "single_item_revenue", "rich_menu_revenue", "rich_menu_expected", "dp_revenue",
               "first_best_welfare", "dense_welfare", "revenue_optimal_welfare"]


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    return value


def input_digest(*records):
    """sha256 over the canonical JSON of the inputs."""
    text = json.dumps(_plain(list(records)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_report(command, spec, settings, payload, tol=DEFAULT_TOLERANCES, wall_ms=None):
    """
    Args:
        command: str. Subcommand name.
        spec: InstanceSpec or None.
        settings: dict. Run settings that affect the result.
        payload: dict. Command results.
        tol: Tolerances.
        wall_ms: float or None. Omitted from the report when None.
    Returns:
        report: dict with a top-level "schema" version.
    """
    instance = spec.to_dict() if spec is not None else None
    report = {"schema": SCHEMA, "command": command, "instance": instance, "settings": settings,
              "tolerances": tol.to_dict(), "digest": input_digest(command, instance, settings, tol.to_dict()),
              "result": payload}
    if wall_ms is not None:
        report["wall_ms"] = wall_ms
    return _plain(report)


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2)


def render(report, fmt="json", frame=None):
    """Serialize a report; csv emits the command's table when it has one."""
    if fmt == "csv" and frame is not None:
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False)
        return buffer.getvalue()
    return dumps(report) + "\n"


def gap_table(H_values, eps=0.05, k=None, n_types=DEFAULT_TYPES, step=0.005, tol=DEFAULT_TOLERANCES,
              progress=False):
    """
    Revenue and welfare gaps as H grows. Revenue columns use the piecewise gap
    instance; welfare columns use the linear equal-revenue instance.
    Args:
        H_values: iterable of float >= 1.
        eps: float. Grid accuracy for the single-item and DP columns.
        k: int or None. When given, add the DP revenue with at most k items.
        n_types: int.
        step: float. Geometric quality step of the rich menu.
        tol: Tolerances.
        progress: bool.
    Returns:
        frame: DataFrame with GAP_COLUMNS.
    """
    rows = []
    for H in tqdm(list(H_values), disable=not progress, desc="gap"):
        gap = make_named_instance("piecewise_gap", {"H": H}).pricing()
        linear = make_named_instance("linear_equal_revenue", {"H": H}).pricing()

        single, _, _ = dp_solve(gap, eps, 1, n_types=n_types, tol=tol, timing=False)
        rich = rich_gap_menu(H, step)
        dp_revenue = np.nan
        if k is not None:
            menu, _, _ = dp_solve(gap, eps, k, n_types=n_types, tol=tol, timing=False)
            dp_revenue = segment_outcome(gap, menu, tol).revenue

        posted = linear_single_item(linear, tol=tol)
        _, dense = welfare_optimal_dense(linear, 100, tol)
        rows.append([H, segment_outcome(gap, single, tol).revenue, segment_outcome(gap, rich, tol).revenue,
                     (1.0 + math.log(H)) / 2.0, dp_revenue, first_best_welfare(linear, tol), dense,
                     segment_outcome(linear, posted, tol).welfare])
    frame = pd.DataFrame(rows, columns=GAP_COLUMNS)
    logger.info("Gap table:\n%s", frame.to_string(index=False))
    return frame
