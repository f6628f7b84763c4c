import logging
import numpy as np
import pandas as pd
import time

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from dynlmi.core.vectors import Dataset, GroundTruth
from dynlmi.index.tree import Index


log = logging.getLogger(__name__)

CostScenario = namedtuple("CostScenario", ["qf", "tr"])

CostSample = namedtuple("CostSample", ["sc", "bc", "ri", "ac"])

SearchCost = namedtuple("SearchCost", ["sc_proxy", "sc_seconds", "budget", "recall"])

# slack for comparing a mean recall built from integer hit counts against TR
_RECALL_EPS = 1e-9


class UnreachableRecallError(ValueError):
    pass


def validate_scenario(scenario: CostScenario) -> CostScenario:
    if scenario.qf <= 0:
        raise ValueError(f"querying frequency must be positive, got {scenario.qf}")
    if not 0 < scenario.tr <= 1:
        raise ValueError(f"target recall must lie in (0, 1], got {scenario.tr}")
    return scenario


def amortized_cost(sc: float, bc: float, ri: float, qf: float) -> float:
    if ri <= 0:
        raise ValueError(f"rebuild interval must be positive, got {ri}")
    if qf <= 0:
        raise ValueError(f"querying frequency must be positive, got {qf}")
    if sc < 0 or bc < 0:
        raise ValueError(f"costs must be nonnegative, got SC={sc}, BC={bc}")
    return sc + bc / (ri * qf)


def cost_sample(sc: float, bc: float, ri: float, qf: float) -> CostSample:
    return CostSample(sc, bc, ri, amortized_cost(sc, bc, ri, qf))


def budget_sweep(
    index: Index,
    queries: Dataset,
    truth: GroundTruth,
    k: int,
    target: float = 1.0,
    workers: int = 1,
) -> pd.DataFrame:
    """Mean recall and objects scanned per bucket budget, from budget 1 upwards.

    All queries advance one bucket at a time so the sweep stops at the first
    budget whose mean recall reaches `target` (or when every leaf is visited).
    """
    if len(truth) != len(queries):
        raise ValueError(f"{len(truth)} ground-truth lists for {len(queries)} queries")
    if truth.k != k:
        raise ValueError(f"ground truth is for k={truth.k}, not k={k}")

    truths = [set(int(t) for t in row) for row in truth.neighbors]
    walks = [index.traverse(q, k) for q in queries.vectors]
    needed = target * len(queries) * k - _RECALL_EPS

    rows = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while True:
            # every walk visits every leaf, so they all run out together
            results = list(pool.map(lambda walk: next(walk, None), walks))
            if len(results) == 0 or results[0] is None:
                break

            hits = sum(
                len(truths[i].intersection(id for id, _ in r.neighbors))
                for i, r in enumerate(results)
            )
            rows.append(
                {
                    "budget": results[0].buckets_visited,
                    "hits": hits,
                    "recall": hits / (len(queries) * k),
                    "objects_scanned": float(np.mean([r.objects_scanned for r in results])),
                }
            )
            if hits >= needed:
                break

    return pd.DataFrame(rows, columns=["budget", "hits", "recall", "objects_scanned"])


def search_cost_at(
    index: Index,
    curve: pd.DataFrame,
    tr: float,
    queries: Dataset,
    k: int,
    timing: bool = True,
) -> SearchCost:
    """The cheapest budget on `curve` reaching `tr`, timed on the real search path."""
    needed = tr * len(queries) * k - _RECALL_EPS
    reached = curve[curve["hits"] >= needed]
    if len(reached) == 0:
        best = curve["recall"].max() if len(curve) > 0 else 0.0
        raise UnreachableRecallError(
            f"target recall {tr} is unreachable, max achievable recall is {best:.4f}"
        )

    row = reached.iloc[0]
    budget = int(row["budget"])

    seconds = 0.0
    if timing:
        start = time.perf_counter()
        for q in queries.vectors:
            index.search(q, k, budget)
        seconds = (time.perf_counter() - start) / len(queries)

    return SearchCost(
        sc_proxy=float(row["objects_scanned"]),
        sc_seconds=seconds,
        budget=budget,
        recall=float(row["recall"]),
    )


def measure_search_cost(
    index: Index,
    queries: Dataset,
    truth: GroundTruth,
    tr: float,
    k: int,
    workers: int = 1,
    timing: bool = True,
) -> SearchCost:
    """Search cost per query at the minimal bucket budget whose mean recall reaches `tr`."""
    if not 0 < tr <= 1:
        raise ValueError(f"target recall must lie in (0, 1], got {tr}")

    curve = budget_sweep(index, queries, truth, k, target=tr, workers=workers)
    cost = search_cost_at(index, curve, tr, queries, k, timing=timing)

    log.debug(
        "TR=%.2f reached at budget %d (recall %.3f, %.1f objects scanned)",
        tr,
        cost.budget,
        cost.recall,
        cost.sc_proxy,
    )
    return cost


def deterioration_curve(snapshots: list, tr: float) -> pd.DataFrame:
    """SC at every probe point of a No-rebuild lifecycle, keyed by inserts since build."""
    rows = []
    for snapshot in snapshots:
        if tr not in snapshot.search_costs:
            raise KeyError(f"snapshot at {snapshot.inserts} inserts was not measured at TR={tr}")
        cost = snapshot.search_costs[tr]
        rows.append(
            {
                "inserts": snapshot.inserts,
                "sc_proxy": cost.sc_proxy,
                "sc_seconds": cost.sc_seconds,
                "budget": cost.budget,
            }
        )
    return pd.DataFrame(rows, columns=["inserts", "sc_proxy", "sc_seconds", "budget"])


def interpolate_sc(curve: pd.DataFrame, t, unit: str = "sc_proxy") -> np.ndarray:
    """Piecewise-linear SC(t), exact at probe points.

    Past the last probe, SC keeps growing at the least-squares slope of the
    whole curve (never downwards).
    """
    xs = curve["inserts"].to_numpy(dtype=np.float64)
    ys = curve[unit].to_numpy(dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)

    out = np.interp(t, xs, ys)
    if len(xs) > 1:
        slope = max(0.0, float(np.polyfit(xs, ys, 1)[0]))
        beyond = t > xs[-1]
        out[beyond] = ys[-1] + slope * (t[beyond] - xs[-1])
    return out


def mean_sc(curve: pd.DataFrame, ri: int, unit: str = "sc_proxy") -> float:
    return float(np.mean(interpolate_sc(curve, np.arange(max(1, int(ri))), unit)))


def default_ri_grid(start: float = 1e2, stop: float = 1e6, per_decade: int = 10) -> np.ndarray:
    decades = np.log10(stop) - np.log10(start)
    points = int(round(decades * per_decade)) + 1
    return np.unique(np.round(np.logspace(np.log10(start), np.log10(stop), points)).astype(np.int64))


def optimal_rebuild_interval(
    build_cost: float,
    curve: pd.DataFrame,
    qf: float,
    ri_grid=None,
    unit: str = "sc_proxy",
) -> tuple[int, pd.DataFrame]:
    """The grid rebuild interval minimizing AC(RI) = mean SC over [0, RI) + BC / (RI * QF)."""
    ri_grid = default_ri_grid() if ri_grid is None else np.asarray(ri_grid, dtype=np.int64)
    if len(ri_grid) == 0:
        raise ValueError("rebuild interval grid is empty")
    if np.any(np.diff(ri_grid) <= 0):
        raise ValueError("rebuild interval grid must be strictly ascending")

    rows = []
    for ri in ri_grid:
        sc = mean_sc(curve, ri, unit)
        share = build_cost / (ri * qf)
        rows.append({"RI": int(ri), "mean_SC": sc, "build_share": share, "AC": sc + share})

    table = pd.DataFrame(rows, columns=["RI", "mean_SC", "build_share", "AC"])
    ri_star = int(table.loc[table["AC"].idxmin(), "RI"])

    log.info("optimal rebuild interval for QF=%g: %d", qf, ri_star)
    return ri_star, table
