import logging
import pandas as pd

from collections import namedtuple
from typing import Optional

from dynlmi.core.vectors import Dataset, ground_truth
from dynlmi.dynamize.operators import ActionLog
from dynlmi.dynamize.policy import DynamicIndex, PolicyConfig
from dynlmi.index.tree import IndexSettings

from .baseline import RebuildPolicy, default_probes, run_lifecycle
from .cost import (
    CostScenario,
    amortized_cost,
    deterioration_curve,
    measure_search_cost,
    mean_sc,
    optimal_rebuild_interval,
    validate_scenario,
)


log = logging.getLogger(__name__)

Method = namedtuple("Method", ["name", "rebuild_interval"], defaults=[None])

BenchRecord = namedtuple(
    "BenchRecord",
    field_names=[
        "method",
        "QF",
        "TR",
        "checkpoint_size",
        "SC_proxy",
        "SC_seconds",
        "BC_cum_proxy",
        "BC_cum_seconds",
        "RI",
        "AC_proxy",
        "AC_seconds",
        "seed",
    ],
)

DEFAULT_SCENARIOS = [
    CostScenario(100, 0.9),
    CostScenario(100, 0.5),
    CostScenario(1, 0.9),
    CostScenario(1, 0.5),
]


def parse_method(text: str) -> Method:
    """`dynamized`, `none`, `naive:<RI>`, or `naive:auto` for per-scenario tuned intervals."""
    name, _, ri = text.partition(":")
    if name in ("dynamized", "none") and not ri:
        return Method(name)
    if name == "naive" and ri == "auto":
        return Method(name)
    if name == "naive" and ri.isdigit() and int(ri) >= 1:
        return Method(name, int(ri))
    raise ValueError(f"unknown method {text!r}, expected dynamized, none, naive:<RI> or naive:auto")


def method_label(method: Method) -> str:
    if method.name == "naive":
        return f"naive({method.rebuild_interval})"
    return method.name


def dynamized_amortized_cost(
    action_log: ActionLog,
    total_queries: float,
    current_sc: float,
    unit: str = "distance_computations",
) -> float:
    """Current SC plus every structural cost so far spread over every query so far."""
    if total_queries <= 0:
        raise ValueError(f"total queries must be positive, got {total_queries}")
    return current_sc + getattr(action_log.cost(), unit) / total_queries


def _record(method, scenario, size, sc, bc, ri, seed, timing, ac=None) -> BenchRecord:
    sc_proxy, sc_seconds = sc
    bc_proxy, bc_seconds = bc
    if ac is None:
        ac = (
            amortized_cost(sc_proxy, bc_proxy, ri, scenario.qf),
            amortized_cost(sc_seconds, bc_seconds, ri, scenario.qf),
        )
    ac_proxy, ac_seconds = ac
    if not timing:
        sc_seconds = bc_seconds = ac_seconds = 0.0

    return BenchRecord(
        method=method,
        QF=scenario.qf,
        TR=scenario.tr,
        checkpoint_size=size,
        SC_proxy=sc_proxy,
        SC_seconds=sc_seconds,
        BC_cum_proxy=bc_proxy,
        BC_cum_seconds=bc_seconds,
        RI=ri,
        AC_proxy=ac_proxy,
        AC_seconds=ac_seconds,
        seed=seed,
    )


class ScenarioRunner:
    def __init__(
        self,
        dataset: Dataset,
        queries: Dataset,
        k: int = 30,
        bucket_size: int = 1000,
        policy: PolicyConfig = PolicyConfig(),
        settings: IndexSettings = IndexSettings(),
        probes: int = 10,
        timing: bool = True,
        seed: int = 0,
    ):
        self.dataset = dataset
        self.queries = queries
        self.k = k
        self.bucket_size = bucket_size
        self.policy = policy
        self.settings = settings._replace(seed=seed)
        self.probes = probes
        self.timing = timing
        self.seed = seed

    def lifecycle_curves(self, size: int, stream_length: int, target_recalls) -> tuple:
        """Build over the first `size` objects, stream the next ones without rebuilding.

        Returns the build cost and one deterioration curve per target recall.
        """
        initial = self.dataset[:size]
        stream = self.dataset[size : size + stream_length]

        lifecycle = run_lifecycle(
            initial,
            stream,
            RebuildPolicy("none"),
            probe_points=default_probes(len(stream), self.probes),
            queries=self.queries,
            k=self.k,
            target_recalls=target_recalls,
            bucket_size=self.bucket_size,
            settings=self.settings,
            timing=self.timing,
        )
        build_cost = lifecycle.snapshots[0].build_cost
        curves = {tr: deterioration_curve(lifecycle.snapshots, tr) for tr in target_recalls}
        return build_cost, curves

    def baseline_records(self, method: Method, scenarios, size: int) -> list[BenchRecord]:
        remaining = len(self.dataset) - size
        if method.name == "naive":
            ri = method.rebuild_interval
            stream_length = min(ri - 1, remaining)
        else:
            ri = max(remaining, 1)
            stream_length = remaining

        target_recalls = sorted({s.tr for s in scenarios})
        build_cost, curves = self.lifecycle_curves(size, stream_length, target_recalls)

        records = []
        for scenario in scenarios:
            curve = curves[scenario.tr]
            sc = (mean_sc(curve, ri, "sc_proxy"), mean_sc(curve, ri, "sc_seconds"))
            bc = (build_cost.distance_computations, build_cost.seconds)
            records.append(
                _record(method_label(method), scenario, size, sc, bc, ri, self.seed, self.timing)
            )
        return records

    def dynamized_records(self, scenarios, checkpoints) -> list[BenchRecord]:
        """Grow one index from empty, evaluating it at every checkpoint."""
        dynamic = DynamicIndex(self.dataset.dimension, self.policy, self.settings)
        target_recalls = sorted({s.tr for s in scenarios})

        records = []
        inserted = 0
        for size in checkpoints:
            dynamic.extend(self.dataset[inserted:size])
            inserted = size

            truth = ground_truth(dynamic.index.store.dataset(), self.queries, self.k)
            costs = {
                tr: measure_search_cost(
                    dynamic.index, self.queries, truth, tr, self.k, timing=self.timing
                )
                for tr in target_recalls
            }
            structural = dynamic.log.cost()

            for scenario in scenarios:
                cost = costs[scenario.tr]
                total = scenario.qf * size
                ac = (
                    dynamized_amortized_cost(dynamic.log, total, cost.sc_proxy),
                    dynamized_amortized_cost(dynamic.log, total, cost.sc_seconds, unit="seconds"),
                )
                records.append(
                    _record(
                        "dynamized",
                        scenario,
                        size,
                        (cost.sc_proxy, cost.sc_seconds),
                        (structural.distance_computations, structural.seconds),
                        size,
                        self.seed,
                        self.timing,
                        ac,
                    )
                )

            log.info(
                "dynamized index at %d objects: %d leaves, %d structural actions",
                size,
                len(dynamic.index.leaves()),
                len(dynamic.log),
            )

        return records

    def tune_rebuild_intervals(self, scenarios, size: int, ri_grid=None) -> tuple[dict, pd.DataFrame]:
        """RI* per scenario from a No-rebuild deterioration curve measured after `size` objects."""
        target_recalls = sorted({s.tr for s in scenarios})
        build_cost, curves = self.lifecycle_curves(
            size, len(self.dataset) - size, target_recalls
        )

        tuned = {}
        tables = []
        for scenario in scenarios:
            ri_star, table = optimal_rebuild_interval(
                build_cost.distance_computations, curves[scenario.tr], scenario.qf, ri_grid
            )
            tuned[scenario] = ri_star
            table.insert(0, "TR", scenario.tr)
            table.insert(0, "QF", scenario.qf)
            tables.append(table)

        return tuned, pd.concat(tables, ignore_index=True)


BenchResult = namedtuple("BenchResult", ["records", "ri_tables"])


def run_scenario_matrix(
    dataset: Dataset,
    queries: Dataset,
    scenarios: list[CostScenario] = DEFAULT_SCENARIOS,
    checkpoints: Optional[list[int]] = None,
    methods: list[Method] = (Method("dynamized"), Method("none")),
    seed: int = 0,
    ri_grid=None,
    **kwargs,
) -> BenchResult:
    """One BenchRecord per (method, scenario, checkpoint).

    A `naive` method without an interval stands for the Naive-rebuild
    variants tuned to each scenario; they are tuned at the first checkpoint
    and every tuned variant runs in every scenario. The AC(RI) tables of the
    tuning step come back as `ri_tables`.
    """
    scenarios = [validate_scenario(s) for s in scenarios]
    if checkpoints is None:
        step = max(1, len(dataset) // 10)
        checkpoints = list(range(step, len(dataset), step))
    checkpoints = list(checkpoints)
    if (
        len(checkpoints) == 0
        or checkpoints != sorted(checkpoints)
        or checkpoints[0] < 1
        or checkpoints[-1] > len(dataset)
    ):
        raise ValueError(f"checkpoints must be ascending within [1, {len(dataset)}]")
    if checkpoints[-1] == len(dataset) and any(m.name != "dynamized" for m in methods):
        raise ValueError(
            "baselines need objects left to insert after the last checkpoint, "
            f"got {checkpoints[-1]} of {len(dataset)}"
        )

    runner = ScenarioRunner(dataset, queries, seed=seed, **kwargs)

    ri_tables = None
    expanded = []
    for method in methods:
        if method.name == "naive" and method.rebuild_interval is None:
            tuned, ri_tables = runner.tune_rebuild_intervals(scenarios, checkpoints[0], ri_grid)
            expanded.extend(Method("naive", ri) for ri in sorted(set(tuned.values())))
        elif method not in expanded:
            expanded.append(method)

    records = []
    for method in dict.fromkeys(expanded):
        label = method_label(method)
        try:
            if method.name == "dynamized":
                records.extend(runner.dynamized_records(scenarios, checkpoints))
            else:
                for size in checkpoints:
                    records.extend(runner.baseline_records(method, scenarios, size))
        except Exception as e:
            raise RuntimeError(f"{label} failed: {e}") from e

        log.info("finished %s over %d checkpoints", label, len(checkpoints))

    df = pd.DataFrame(records, columns=BenchRecord._fields)
    df = df.sort_values(["QF", "TR", "method", "checkpoint_size"], kind="stable")
    return BenchResult(df.reset_index(drop=True), ri_tables)
