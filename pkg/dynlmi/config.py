"""
Run configuration, read from and written to YAML.

Every section is optional; missing keys take the defaults below. Example:

    seed: 1
    output: results
    data:
      path: null            # .fvecs base vectors; null generates synthetic data
      queries_path: null    # .fvecs queries; null holds out n_queries vectors
      n: 50000
      dim: 32
      clusters: 5
      n_queries: 100
      stream: shuffle       # shuffle | shift
    model:
      kind: centroid        # centroid | mlp
      hidden: 128
      epochs: 30
      batch_size: 256
      learning_rate: 0.01
      momentum: 0.9
    policy:
      underflow_min: 5
      max_avg_leaf_occupancy: 1000
      max_depth: 2
      target_leaf_fill: 500
      check_every: 1
    bench:
      k: 30
      bucket_size: 1000
      scenarios: [{qf: 100, tr: 0.9}, {qf: 100, tr: 0.5}, {qf: 1, tr: 0.9}, {qf: 1, tr: 0.5}]
      checkpoints: {start: 5000, stop: 45000, step: 5000}   # or an explicit list
      methods: [dynamized, none, "naive:auto"]
      probes: 10
      timing: true
      ri_grid: {start: 100, stop: 1000000, per_decade: 10}
"""

import logging
import yaml

from collections import namedtuple
from typing import Optional

from dynlmi.bench.baseline import insert_stream
from dynlmi.bench.cost import CostScenario, default_ri_grid
from dynlmi.bench.scenarios import DEFAULT_SCENARIOS, parse_method
from dynlmi.core.fvecs import read_fvecs
from dynlmi.core.vectors import Dataset, split_queries, synthetic_dataset
from dynlmi.dynamize.policy import PolicyConfig, validate_policy
from dynlmi.index.tree import IndexSettings
from dynlmi.model.classifier import KINDS, Hyperparams


log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


DataConfig = namedtuple(
    "DataConfig",
    field_names=["path", "queries_path", "n", "dim", "clusters", "n_queries", "stream"],
    defaults=[None, None, 50000, 32, 5, 100, "shuffle"],
)

ModelConfig = namedtuple(
    "ModelConfig",
    field_names=["kind", "hidden", "epochs", "batch_size", "learning_rate", "momentum"],
    defaults=["centroid", 128, 30, 256, 0.01, 0.9],
)

BenchConfig = namedtuple(
    "BenchConfig",
    field_names=[
        "k",
        "bucket_size",
        "scenarios",
        "checkpoints",
        "methods",
        "probes",
        "timing",
        "ri_grid",
    ],
    defaults=[
        30,
        1000,
        [{"qf": s.qf, "tr": s.tr} for s in DEFAULT_SCENARIOS],
        None,
        ["dynamized", "none", "naive:auto"],
        10,
        True,
        {"start": 100, "stop": 1000000, "per_decade": 10},
    ],
)

RunConfig = namedtuple(
    "RunConfig",
    field_names=["seed", "output", "data", "model", "policy", "bench"],
    defaults=[0, "results", DataConfig(), ModelConfig(), PolicyConfig(), BenchConfig()],
)

_SECTIONS = {
    "data": DataConfig,
    "model": ModelConfig,
    "policy": PolicyConfig,
    "bench": BenchConfig,
}


def _section(cls, doc: Optional[dict], name: str):
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"section {name} must be a mapping")

    unknown = set(doc) - set(cls._fields)
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {', '.join(sorted(unknown))}")

    return cls(**doc)


def config_from_dict(doc: Optional[dict]) -> RunConfig:
    doc = doc or {}
    unknown = set(doc) - set(RunConfig._fields)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(unknown))}")

    config = RunConfig(
        seed=doc.get("seed", 0),
        output=doc.get("output", "results"),
        **{name: _section(cls, doc.get(name), name) for name, cls in _SECTIONS.items()},
    )

    if config.model.kind not in KINDS:
        raise ConfigError(f"unknown model kind: {config.model.kind}")
    if config.data.stream not in ("shuffle", "shift"):
        raise ConfigError(f"unknown stream mode: {config.data.stream}")
    try:
        validate_policy(config.policy)
        for m in config.bench.methods:
            parse_method(m)
    except ValueError as e:
        raise ConfigError(str(e)) from e

    return config


def config_to_dict(config: RunConfig) -> dict:
    doc = {"seed": config.seed, "output": config.output}
    for name in _SECTIONS:
        doc[name] = dict(getattr(config, name)._asdict())
    return doc


def load_config(path) -> RunConfig:
    with open(path) as f:
        return config_from_dict(yaml.safe_load(f))


def dump_config(config: RunConfig, path):
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=True)


def index_settings(config: RunConfig) -> IndexSettings:
    model = config.model
    return IndexSettings(
        kind=model.kind,
        hyperparams=Hyperparams(
            hidden=model.hidden,
            epochs=model.epochs,
            batch_size=model.batch_size,
            learning_rate=model.learning_rate,
            momentum=model.momentum,
        ),
        seed=config.seed,
        max_depth=config.policy.max_depth,
    )


def scenarios(config: RunConfig) -> list[CostScenario]:
    return [CostScenario(float(s["qf"]), float(s["tr"])) for s in config.bench.scenarios]


def checkpoints(config: RunConfig, size: int) -> list[int]:
    spec = config.bench.checkpoints
    if spec is None:
        step = max(1, size // 10)
        return list(range(step, size, step))
    if isinstance(spec, dict):
        return list(range(spec["start"], spec["stop"] + 1, spec["step"]))
    return [int(c) for c in spec]


def ri_grid(config: RunConfig):
    grid = config.bench.ri_grid
    if isinstance(grid, dict):
        return default_ri_grid(grid["start"], grid["stop"], grid["per_decade"])
    return [int(ri) for ri in grid]


def load_data(config: RunConfig) -> tuple[Dataset, Dataset]:
    """Base vectors in insert-stream order, and the fixed query set."""
    data = config.data

    if data.path is not None:
        dataset = read_fvecs(data.path)
        if data.queries_path is not None:
            queries = read_fvecs(data.queries_path)
        else:
            dataset, queries = split_queries(dataset, data.n_queries, config.seed)
    else:
        dataset = synthetic_dataset(
            data.n + data.n_queries, data.dim, data.clusters, config.seed
        )
        dataset, queries = split_queries(dataset, data.n_queries, config.seed)

    log.info(
        "loaded %d vectors of dimension %d and %d queries",
        len(dataset),
        dataset.dimension,
        len(queries),
    )

    return insert_stream(dataset, data.stream, config.seed, data.clusters), queries
