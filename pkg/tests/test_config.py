import pytest
import numpy as np

from dynlmi import config
from dynlmi.bench.cost import CostScenario
from dynlmi.config import ConfigError, RunConfig
from dynlmi.core.fvecs import write_fvecs
from dynlmi.core.vectors import synthetic_dataset


YAML = """
seed: 4
output: out
data:
  n: 200
  dim: 3
  clusters: 4
  n_queries: 10
  stream: shuffle
model:
  kind: mlp
  hidden: 16
policy:
  underflow_min: 1
  max_avg_leaf_occupancy: 40
  target_leaf_fill: 20
bench:
  k: 5
  scenarios: [{qf: 10, tr: 0.5}]
  checkpoints: {start: 50, stop: 150, step: 50}
  methods: [dynamized, "naive:30"]
  ri_grid: [10, 100]
"""


def test_defaults():
    assert config.config_from_dict(None) == RunConfig()
    assert config.config_from_dict({}) == RunConfig()
    assert RunConfig().bench.methods == ["dynamized", "none", "naive:auto"]


def test_load_config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(YAML)

    c = config.load_config(path)

    assert c.seed == 4
    assert c.data.n == 200
    assert c.data.path is None
    assert c.model.kind == "mlp"
    assert c.model.epochs == 30
    assert c.policy.max_depth == 2
    assert c.bench.bucket_size == 1000

    assert config.scenarios(c) == [CostScenario(10.0, 0.5)]
    assert config.checkpoints(c, 200) == [50, 100, 150]
    assert config.ri_grid(c) == [10, 100]

    settings = config.index_settings(c)
    assert settings.kind == "mlp"
    assert settings.hyperparams.hidden == 16
    assert settings.seed == 4
    assert settings.max_depth == 2


def test_dump_config(tmp_path):
    src = tmp_path / "run.yaml"
    src.write_text(YAML)
    c = config.load_config(src)

    dst = tmp_path / "copy.yaml"
    config.dump_config(c, dst)

    assert config.load_config(dst) == c


def test_unknown_keys():
    with pytest.raises(ConfigError, match="top-level"):
        config.config_from_dict({"sead": 1})

    with pytest.raises(ConfigError, match="policy"):
        config.config_from_dict({"policy": {"max_depht": 3}})

    with pytest.raises(ConfigError):
        config.config_from_dict({"data": [1, 2]})


def test_invalid_values():
    with pytest.raises(ConfigError):
        config.config_from_dict({"model": {"kind": "forest"}})

    with pytest.raises(ConfigError):
        config.config_from_dict({"data": {"stream": "sorted"}})

    with pytest.raises(ConfigError):
        config.config_from_dict({"policy": {"underflow_min": 600}})

    with pytest.raises(ConfigError):
        config.config_from_dict({"bench": {"methods": ["naive:0"]}})


def test_checkpoints():
    assert config.checkpoints(RunConfig(), 100) == list(range(10, 100, 10))

    explicit = config.config_from_dict({"bench": {"checkpoints": [5, 20]}})
    assert config.checkpoints(explicit, 100) == [5, 20]


def test_default_ri_grid():
    grid = config.ri_grid(RunConfig())
    assert grid[0] == 100
    assert grid[-1] == 1_000_000


def test_load_synthetic_data():
    c = config.config_from_dict(
        {"data": {"n": 200, "dim": 3, "clusters": 4, "n_queries": 10, "stream": "shift"}}
    )

    dataset, queries = config.load_data(c)

    assert len(dataset) == 200
    assert len(queries) == 10
    assert dataset.dimension == 3
    assert not set(dataset.ids) & set(queries.ids)
    assert np.all(np.diff(dataset.labels) >= 0)


def test_load_file_data(tmp_path):
    base = tmp_path / "base.fvecs"
    queries = tmp_path / "queries.fvecs"
    write_fvecs(base, synthetic_dataset(60, 3, 2, seed=0))
    write_fvecs(queries, synthetic_dataset(5, 3, 2, seed=1))

    c = config.config_from_dict(
        {"data": {"path": str(base), "queries_path": str(queries), "stream": "shuffle"}}
    )
    dataset, q = config.load_data(c)
    assert len(dataset) == 60
    assert len(q) == 5

    c = config.config_from_dict({"data": {"path": str(base), "n_queries": 6}})
    dataset, q = config.load_data(c)
    assert len(dataset) == 54
    assert len(q) == 6
