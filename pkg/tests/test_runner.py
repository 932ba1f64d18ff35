import json

import pytest

from conftest import SMALL_DIMS
from onlinest.config import OnlineConfig, PolicyConfig
from onlinest.errors import ConfigurationError
from onlinest.harness.sweep import SweepGrid
from onlinest.model.toy import ToyModel
from onlinest.runner import OnlineRunner


@pytest.fixture
def generated(tmp_path):
    cfg = OnlineConfig(run_dir=str(tmp_path / "runs"), workers=2, model_path="")
    corpus = OnlineRunner(cfg).generate(tmp_path / "corpus", seed=4, n_utts=4, len_range=(24, 48), dims=SMALL_DIMS)
    return cfg, corpus


def test_runner_sweep_writes_outputs(generated):
    cfg, corpus = generated
    runner = OnlineRunner(cfg, ToyModel.load(corpus.model_path))
    result = runner.sweep(corpus.manifest_path, SweepGrid((8, 16), (8,), (1,)), label="char")
    out = cfg.run_path("sweep_char")
    assert len(result.rows) == 3
    assert (out / "results.tsv").read_text(encoding="utf-8").count("\n") == 4
    assert len((out / "scores.jsonl").read_text(encoding="utf-8").splitlines()) == 3
    assert (out / "plots" / "char.dat").is_file()
    assert (out / "plots" / "char.pareto.dat").is_file()
    assert (out / "traces" / "k8_s8_N1.jsonl").is_file()


def test_runner_run_and_rescore(generated, tmp_path):
    cfg, corpus = generated
    runner = OnlineRunner(cfg.with_overrides(model_path=str(corpus.model_path)))
    row = runner.run(corpus.manifest_path, PolicyConfig(12, 4, 2), out_dir=tmp_path / "one")
    assert (row.k, row.s, row.N) == (12, 4, 2)
    record = json.loads((tmp_path / "one" / "scores.jsonl").read_text(encoding="utf-8"))
    assert record["al_variant"] == cfg.al_variant

    rows = runner.score([tmp_path / "one" / "traces" / "k12_s4_N2.jsonl"], corpus.manifest_path, out_dir=tmp_path / "re")
    assert rows == [row]

    offline = runner.run(corpus.manifest_path, None, out_dir=tmp_path / "off")
    assert offline.is_offline and offline.bleu == 100.0


def test_runner_needs_a_model(tmp_path):
    runner = OnlineRunner(OnlineConfig(run_dir=str(tmp_path), model_path="", use_bridge=False))
    with pytest.raises(ConfigurationError):
        runner.model
