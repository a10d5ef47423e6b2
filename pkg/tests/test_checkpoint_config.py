import json
import struct

import numpy as np
import pytest

from seqnav.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from seqnav.config import ConfigError, RunConfig, load_run_config, parse_run_config
from seqnav.model import ORIST, ModelConfig
from seqnav.training import Task, TrainConfig, Trainer
from seqnav.world import build_vocabulary, generate_house, sample_episode


def small_model(seed=0):
    vocab = build_vocabulary(8)
    return ORIST(ModelConfig(vocab_size=len(vocab), d_h=16, layers=1, n_heads=2), seed=seed), vocab


def trained_state():
    model, vocab = small_model()
    house = generate_house(11)
    tasks = [Task(house, sample_episode(house, k, vocab=vocab)) for k in range(2)]
    trainer = Trainer(model, TrainConfig(batch_size=2, max_steps=4), tasks)
    for _ in range(2):
        trainer.train_step(tasks)
    return model, trainer.opt.state


def test_round_trip_is_bit_exact(tmp_path):
    model, opt = trained_state()
    meta = {"epoch": 3, "note": "x"}
    save_checkpoint(tmp_path / "a.orst", model, meta, opt)
    model2, meta2, opt2 = load_checkpoint(tmp_path / "a.orst")
    assert model2.config == model.config
    assert meta2["epoch"] == 3 and meta2["note"] == "x"
    assert sorted(model2.params) == sorted(model.params)
    for k, p in model.params.items():
        assert p.data.tobytes() == model2.params[k].data.tobytes(), k
    assert opt2.step == opt.step and opt.step > 0
    for k in opt.m:
        assert opt.m[k].tobytes() == opt2.m[k].tobytes()
        assert opt.v[k].tobytes() == opt2.v[k].tobytes()
    # saving the reloaded model reproduces the file byte for byte
    save_checkpoint(tmp_path / "b.orst", model2, meta2 | {}, opt2)
    m = dict(meta2)
    m.pop("opt_step"), m.pop("opt_skipped")
    save_checkpoint(tmp_path / "c.orst", model2, m, opt2)
    assert (tmp_path / "a.orst").read_bytes() == (tmp_path / "c.orst").read_bytes()


def test_layout_header(tmp_path):
    model, _ = small_model()
    save_checkpoint(tmp_path / "m.orst", model)
    raw = (tmp_path / "m.orst").read_bytes()
    assert raw[:4] == MAGIC
    version, hlen = struct.unpack("<II", raw[4:12])
    header = json.loads(raw[12 : 12 + hlen])
    assert version == 1 and header["model_config"]["d_h"] == 16
    (count,) = struct.unpack("<I", raw[12 + hlen : 16 + hlen])
    assert count == len(model.params)


def test_without_optimizer_state(tmp_path):
    model, _ = small_model()
    save_checkpoint(tmp_path / "m.orst", model)
    _, _, opt = load_checkpoint(tmp_path / "m.orst")
    assert opt is None


def test_rejects_bad_magic_and_truncation(tmp_path):
    model, _ = small_model()
    save_checkpoint(tmp_path / "m.orst", model)
    raw = (tmp_path / "m.orst").read_bytes()
    (tmp_path / "bad.orst").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(tmp_path / "bad.orst")
    (tmp_path / "short.orst").write_bytes(raw[:-10])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(tmp_path / "short.orst")


# ---------------------------------------------------------------- config


def test_default_config_round_trips():
    run = RunConfig()
    again = parse_run_config(json.loads(json.dumps(run.to_dict())))
    assert again == run


def test_file_round_trip(tmp_path):
    raw = {"seed": 4, "mode": "reverie", "world": {"num_viewpoints": 12}, "train": {"epochs": 2}}
    (tmp_path / "c.json").write_text(json.dumps(raw))
    run = load_run_config(tmp_path / "c.json")
    assert run.seed == 4 and run.mode == "reverie" and run.world.num_viewpoints == 12 and run.train.epochs == 2
    assert parse_run_config(run.to_dict()) == run


@pytest.mark.parametrize("raw, path", [
    ({"bogus": 1}, "bogus"),
    ({"world": {"num_viewpoints": "many"}}, "world.num_viewpoints"),
    ({"world": {"objects_per_view": 0}}, "world."),
    ({"train": {"gamma": 1.5}}, "train.gamma"),
    ({"train": {"lambda1": 0}}, "train.lambda1"),
    ({"train": {"seed": 3}}, "train.seed"),
    ({"train": {"use_rl": 1}}, "train.use_rl"),
    ({"model": {"frobnicate": 2}}, "model.frobnicate"),
    ({"mode": "vln"}, "mode"),
    ({"splits": {"num_train_houses": 0}}, "splits.num_train_houses"),
    ({"train": []}, "train"),
])
def test_errors_name_the_field(raw, path):
    with pytest.raises(ConfigError) as e:
        parse_run_config(raw)
    assert str(e.value).startswith(path)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "nope.json")
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_run_config(tmp_path / "x.json")
