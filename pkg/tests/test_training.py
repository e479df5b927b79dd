import numpy as np
import pytest

from tensor_core.errors import ContractError, NumericDivergenceError
from wws_models.checkpoint import load_checkpoint, save_checkpoint
from wws_models.models import Batch, build_model
from wws_models.optim import Adam
from wws_models.trainer import Trainer


@pytest.fixture
def dataset(make_dataset):
    return make_dataset(6)


def make_trainer(topology, lr=1e-3, seed=5):
    model = build_model("audio", topology, seed=seed)
    return Trainer(model, Adam(model.registry, lr=lr), batch_size=4, seed=seed, verbose=False)


class TestAdam:
    def test_zero_learning_rate_keeps_weights(self, topology, dataset):
        trainer = make_trainer(topology, lr=0.0)
        before = trainer.model.registry.snapshot()
        trainer.train(dataset, epochs=1)
        after = trainer.model.registry.snapshot()
        assert all(np.array_equal(before[k], after[k]) for k in before)

    def test_training_changes_weights(self, topology, dataset):
        trainer = make_trainer(topology)
        before = trainer.model.registry.snapshot()
        trainer.train(dataset, epochs=1)
        after = trainer.model.registry.snapshot()
        assert any(not np.array_equal(before[k], after[k]) for k in before)

    def test_masked_weights_stay_zero_after_every_step(self, topology, dataset):
        trainer = make_trainer(topology, lr=0.01)
        registry = trainer.model.registry
        name = "audio.fc1.weight"
        mask = np.ones_like(registry[name].weight.data)
        mask[::2] = 0.0
        registry.set_mask(name, mask)
        registry.apply_masks()
        trainer.optimizer.sync_masks()

        seen = []

        def check(tr, iteration, epoch, batch_index):
            seen.append(batch_index)
            assert np.all(tr.model.registry[name].weight.data[mask == 0] == 0.0)

        trainer.add_hook(check)
        trainer.train(dataset, epochs=2)
        assert len(seen) == 4

    def test_negative_learning_rate(self, topology):
        with pytest.raises(ContractError):
            Adam(build_model("audio", topology).registry, lr=-1.0)

    def test_frozen_parameters_are_skipped(self, topology, dataset):
        trainer = make_trainer(topology)
        registry = trainer.model.registry
        registry.freeze("audio.conv1.*")
        before = registry.snapshot()
        trainer.train(dataset, epochs=1)
        after = registry.snapshot()
        for name in registry.names():
            if name.startswith("audio.conv1."):
                np.testing.assert_array_equal(before[name], after[name])


class TestTrainer:
    def test_epoch_log(self, topology, dataset):
        trainer = make_trainer(topology)
        trainer.train(dataset, epochs=2, iteration=3)
        frame = trainer.log_frame()
        assert list(frame.columns) == ["iteration", "epoch", "global_epoch", "batches", "mean_loss"]
        assert frame["epoch"].tolist() == [1, 2]
        assert frame["global_epoch"].tolist() == [1, 2]
        assert frame["iteration"].tolist() == [3, 3]
        assert frame["batches"].tolist() == [2, 2]
        assert (frame["mean_loss"] > 0).all()

    def test_epoch_counter_persists_across_calls(self, topology, dataset):
        trainer = make_trainer(topology)
        trainer.train(dataset, epochs=1, iteration=1)
        trainer.train(dataset, epochs=1, iteration=2)
        assert trainer.epochs_run == 2
        assert trainer.log_frame()["global_epoch"].tolist() == [1, 2]

    def test_zero_epochs_is_a_no_op(self, topology, dataset):
        trainer = make_trainer(topology)
        assert trainer.train(dataset, epochs=0) == []
        assert trainer.log_frame().empty

    def test_same_seed_same_result(self, topology, dataset):
        first, second = make_trainer(topology), make_trainer(topology)
        first.train(dataset, epochs=2)
        second.train(dataset, epochs=2)
        a, b = first.model.registry.snapshot(), second.model.registry.snapshot()
        assert all(a[k].tobytes() == b[k].tobytes() for k in a)

    def test_empty_dataset(self, topology, make_dataset):
        trainer = make_trainer(topology)
        with pytest.raises(ContractError):
            trainer.train(make_dataset(0), epochs=1)

    def test_divergence_reports_location(self, topology, dataset):
        trainer = make_trainer(topology)
        trainer.model.registry["audio.fc1.weight"].weight.data[0, 0] = np.nan
        with pytest.raises(NumericDivergenceError) as info:
            trainer.train(dataset, epochs=1, iteration=2)
        assert info.value.iteration == 2
        assert info.value.epoch == 1
        assert info.value.batch == 0


class TestCheckpoint:
    def test_round_trip_preserves_scores_and_masks(self, tmp_path, topology, rng):
        model = build_model("audio", topology, seed=4)
        name = "audio.fc1.weight"
        mask = (rng.uniform(size=model.registry[name].weight.shape) > 0.3).astype(np.float64)
        model.registry.set_mask(name, mask)
        model.registry.apply_masks()
        model.registry.freeze("audio.conv1.*")

        path = tmp_path / "model.wws"
        save_checkpoint(path, model, {"threshold": 0.42})
        loaded, meta = load_checkpoint(path)

        assert meta == {"threshold": 0.42}
        np.testing.assert_array_equal(loaded.registry[name].mask, mask)
        assert loaded.registry["audio.conv1.weight"].frozen
        fbank = rng.normal(size=(2, 128, 40))
        batch = Batch(labels=np.array([0, 1]), fbank=fbank)
        assert loaded.score(batch).numpy().tobytes() == model.score(batch).numpy().tobytes()

        resaved = tmp_path / "again.wws"
        save_checkpoint(resaved, loaded, meta)
        assert resaved.read_bytes() == path.read_bytes()

    def test_identical_runs_write_identical_checkpoints(self, tmp_path, topology, dataset):
        paths = []
        for i in range(2):
            trainer = make_trainer(topology)
            trainer.train(dataset, epochs=1)
            paths.append(tmp_path / f"run{i}.wws")
            save_checkpoint(paths[-1], trainer.model, {"seed": 5})
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.wws"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(ContractError):
            load_checkpoint(path)
