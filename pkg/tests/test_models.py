import math

import numpy as np
import pytest

from tensor_core.errors import ContractError, ShapeError
from tensor_core.gradcheck import finite_diff_check
from tensor_core.tensor import Tensor, no_grad
from wws_models.fusion import fuse
from wws_models.loss import SCORE_CLAMP, decide, wws_loss
from wws_models.models import Batch, build_model
from wws_models.topology import Topology


class TestFuse:
    def test_repetition_layout(self, rng):
        fbank = rng.normal(size=(8, 40))
        embeddings = rng.normal(size=(2, 3))
        fused = fuse(fbank, embeddings).numpy()
        assert fused.shape == (8, 43)
        for row in range(4):
            np.testing.assert_array_equal(fused[row, 40:], embeddings[0])
        for row in range(4, 8):
            np.testing.assert_array_equal(fused[row, 40:], embeddings[1])

    def test_first_columns_recover_audio(self, rng):
        fbank = rng.normal(size=(3, 128, 40))
        fused = fuse(fbank, rng.normal(size=(3, 32, 64))).numpy()
        np.testing.assert_array_equal(fused[..., :40], fbank)

    def test_default_fused_width(self):
        model = build_model("av", Topology(), seed=0)
        assert model.fused_width == 104
        assert model.input_shape == (128, 104)

    def test_non_integer_ratio(self, rng):
        with pytest.raises(ContractError):
            fuse(rng.normal(size=(10, 40)), rng.normal(size=(3, 4)))

    def test_gradient_flows_to_both_inputs(self, rng):
        params = {
            "a": Tensor(rng.normal(size=(1, 4, 2)), requires_grad=True, name="a"),
            "v": Tensor(rng.normal(size=(1, 2, 3)), requires_grad=True, name="v"),
        }
        from tensor_core.ops import reduce_sum, tanh
        assert finite_diff_check(lambda q: reduce_sum(tanh(fuse(q["a"], q["v"]))), params) < 1e-6


class TestForward:
    def test_audio_score_range_and_determinism(self, topology, rng):
        model = build_model("audio", topology, seed=1)
        fbank = rng.normal(size=(128, 40)) * 5
        with no_grad():
            first = model.forward_audio(fbank).numpy()
            second = model.forward_audio(fbank).numpy()
        assert first.shape == (1,)
        assert 0.0 < first[0] < 1.0
        assert first.tobytes() == second.tobytes()

    def test_audio_wrong_width(self, topology, rng):
        model = build_model("audio", topology, seed=1)
        with pytest.raises(ShapeError):
            model.forward_audio(rng.normal(size=(128, 39)))

    def test_video_constant_embeddings(self, topology):
        model = build_model("video", topology, seed=2)
        score = model.forward_video(np.full((32, topology.encoder.embed_dim), 0.3)).numpy()
        assert np.all(np.isfinite(score)) and 0.0 < score[0] < 1.0

    def test_video_wrong_width(self, topology, rng):
        model = build_model("video", topology, seed=2)
        with pytest.raises(ShapeError):
            model.forward_video(rng.normal(size=(32, topology.encoder.embed_dim + 1)))

    def test_av_batch_scores(self, topology, rng):
        model = build_model("av", topology, seed=3)
        batch = Batch(
            labels=np.array([0, 1]),
            fbank=rng.normal(size=(2, 128, 40)),
            lips=rng.uniform(0, 1, size=(2, 32, 1, topology.encoder.frame_size, topology.encoder.frame_size)),
        )
        with no_grad():
            scores = model.score(batch).numpy()
        assert scores.shape == (2,)
        assert np.all((scores > 0) & (scores < 1))

    def test_av_forward_on_fused_features(self, topology, rng):
        model = build_model("av", topology, seed=3)
        assert model.fused_width == 40 + topology.encoder.embed_dim
        fused = fuse(rng.normal(size=(2, 128, 40)), rng.normal(size=(2, 32, topology.encoder.embed_dim)))
        with no_grad():
            score = model.forward_av(fused).numpy()
        assert score.shape == (2,)
        assert np.all((score > 0) & (score < 1))
        with pytest.raises(ShapeError):
            model.forward_av(rng.normal(size=(128, 40)))

    def test_same_seed_same_weights(self, topology):
        a = build_model("av", topology, seed=9).registry.snapshot()
        b = build_model("av", topology, seed=9).registry.snapshot()
        assert a.keys() == b.keys()
        assert all(a[k].tobytes() == b[k].tobytes() for k in a)

    def test_unknown_modality(self, topology):
        with pytest.raises(ContractError):
            build_model("thermal", topology)

    def test_encoder_has_configured_blocks(self):
        topology = Topology()
        model = build_model("video", topology, seed=0)
        assert len(model.encoder.blocks) == topology.encoder.block_count == 13
        assert model.registry.select("lip_encoder.*")
        assert model.registry.select("video.*")


class TestLoss:
    @pytest.mark.parametrize("label", [0, 1])
    def test_half_is_ln2(self, label):
        assert wws_loss(Tensor([0.5]), [label]).item() == pytest.approx(math.log(2.0), abs=1e-12)

    def test_near_perfect(self):
        assert wws_loss(Tensor([1.0 - 1e-7]), [1]).item() == pytest.approx(1e-7, rel=1e-3)

    def test_confident_mistake(self):
        assert wws_loss(Tensor([0.9]), [0]).item() == pytest.approx(2.302585, abs=1e-6)

    def test_clamp_keeps_loss_finite(self):
        assert np.isfinite(wws_loss(Tensor([1.0, 0.0]), [0, 1]).item())
        assert wws_loss(Tensor([1.0, 0.0]), [0, 1]).item() == pytest.approx(-math.log(SCORE_CLAMP), rel=1e-6)

    def test_batch_mean(self):
        assert wws_loss(Tensor([0.5, 0.9]), [1, 0]).item() == pytest.approx((math.log(2.0) + math.log(10.0)) / 2)

    def test_non_negative(self, rng):
        scores = rng.uniform(0.01, 0.99, size=20)
        assert wws_loss(Tensor(scores), rng.integers(0, 2, size=20)).item() >= 0.0

    def test_invalid_label(self):
        with pytest.raises(ContractError):
            wws_loss(Tensor([0.5]), [2])

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            wws_loss(Tensor([0.5, 0.5]), [1])


class TestDecide:
    @pytest.mark.parametrize("score, expected", [(0.9, 1), (0.2, 0), (0.5, 1)])
    def test_rule(self, score, expected):
        assert decide(score, 0.5) == expected

    def test_vectorized(self):
        np.testing.assert_array_equal(decide(np.array([0.1, 0.5, 0.7]), 0.5), [0, 1, 1])

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2])
    def test_threshold_bounds(self, threshold):
        with pytest.raises(ContractError):
            decide(0.5, threshold)
