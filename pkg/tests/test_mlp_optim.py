"""MLP contracts, parameter init, optimizer updates, checkpoint codec."""

import numpy as np
import pytest

from teamregret import diffcore as dc
from teamregret.diffcore import (
    CheckpointError,
    MlpSpec,
    Optimizer,
    Tensor,
    optimizer_step,
    read_checkpoint,
    write_checkpoint,
)


class TestMlpForward:
    def test_zero_net_maps_to_zero(self):
        spec = MlpSpec((3, 3, 3), activation="tanh")
        params = [
            Tensor(np.zeros((3, 3))), Tensor(np.zeros(3)),
            Tensor(np.zeros((3, 3))), Tensor(np.zeros(3)),
        ]
        out = dc.mlp_forward(spec, params, np.array([1.0, -2.0, 0.5]))
        np.testing.assert_array_equal(out.data, np.zeros(3))

    def test_affine_map(self):
        spec = MlpSpec((1, 1), output_activation="none")
        params = [Tensor(np.array([[2.0]])), Tensor(np.array([1.0]))]
        out = dc.mlp_forward(spec, params, np.array([3.0]))
        assert out.data[0] == pytest.approx(7.0)

    def test_softmax_head_symmetry(self):
        spec = MlpSpec((2, 2), output_activation="softmax")
        params = [Tensor(np.eye(2)), Tensor(np.zeros(2))]
        out = dc.mlp_forward(spec, params, np.array([0.0, 0.0]))
        np.testing.assert_allclose(out.data, [0.5, 0.5], atol=1e-12)

    def test_input_width_error_names_layer(self):
        spec = MlpSpec((4, 2))
        params = dc.init_mlp_params(spec, np.random.default_rng(0))
        with pytest.raises(ValueError, match="layer 0"):
            dc.mlp_forward(spec, params, np.zeros(3))

    def test_bad_weight_shape_names_layer(self):
        spec = MlpSpec((3, 5, 2))
        params = dc.init_mlp_params(spec, np.random.default_rng(0))
        params[2] = Tensor(np.zeros((4, 2)), requires_grad=True)
        with pytest.raises(ValueError, match="layer 1"):
            dc.mlp_forward(spec, params, np.zeros(3))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            MlpSpec((4,))
        with pytest.raises(ValueError):
            MlpSpec((4, 0))
        with pytest.raises(ValueError):
            MlpSpec((4, 2), activation="gelu")


class TestInit:
    def test_uniform_bounds_and_zero_biases(self):
        spec = MlpSpec((30, 50, 10))
        params = dc.init_mlp_params(spec, np.random.default_rng(9), name="net")
        w0, b0, w1, b1 = params
        assert np.abs(w0.data).max() <= np.sqrt(6.0 / 80)
        assert np.abs(w1.data).max() <= np.sqrt(6.0 / 60)
        np.testing.assert_array_equal(b0.data, np.zeros(50))
        np.testing.assert_array_equal(b1.data, np.zeros(10))
        assert w0.name == "net.L0.W" and b1.name == "net.L1.b"
        assert all(p.requires_grad for p in params)

    def test_seeded_init_reproducible(self):
        spec = MlpSpec((5, 5))
        a = dc.init_mlp_params(spec, np.random.default_rng(1))
        b = dc.init_mlp_params(spec, np.random.default_rng(1))
        assert a[0].data.tobytes() == b[0].data.tobytes()


class TestOptimizer:
    def test_sgd_definition(self):
        p = Tensor(np.array([1.0]), requires_grad=True, name="p")
        opt = Optimizer("sgd", learning_rate=0.1)
        optimizer_step(opt, [p], {p: np.array([2.0])})
        assert p.data[0] == pytest.approx(0.8)

    def test_zero_gradient_no_change(self):
        p = Tensor(np.array([1.0, -1.0]), requires_grad=True, name="p")
        before = p.data.copy()
        for kind in ("sgd", "adam"):
            opt = Optimizer(kind, learning_rate=0.5)
            optimizer_step(opt, [p], {p: np.zeros(2)})
        np.testing.assert_array_equal(p.data, before)

    def test_adam_first_step_hand_evaluated(self):
        # t=1: m_hat = g, v_hat = g^2, so the step is lr * g/(|g|+eps) = ~lr
        p = Tensor(np.array([0.0]), requires_grad=True, name="p")
        opt = Optimizer("adam", learning_rate=1e-3)
        optimizer_step(opt, [p], {p: np.array([1.0])})
        assert p.data[0] == pytest.approx(-1e-3, abs=1e-10)

    def test_adam_moments_persist(self):
        p = Tensor(np.array([0.0]), requires_grad=True, name="p")
        opt = Optimizer("adam", learning_rate=1e-3)
        optimizer_step(opt, [p], {p: np.array([1.0])})
        optimizer_step(opt, [p], {p: np.array([1.0])})
        assert opt.step_count == 2
        assert opt.moments["p"]["m"][0] == pytest.approx(0.19, abs=1e-12)

    def test_non_finite_gradient_names_tensor(self):
        p = Tensor(np.array([0.0]), requires_grad=True, name="theta.L0.W")
        opt = Optimizer("sgd", learning_rate=0.1)
        with pytest.raises(ValueError, match="theta.L0.W"):
            optimizer_step(opt, [p], {p: np.array([np.nan])})

    def test_missing_gradient_rejected(self):
        p = Tensor(np.array([0.0]), requires_grad=True, name="p")
        opt = Optimizer("sgd", learning_rate=0.1)
        with pytest.raises(ValueError, match="missing"):
            optimizer_step(opt, [p], {})

    def test_validation(self):
        with pytest.raises(ValueError):
            Optimizer("rmsprop", learning_rate=0.1)
        with pytest.raises(ValueError):
            Optimizer("sgd", learning_rate=0.0)


class TestCheckpointCodec:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        arrays = [("a.W", rng.normal(size=(3, 4))), ("a.b", rng.normal(size=4))]
        meta = {"iteration": 17, "seed": 5}
        path = tmp_path / "ck.bin"
        write_checkpoint(path, arrays, meta)
        loaded, got_meta = read_checkpoint(path)
        assert got_meta == meta
        for name, arr in arrays:
            assert loaded[name].tobytes() == arr.tobytes()

    def test_float32_sections_match_header_order(self, tmp_path):
        import json, struct

        arrays = [("x", np.array([1.5, -2.25])), ("y", np.array([[4.0]]))]
        path = tmp_path / "ck.bin"
        write_checkpoint(path, arrays, {})
        raw = path.read_bytes()
        assert raw[:6] == b"MRGR1\x00"
        (hlen,) = struct.unpack_from("<Q", raw, 6)
        header = json.loads(raw[14 : 14 + hlen])
        assert [e["name"] for e in header["arrays"]] == ["x", "y"]
        f32 = np.frombuffer(raw, dtype="<f4", count=3, offset=14 + hlen)
        np.testing.assert_array_equal(f32, np.array([1.5, -2.25, 4.0], dtype="<f4"))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMAG" + b"\x00" * 32)
        with pytest.raises(CheckpointError, match="magic"):
            read_checkpoint(path)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "ck.bin"
        write_checkpoint(path, [("w", np.ones((64, 64)))], {})
        whole = path.read_bytes()
        path.write_bytes(whole[: len(whole) // 2])
        with pytest.raises(CheckpointError, match="truncated"):
            read_checkpoint(path)

    def test_float32_fallback_without_exact_payload(self, tmp_path):
        import json, struct

        arr = np.array([1.1, 2.2, 3.3])
        header = {"format": 1, "arrays": [{"name": "v", "shape": [3]}], "meta": {}}
        blob = json.dumps(header).encode()
        path = tmp_path / "ck.bin"
        path.write_bytes(
            b"MRGR1\x00" + struct.pack("<Q", len(blob)) + blob + arr.astype("<f4").tobytes()
        )
        loaded, _ = read_checkpoint(path)
        np.testing.assert_allclose(loaded["v"], arr, atol=1e-6)
