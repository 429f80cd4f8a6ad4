"""Model unit tests: shapes, init, exact gradients, checkpoints."""

import numpy as np
import pytest

from vibroloc.checkpoint import load_checkpoint, save_checkpoint
from vibroloc.errors import CheckpointError, ConfigMismatchError, NumericError
from vibroloc.model import (
    ModelConfig,
    TargetNorm,
    backward,
    extract_patches,
    forward,
    init_params,
    mse_loss,
    param_count,
    predict,
    tensor_shapes,
)
from vibroloc.scene import default_scene

TINY = ModelConfig(channels=7, embed_dim=16, depth=2, heads=2, input_t=26, input_f=26)
DESK = ModelConfig(channels=7, embed_dim=64, depth=2, heads=4, input_t=61, input_f=65)
UNIT_NORM = TargetNorm(np.zeros(3), np.ones(3))


def _random_batch(config, batch, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, config.channels, config.input_t, config.input_f))
    targets = rng.uniform(-1.0, 1.0, size=(batch, 3))
    return x, targets


def test_token_counts():
    assert DESK.n_patches_t == 5
    assert DESK.n_patches_f == 5
    assert DESK.n_patches == 25
    assert DESK.n_tokens == 26
    edge = ModelConfig(input_t=16, input_f=16)
    assert edge.n_patches == 1
    assert edge.n_tokens == 2


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(input_t=15)
    with pytest.raises(ValueError):
        ModelConfig(embed_dim=64, heads=5)
    with pytest.raises(ValueError):
        ModelConfig(depth=0)


def test_param_count_matches_tensor_shapes():
    for config in (TINY, DESK, ModelConfig(embed_dim=32, depth=3, heads=4)):
        total = sum(int(np.prod(s)) for s in tensor_shapes(config).values())
        assert param_count(config) == total
    assert param_count(DESK) == 216771


def test_patch_extraction_layout():
    config = TINY
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, 7, 26, 26))
    patches = extract_patches(x, config)
    assert patches.shape == (1, 4, 7 * 16 * 16)
    # patch index is time-major: p = ti * n_f + fi
    np.testing.assert_array_equal(patches[0, 0], x[0, :, 0:16, 0:16].ravel())
    np.testing.assert_array_equal(patches[0, 1], x[0, :, 0:16, 10:26].ravel())
    np.testing.assert_array_equal(patches[0, 2], x[0, :, 10:26, 0:16].ravel())
    np.testing.assert_array_equal(patches[0, 3], x[0, :, 10:26, 10:26].ravel())


def test_bad_input_shape_rejected():
    params = init_params(TINY, 0, UNIT_NORM)
    with pytest.raises(ValueError):
        forward(params, np.zeros((2, 7, 25, 26)))
    with pytest.raises(ValueError):
        forward(params, np.zeros((2, 6, 26, 26)))


def test_init_determinism_and_ranges():
    a = init_params(TINY, 42, UNIT_NORM)
    b = init_params(TINY, 42, UNIT_NORM)
    c = init_params(TINY, 43, UNIT_NORM)
    for name in a.tensors:
        np.testing.assert_array_equal(a.tensors[name], b.tensors[name])
    assert any(not np.array_equal(a.tensors[n], c.tensors[n]) for n in a.tensors)
    for name, tensor in a.tensors.items():
        if name.endswith(".g"):
            np.testing.assert_array_equal(tensor, np.ones_like(tensor))
        elif name.endswith(".b"):
            np.testing.assert_array_equal(tensor, np.zeros_like(tensor))
        else:
            # truncated normal, sigma 0.02, clipped at two sigma
            assert np.max(np.abs(tensor)) <= 0.04 + 1e-12
            assert np.std(tensor) < 0.03


def test_forward_shapes_and_single_sample():
    params = init_params(DESK, 0, UNIT_NORM)
    x, _ = _random_batch(DESK, 2, 1)
    preds = forward(params, x)
    assert preds.shape == (2, 3)
    single = forward(params, x[0])
    np.testing.assert_allclose(single[0], preds[0], rtol=0, atol=1e-12)


def test_batch_permutation_equivariance():
    params = init_params(TINY, 3, UNIT_NORM)
    x, _ = _random_batch(TINY, 5, 2)
    perm = np.array([4, 2, 0, 3, 1])
    np.testing.assert_allclose(forward(params, x[perm]), forward(params, x)[perm],
                               rtol=0, atol=1e-12)


def test_attention_rows_are_distributions():
    params = init_params(TINY, 4, UNIT_NORM)
    x, _ = _random_batch(TINY, 2, 5)
    _, cache = forward(params, x, want_cache=True)
    for block in cache["blocks"]:
        attn = block["attn"]
        assert np.all(attn >= 0)
        np.testing.assert_allclose(attn.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_mse_loss_value():
    preds = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    targets = np.array([[1.0, 2.0, 2.0], [0.0, 3.0, 0.0]])
    # squared errors: 1 and 9 over 6 coordinate slots
    assert mse_loss(preds, targets) == pytest.approx(10.0 / 6.0)
    with pytest.raises(ValueError):
        mse_loss(preds, targets[:1])


def test_gradients_match_finite_differences():
    params = init_params(TINY, 7, UNIT_NORM)
    x, targets = _random_batch(TINY, 3, 8)
    _, grads = backward(params, x, targets)
    rng = np.random.default_rng(9)
    h = 1e-4
    for name, tensor in params.tensors.items():
        direction = rng.standard_normal(tensor.shape)
        direction /= np.linalg.norm(direction)
        analytic = float(np.sum(grads[name] * direction))
        saved = tensor.copy()
        params.tensors[name] = saved + h * direction
        loss_plus = mse_loss(forward(params, x), targets)
        params.tensors[name] = saved - h * direction
        loss_minus = mse_loss(forward(params, x), targets)
        params.tensors[name] = saved
        numeric = (loss_plus - loss_minus) / (2.0 * h)
        denom = max(abs(numeric), abs(analytic), 1e-8)
        assert abs(numeric - analytic) / denom < 1e-4, name


def test_pointwise_finite_differences():
    params = init_params(TINY, 11, UNIT_NORM)
    x, targets = _random_batch(TINY, 2, 12)
    _, grads = backward(params, x, targets)
    rng = np.random.default_rng(13)
    h = 1e-4
    for name in ("patch.w", "block0.attn.qkv.w", "block1.mlp.fc1.w", "head.w", "pos"):
        tensor = params.tensors[name]
        flat_idx = rng.choice(tensor.size, size=3, replace=False)
        for idx in flat_idx:
            multi = np.unravel_index(idx, tensor.shape)
            orig = tensor[multi]
            tensor[multi] = orig + h
            loss_plus = mse_loss(forward(params, x), targets)
            tensor[multi] = orig - h
            loss_minus = mse_loss(forward(params, x), targets)
            tensor[multi] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            analytic = grads[name][multi]
            denom = max(abs(numeric), abs(analytic), 1e-8)
            assert abs(numeric - analytic) / denom < 1e-4, (name, multi)


def test_zero_loss_gives_zero_gradients():
    params = init_params(TINY, 21, UNIT_NORM)
    x, _ = _random_batch(TINY, 2, 22)
    targets = forward(params, x)
    loss, grads = backward(params, x, targets)
    assert loss == 0.0
    np.testing.assert_array_equal(grads["head.w"], np.zeros_like(grads["head.w"]))
    np.testing.assert_array_equal(grads["head.b"], np.zeros_like(grads["head.b"]))


def test_duplicated_batch_gradients_match_single():
    params = init_params(TINY, 31, UNIT_NORM)
    x, targets = _random_batch(TINY, 1, 32)
    _, g_single = backward(params, x, targets)
    x_dup = np.concatenate([x, x], axis=0)
    t_dup = np.concatenate([targets, targets], axis=0)
    _, g_dup = backward(params, x_dup, t_dup)
    for name in g_single:
        np.testing.assert_allclose(g_dup[name], g_single[name], rtol=0, atol=1e-12)


def test_numeric_error_on_nan_params():
    params = init_params(TINY, 41, UNIT_NORM)
    params.tensors["head.w"][0, 0] = np.nan
    x, targets = _random_batch(TINY, 1, 42)
    with pytest.raises(NumericError):
        forward(params, x)


def test_target_norm_roundtrip():
    scene = default_scene()
    norm = TargetNorm.from_box(scene.workspace)
    np.testing.assert_allclose(norm.normalize(scene.workspace.min_mm), -np.ones(3))
    np.testing.assert_allclose(norm.normalize(scene.workspace.max_mm), np.ones(3))
    rng = np.random.default_rng(0)
    p = rng.uniform(-100, 300, size=(10, 3))
    np.testing.assert_allclose(norm.denormalize(norm.normalize(p)), p, atol=1e-9)
    with pytest.raises(ValueError):
        TargetNorm(np.zeros(3), np.array([1.0, 0.0, 1.0]))


def test_predict_denormalizes():
    scene = default_scene()
    norm = TargetNorm.from_box(scene.workspace)
    params = init_params(TINY, 51, norm)
    x, _ = _random_batch(TINY, 2, 52)
    out = predict(params, x)
    np.testing.assert_allclose(out.position_mm, norm.denormalize(out.normalized))
    single = predict(params, x[0])
    assert single.position_mm.shape == (3,)
    np.testing.assert_allclose(single.position_mm, out.position_mm[0],
                               rtol=0, atol=1e-9)


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    params = init_params(TINY, 61, UNIT_NORM)
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.config == params.config
    np.testing.assert_array_equal(loaded.target_norm.center_mm,
                                  params.target_norm.center_mm)
    for name, tensor in params.tensors.items():
        expected = tensor.astype(np.float32).astype(np.float64)
        np.testing.assert_array_equal(loaded.tensors[name], expected)
    # a second save of the loaded params reproduces the file byte for byte
    path2 = tmp_path / "model2.ckpt"
    save_checkpoint(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_truncation_detected(tmp_path):
    params = init_params(TINY, 71, UNIT_NORM)
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path)
    blob = path.read_bytes()
    clipped = tmp_path / "clipped.ckpt"
    clipped.write_bytes(blob[:-100])
    with pytest.raises(CheckpointError):
        load_checkpoint(clipped)
    garbage = tmp_path / "garbage.ckpt"
    garbage.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(garbage)


def test_checkpoint_config_mismatch(tmp_path):
    params = init_params(TINY, 81, UNIT_NORM)
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path)
    with pytest.raises(ConfigMismatchError):
        load_checkpoint(path, expect_config=DESK)
    # matching expectation loads fine
    load_checkpoint(path, expect_config=TINY)
