import numpy as np
import pytest

from anomae.checkpoint import checkpoint_bytes, load_checkpoint, load_checkpoint_bytes, save_checkpoint
from anomae.errors import (BadMagicError, ChecksumError, ConfigError, DimensionError,
                           PayloadLengthError, TrailingBytesError,
                           UnsupportedOperationError, UnsupportedVersionError)
from anomae.model import AutoencoderModel, ModelConfig, build_model, default_config, expected_param_shapes
from anomae.ops import F32
from anomae.optim import mse_loss
from anomae.rng import SeededRng
from anomae.synth import render_normal_image

import oracles

TINY = ModelConfig(input_size=8, encoder_channels=(2,), latent_channels=2, seed=0)


def closed_form_param_count(config):
    chans = [1] + list(config.encoder_channels) + [config.latent_channels]
    chans += list(reversed(config.encoder_channels)) + [1]
    total = 0
    for c_in, c_out in zip(chans, chans[1:]):
        total += c_out * c_in * 9 + c_out
    return total


def test_parameter_count_matches_closed_form():
    model = build_model(default_config(64, seed=0))
    assert model.parameter_count == closed_form_param_count(model.config)
    assert model.parameter_count == 14217


def test_same_seed_bit_identical_parameters():
    a = build_model(default_config(32, seed=3))
    b = build_model(default_config(32, seed=3))
    c = build_model(default_config(32, seed=4))
    for name in a.params:
        assert np.array_equal(a.params[name], b.params[name])
    assert any(not np.array_equal(a.params[n], c.params[n]) for n in a.params)


def test_config_divisibility_rule():
    ModelConfig(input_size=60, encoder_channels=(16, 32))  # 60/4 = 15, fine
    with pytest.raises(ConfigError):
        ModelConfig(input_size=50, encoder_channels=(16, 32))  # 50/4 is not integral
    with pytest.raises(ConfigError):
        ModelConfig(input_size=64, encoder_channels=(0,))
    with pytest.raises(ConfigError):
        ModelConfig(input_size=4)


def test_forward_shape_and_sigmoid_range():
    model = build_model(default_config(32, seed=1))
    rng = np.random.default_rng(0)
    batch = rng.uniform(0, 1, (3, 1, 32, 32)).astype(F32)
    recon, latent, _ = model.forward(batch)
    assert recon.shape == batch.shape
    assert latent.shape == (3, 8, 8, 8)
    assert 0.0 < float(recon.min()) and float(recon.max()) < 1.0


def test_forward_latent_shape_default_64():
    model = build_model(default_config(64, seed=0))
    x = np.zeros((1, 1, 64, 64), dtype=F32)
    _, latent, _ = model.forward(x)
    assert latent.shape == (1, 8, 16, 16)


def test_forward_shape_mismatch():
    model = build_model(default_config(32, seed=0))
    with pytest.raises(DimensionError):
        model.forward(np.zeros((1, 1, 16, 16), dtype=F32))


def test_forward_shape_invariance_across_random_configs():
    rng = np.random.default_rng(5)
    for _ in range(5):
        n_pools = int(rng.integers(1, 3))
        size = int(rng.choice([16, 24, 32]))
        channels = tuple(int(rng.integers(1, 6)) for _ in range(n_pools))
        cfg = ModelConfig(input_size=size, encoder_channels=channels,
                          latent_channels=int(rng.integers(1, 5)), seed=int(rng.integers(100)))
        model = build_model(cfg)
        x = rng.uniform(0, 1, (2, 1, size, size)).astype(F32)
        recon, _, _ = model.forward(x)
        assert recon.shape == x.shape


def test_untrained_model_reconstruction_error_is_far_from_zero():
    # fresh models should not accidentally reconstruct; observed minimum over
    # 20 seeds on synthetic normals is ~2e-2, well above the 1e-3 bar
    worst = np.inf
    img = render_normal_image(SeededRng(0), 64)
    for seed in range(20):
        model = build_model(default_config(64, seed=seed))
        recon, _, _ = model.forward(img[None])
        worst = min(worst, mse_loss(recon[0], img).value)
    assert worst >= 1e-3


def test_initialization_statistics_he():
    # enc1 kernels: fan_in = 64 * 9 = 576, draws = 128 * 64 * 9 > 1e4
    cfg = ModelConfig(input_size=16, encoder_channels=(64, 128), latent_channels=4, seed=0)
    model = build_model(cfg)
    k = model.params["enc1.kernels"]
    target = (2.0 / (64 * 9)) ** 0.5
    assert abs(float(k.std()) - target) / target < 0.10
    assert not model.params["enc1.bias"].any()


def test_classifier_head_zero_latent_gives_half():
    cfg = ModelConfig(input_size=16, encoder_channels=(4,), latent_channels=4,
                      classifier_hidden=8, seed=0)
    model = build_model(cfg)
    latent = np.zeros((2, 4, 8, 8), dtype=F32)
    probs, _ = model.forward_classifier(latent)
    assert np.array_equal(probs, np.array([0.5, 0.5], dtype=F32))


def test_classifier_requires_head():
    model = build_model(default_config(16, seed=0))
    with pytest.raises(UnsupportedOperationError):
        model.forward_classifier(np.zeros((1, 8, 4, 4), dtype=F32))


def test_classifier_outputs_in_open_interval():
    cfg = ModelConfig(input_size=16, encoder_channels=(4,), latent_channels=4,
                      classifier_hidden=8, seed=1)
    model = build_model(cfg)
    rng = np.random.default_rng(2)
    latent = rng.uniform(0, 2, (5, 4, 8, 8)).astype(F32)
    probs, _ = model.forward_classifier(latent)
    assert np.all(probs > 0) and np.all(probs < 1)


def test_classifier_gradients_match_finite_differences():
    cfg = ModelConfig(input_size=8, encoder_channels=(2,), latent_channels=2,
                      classifier_hidden=3, seed=7)
    model = build_model(cfg)
    rng = np.random.default_rng(3)
    latent = rng.uniform(0.1, 1.0, (1, 2, 4, 4)).astype(F32)
    probs, cache = model.forward_classifier(latent)
    grads, grad_latent = model.classifier_backward(np.ones(1, dtype=F32), cache)

    def prob_of(params):
        return oracles.classifier_head_f64(params, latent[0])

    for name in ("head0.weights", "head0.bias", "head1.weights", "head1.bias"):
        def f(v, name=name):
            trial = {k: p.astype(np.float64) for k, p in model.params.items()}
            trial[name] = v
            return prob_of(trial)
        fd = oracles.central_diff(f, model.params[name])
        assert oracles.max_rel_err(grads[name], fd) <= 1e-3, name

    fd_latent = oracles.central_diff(
        lambda v: oracles.classifier_head_f64(model.params, v), latent[0])
    assert oracles.max_rel_err(grad_latent[0], fd_latent) <= 1e-3


def test_forward_agrees_with_float64_twin():
    model = build_model(TINY)
    rng = np.random.default_rng(21)
    x = rng.uniform(0, 1, (1, 1, 8, 8)).astype(F32)
    recon, latent, _ = model.forward(x)
    recon64, latent64 = oracles.autoencoder_f64(model.params, TINY.encoder_channels,
                                                TINY.latent_channels, x[0])
    assert np.allclose(recon[0], recon64, atol=1e-5)
    assert np.allclose(latent[0], latent64, atol=1e-5)


def test_end_to_end_gradient_matches_finite_differences():
    model = build_model(TINY)
    rng = np.random.default_rng(11)
    x = rng.uniform(0.1, 0.9, (1, 1, 8, 8)).astype(F32)

    recon, _, cache = model.forward(x)
    loss = mse_loss(recon, x)
    grads = model.backward(cache, loss.grad)

    loss_of = oracles.frozen_autoencoder_loss_f64(
        model.params, TINY.encoder_channels, TINY.latent_channels, x[0])

    for name in model.params:
        def f(v, name=name):
            trial = {k: p.astype(np.float64) for k, p in model.params.items()}
            trial[name] = v
            return loss_of(trial)
        fd = oracles.central_diff(f, model.params[name])
        assert oracles.max_rel_err(grads[name], fd) <= 1e-3, name


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = build_model(default_config(32, seed=5))
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path, metadata={"epochs": 3, "final_loss": 0.25, "seed": 5})
    back = load_checkpoint(path)
    assert back.config == model.config
    assert list(back.params) == list(model.params)
    for name in model.params:
        assert back.params[name].tobytes() == model.params[name].tobytes()
    assert back.metadata["epochs"] == 3

    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, (1, 1, 32, 32)).astype(F32)
    r1, _, _ = model.forward(img)
    r2, _, _ = back.forward(img)
    assert np.array_equal(r1, r2)


def test_checkpoint_save_deterministic(tmp_path):
    model = build_model(default_config(16, seed=1))
    assert checkpoint_bytes(model) == checkpoint_bytes(model)


def test_checkpoint_bad_magic():
    model = build_model(TINY)
    data = b"XXXX" + checkpoint_bytes(model)[4:]
    with pytest.raises(BadMagicError):
        load_checkpoint_bytes(data)


def test_checkpoint_unsupported_version():
    model = build_model(TINY)
    data = bytearray(checkpoint_bytes(model))
    data[4:8] = (99).to_bytes(4, "little")
    with pytest.raises(UnsupportedVersionError):
        load_checkpoint_bytes(bytes(data))


def test_checkpoint_truncation_names_byte_counts():
    model = build_model(TINY)
    data = checkpoint_bytes(model)
    truncated = data[:len(data) // 2]
    with pytest.raises(PayloadLengthError) as err:
        load_checkpoint_bytes(truncated)
    msg = str(err.value)
    assert "expected" in msg and f"has {len(truncated)}" in msg


def test_checkpoint_trailing_bytes():
    model = build_model(TINY)
    with pytest.raises(TrailingBytesError):
        load_checkpoint_bytes(checkpoint_bytes(model) + b"\x00")


def test_checkpoint_crc_mismatch():
    model = build_model(TINY)
    # flip a bit inside the final parameter payload: the file still parses
    # structurally, so the CRC is what catches the corruption
    data = bytearray(checkpoint_bytes(model))
    data[-8] ^= 0x01
    with pytest.raises(ChecksumError):
        load_checkpoint_bytes(bytes(data))


def test_expected_param_shapes_cover_model():
    cfg = ModelConfig(input_size=16, encoder_channels=(4,), latent_channels=4,
                      classifier_hidden=8, seed=0)
    model = build_model(cfg)
    shapes = expected_param_shapes(cfg)
    assert list(shapes) == list(model.params)
    assert all(model.params[k].shape == shapes[k] for k in shapes)
