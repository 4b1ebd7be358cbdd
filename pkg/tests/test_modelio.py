import numpy as np
import pytest

from zicae.autoencoder import AblationFlags, CsiInputs, TrainConfig, ZicAutoencoder
from zicae.channel import EquivalentChannel
from zicae.modelio import config_text, file_sha256, load_model, model_arrays, save_model

CFG = TrainConfig(n_channels=0, n_bits=2, batch=32, hidden_width=8, subnet2_width=4,
                  alpha_min=0.9, alpha_max=1.1, csi_mode="imperfect", sigma_e2=0.05)


def _model(seed=0, cfg=CFG):
    return ZicAutoencoder(cfg, np.random.default_rng(seed))


def test_roundtrip_preserves_everything(tmp_path):
    model = _model(1)
    model.rx1.bpn.running_ms[:] = [2.5, 0.75]  # non-default state must survive
    path = tmp_path / "m.zicmodel"
    save_model(path, model, CFG)
    loaded = load_model(path)

    for (name_a, a), (name_b, b) in zip(model_arrays(model), model_arrays(loaded)):
        assert name_a == name_b
        assert np.array_equal(a, b), name_a
    assert loaded.n_bits == model.n_bits
    assert loaded.csi_mode == model.csi_mode
    assert loaded.alpha_min == model.alpha_min
    assert loaded.alpha_max == model.alpha_max
    assert loaded.flags == model.flags
    assert loaded.arch_descriptor() == model.arch_descriptor()


def test_roundtrip_model_behaves_identically(tmp_path):
    model = _model(2)
    path = tmp_path / "m.zicmodel"
    save_model(path, model, CFG)
    loaded = load_model(path)
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, size=(16, 2)).astype(float)
    eq = EquivalentChannel(1 + 0j, 1 + 0j, 1 + 0j, 1.0, 0.1, 0.1)
    knows = CsiInputs(1.0, 1.0, 1.0, theta_delta=0.05)
    p_ref = model.forward(bits, bits, eq, knows, 0.1, rng=None)
    p_new = loaded.forward(bits, bits, eq, knows, 0.1, rng=None)
    assert np.array_equal(p_ref[0], p_new[0])
    assert np.array_equal(p_ref[1], p_new[1])


def test_save_is_byte_deterministic(tmp_path):
    model = _model(4)
    p1, p2 = tmp_path / "a.zicmodel", tmp_path / "b.zicmodel"
    save_model(p1, model, CFG)
    save_model(p2, model, CFG)
    assert p1.read_bytes() == p2.read_bytes()
    assert file_sha256(p1) == file_sha256(p2)


def test_flag_variants_roundtrip(tmp_path):
    cfg = TrainConfig(n_channels=0, batch=32, hidden_width=8, subnet2_width=4,
                      alpha_min=0.4, alpha_max=1.6,
                      flags=AblationFlags(use_shortcuts=False, use_subnet2=False,
                                          alpha_to_subnet2=False))
    model = ZicAutoencoder(cfg, np.random.default_rng(5))
    path = tmp_path / "lean.zicmodel"
    save_model(path, model, cfg)
    loaded = load_model(path)
    assert loaded.flags == cfg.flags
    assert len(loaded.params()) == len(model.params())


def test_config_text_round_trips_floats():
    text = config_text(CFG)
    assert "alpha_min=0.9" in text
    assert "csi_mode=imperfect" in text
    assert text == config_text(CFG)


def test_load_rejects_non_model(tmp_path):
    path = tmp_path / "junk.zicmodel"
    path.write_bytes(b"not a model at all")
    with pytest.raises(ValueError):
        load_model(path)
