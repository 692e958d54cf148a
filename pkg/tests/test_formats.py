import numpy as np
import pytest

from wavestate import formats
from wavestate import synthwave as sw
from wavestate.models import CaeSpec, build_cae, build_ffnn, ffnn_pair


def test_dataset_round_trip():
    cfg = sw.SynthConfig(trial_multiplier=0.1, record_length=1000)
    recs = sw.synth_dataset(cfg)
    blob = formats.encode_dataset(recs, cfg)
    back, cfg2 = formats.decode_dataset(blob)
    assert cfg2 == cfg and len(back) == len(recs) == 450
    for a, b in zip(recs, back):
        assert a.key == b.key and a.samples.tobytes() == b.samples.tobytes()
    assert formats.encode_dataset(back, cfg2) == blob


def test_dataset_errors():
    cfg = sw.SynthConfig(trial_multiplier=0.1, record_length=1000)
    blob = formats.encode_dataset(sw.synth_dataset(cfg), cfg)
    with pytest.raises(formats.FormatError):
        formats.decode_dataset(b"XXXX" + blob[4:])
    with pytest.raises(formats.FormatError):
        formats.decode_dataset(blob[:-3])
    with pytest.raises(formats.FormatError):
        formats.decode_dataset(blob[:4] + b"\x09\x00" + blob[6:])


@pytest.mark.parametrize("model_type", [1, 2, 3])
def test_cae_checkpoint_round_trip(model_type):
    cae = build_cae(CaeSpec(model_type, 5, 8), seed=3)
    blob = formats.cae_checkpoint(cae, {"seed": 3})
    back, meta = formats.load_cae(blob, model_type)
    assert meta["seed"] == 3 and meta["model_type"] == model_type
    for part in ("enc_params", "dec_params"):
        a, b = getattr(cae, part), getattr(back, part)
        assert all(a[i][k].tobytes() == b[i][k].tobytes() for i in a for k in a[i])
    assert formats.cae_checkpoint(back, {"seed": 3}) == blob


def test_checkpoint_type_mismatch_and_version():
    blob = formats.cae_checkpoint(build_cae(CaeSpec(2, first_filters=8)))
    with pytest.raises(formats.FormatError):
        formats.load_cae(blob, 3)
    with pytest.raises(formats.FormatError):
        formats.decode_checkpoint(blob[:4] + b"\x02\x00" + blob[6:])
    with pytest.raises(formats.FormatError):
        formats.load_ffnn(blob, "ffnn1")


def test_ffnn_checkpoint_round_trip():
    est, _ = ffnn_pair(CaeSpec(2))
    f = build_ffnn(est, seed=1)
    f.fit_scaling(np.random.default_rng(0).standard_normal((10, 7)), np.random.default_rng(1).standard_normal((10, 2)))
    back, _ = formats.load_ffnn(formats.ffnn_checkpoint(f, "ffnn1", 2), "ffnn1", 2)
    x = np.random.default_rng(2).standard_normal((3, 7))
    assert f(x).tobytes() == back(x).tobytes()


def test_tensor_block_layout():
    blob = formats.encode_checkpoint({"k": 1}, {"w": np.arange(6.0).reshape(2, 3)})
    assert blob[:4] == b"WSCK" and blob[4:6] == b"\x01\x00"
    # payload is little-endian f64 at the end
    assert np.frombuffer(blob[-48:], "<f8").tolist() == list(range(6))
    meta, t = formats.decode_checkpoint(blob)
    assert meta == {"k": 1} and t["w"].shape == (2, 3)


def test_atomic_write(tmp_path):
    p = tmp_path / "a.bin"
    formats.atomic_write(p, b"one")
    formats.atomic_write(p, "two")
    assert p.read_bytes() == b"two"
    assert [x.name for x in tmp_path.iterdir()] == ["a.bin"]
