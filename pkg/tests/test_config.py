import pytest

from wavestate import config as cf


def test_defaults_round_trip():
    cfg = cf.RunConfig()
    assert cf.parse(cfg.to_text()) == cf.parse(cf.parse(cfg.to_text()).to_text())


def test_parse_values():
    text = """
    # desk run
    synth.trial_multiplier = 0.25
    cae.latent_width = 5
    cae_train.epochs = 3   # short
    out = runs/a
    seed = 4
    split.per_load = [[20, 1, 1]]
    """
    cfg = cf.parse(text)
    assert cfg.synth.trial_multiplier == 0.25
    assert cfg.cae.latent_width == 5
    assert cfg.cae_train.epochs == 3 and cfg.cae_train.seed == 4 and cfg.ffnn_train.seed == 4
    assert cfg.out == "runs/a"
    assert cfg.split.per_load == ((20, 1, 1),)


def test_unknown_key_has_line_number():
    with pytest.raises(cf.ConfigError) as info:
        cf.parse("seed = 1\ncae.width = 3\n")
    assert info.value.line == 2


def test_bad_lines():
    with pytest.raises(cf.ConfigError):
        cf.parse("just words")
    with pytest.raises(cf.ConfigError) as info:
        cf.parse("\n\nsynth.noise_std = -1\n")
    assert info.value.line == 3


def test_split_defaults_follow_multiplier():
    cfg = cf.parse("synth.trial_multiplier = 0.25")
    assert cfg.split_spec().counts(0) == (2, 3)
