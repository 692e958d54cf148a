import numpy as np
import pytest

from tables import TABLES, TOTALS
from wavestate import nn
from wavestate.models import (
    SWEEP_FILTERS,
    SWEEP_LATENT_WIDTHS,
    CaeSpec,
    build_cae,
    build_ffnn,
    count_parameters,
    ffnn_pair,
    layer_table,
)


@pytest.mark.parametrize("model_type", [1, 2, 3])
def test_totals(model_type):
    spec = CaeSpec(model_type)
    assert (count_parameters(spec, "encoder"), count_parameters(spec, "decoder")) == TOTALS[model_type]


@pytest.mark.parametrize("model_type", [1, 2, 3])
def test_layer_rows(model_type):
    assert layer_table(CaeSpec(model_type)) == TABLES[model_type]


def test_per_layer_sums_match_totals():
    for mt, rows in TABLES.items():
        enc = sum(r[3] for r in rows if r[0] == "encoder")
        dec = sum(r[3] for r in rows if r[0] == "decoder")
        assert (enc, dec) == TOTALS[mt]


def test_type_ii_small_filters_first_conv():
    enc, _ = build_cae(CaeSpec(2, first_filters=8)).encoder, None
    assert nn.layer_parameter_counts(enc)[0] == 80


def test_count_parameters_rejects_unknown_part():
    with pytest.raises(ValueError):
        count_parameters(CaeSpec(1), "middle")


@pytest.mark.parametrize("model_type,latent", [(1, (7,)), (2, (7,)), (3, (800, 7))])
def test_encode_decode_shapes(model_type, latent):
    cae = build_cae(CaeSpec(model_type, first_filters=8), seed=1)
    row = np.random.default_rng(0).standard_normal(cae.spec.row_shape)
    z = cae.encode(row)
    assert z.shape == latent
    assert cae.decode(z).shape == cae.spec.input_shape
    assert cae.reconstruct(row).shape == cae.spec.row_shape


@pytest.mark.parametrize("model_type", [1, 2, 3])
def test_sweep_configs_preserve_shape(model_type):
    rng = np.random.default_rng(2)
    for d in SWEEP_LATENT_WIDTHS:
        for f in SWEEP_FILTERS:
            spec = CaeSpec(model_type, d, f, signal_length=24)
            cae = build_cae(spec, seed=0)
            x = rng.standard_normal((2,) + spec.row_shape)
            assert cae.reconstruct(x).shape == x.shape
            assert cae.encode(x).shape == (2,) + spec.latent_shape


def test_zero_init_gives_zero_latent():
    cae = build_cae(CaeSpec(2, first_filters=8), scheme="zeros")
    z = cae.encode(np.random.default_rng(0).standard_normal((800, 9)))
    assert np.all(z == 0)


def test_encode_rejects_wrong_layout():
    cae = build_cae(CaeSpec(2, first_filters=8))
    with pytest.raises(nn.ShapeError):
        cae.encode(np.zeros((800, 8)))
    with pytest.raises(nn.ShapeError):
        cae.decode(np.zeros(6))


def test_ffnn_pair_mirrors():
    est, gen = ffnn_pair(CaeSpec(2))
    assert (est.input_width, est.output_width) == (7, 2)
    assert (gen.input_width, gen.output_width) == (2, 7)
    assert gen.mirror() == est
    est1, _ = ffnn_pair(CaeSpec(1))
    assert est1.output_width == 3
    est3, gen3 = ffnn_pair(CaeSpec(3))
    assert est3.input_width == 5600 and gen3.output_width == 5600


def test_ffnn_parameter_count():
    est, _ = ffnn_pair(CaeSpec(2))
    assert nn.count_parameters(build_ffnn(est).network) == 7 * 64 + 64 + 4 * (64 * 64 + 64) + 64 * 2 + 2 == 17282


def test_spec_validation():
    with pytest.raises(ValueError):
        CaeSpec(4)
    with pytest.raises(ValueError):
        CaeSpec(1, first_filters=7)
    with pytest.raises(nn.ShapeError):
        build_cae(CaeSpec(1, signal_length=802))
