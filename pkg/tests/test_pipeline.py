import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wavestate import pipeline as pl
from wavestate import synthwave as sw


@pytest.fixture(scope="module")
def small():
    return sw.synth_dataset(sw.SynthConfig(trial_multiplier=0.1, record_length=2000))


def test_downsample_examples():
    assert pl.downsample(np.arange(6.0), 2).tolist() == [0, 2, 4]
    x = np.random.default_rng(0).standard_normal(8000)
    assert len(pl.downsample(x, 10)) == 800
    assert np.array_equal(pl.downsample(x, 1), x)
    with pytest.raises(ValueError):
        pl.downsample(np.arange(7.0), 2)


def test_standardize_examples():
    assert pl.standardize(np.array([0.0, 2.0])).tolist() == [-1.0, 1.0]
    with pytest.raises(pl.DegenerateRecordError):
        pl.standardize(np.ones(4))


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(2, 400), elements=finite))
def test_standardize_properties(x):
    if np.std(x) < 1e-6 * max(1.0, np.max(np.abs(x))):
        return
    y = pl.standardize(x)
    assert abs(y.mean()) < 1e-9
    assert abs(y.std() - 1) < 1e-9
    np.testing.assert_allclose(pl.standardize(y), y, atol=1e-12)


def test_tensor_layouts(small):
    recs = pl.preprocess(small, 10)
    t1 = pl.build_tensor(recs, 1)
    t2 = pl.build_tensor(recs, "TypeII")
    t3 = pl.build_tensor(recs, 3)
    assert t1.data.shape == (450, 200)
    assert t2.data.shape == (50, 200, 9)
    assert t3.data.shape == (50, 200, 3, 3)
    assert np.array_equal(t2.data.reshape(50, 200, 3, 3), t3.data)
    assert sorted(t2.data.ravel()) == sorted(t3.data.ravel())
    assert t1.labels.shape == (450, 3) and t2.labels.shape == (50, 2)
    # path axis is ordered 1..9, and axis 2/3 of TypeIII are actuator/receiver
    row = [r for r in recs if r.state.k1 == 2 and r.state.k2 == 5 and r.trial == 1]
    i = int(np.where((t3.labels[:, 0] == 2) & (t3.labels[:, 1] == 5) & (t3.trials == 1))[0][0])
    for r in row:
        a, rc = r.path
        assert np.array_equal(t3.data[i, :, a - 1, rc - 4], r.samples)
        assert np.array_equal(t2.data[i, :, sw.path_index(r.path) - 1], r.samples)


def test_full_census_rows():
    # Type II groups 9 paths per (state, trial): 20*20 + 5*2 rows at full scale
    assert sum(sw.n_trials(k2) for _ in sw.DAMAGE_LEVELS for k2 in sw.LOADS_KN) == 410


def test_missing_path(small):
    recs = [r for r in pl.preprocess(small, 10) if not (r.key == (1, 5, 3, 0))]
    with pytest.raises(pl.MissingPathError) as info:
        pl.build_tensor(recs, 2)
    assert "1-6" in str(info.value)


def test_full_scale_split_counts():
    recs = sw.synth_dataset(sw.SynthConfig(record_length=2000, noise_std=0.0))
    spec = pl.SplitSpec()
    train, test = pl.split(recs, spec)
    by = lambda rs, k2: {r.trial for r in rs if r.state.k2 == k2 and r.path == (1, 4) and r.state.k1 == 0}
    assert by(train, 0) == set(range(8)) and by(test, 0) == set(range(8, 20))
    assert by(train, 20) == {0} and by(test, 20) == {1}
    assert len(train) + len(test) == 3690


def test_scaled_split():
    s = pl.SplitSpec.scaled(0.25)
    assert (s.train_trials, s.test_trials, s.counts(20)) == (2, 3, (1, 1))
    assert pl.SplitSpec.scaled(1.0).counts(0) == (8, 12)


def test_exclude_load(small):
    spec = pl.SplitSpec(1, 1, ((20, 1, 1),), (10,))
    train, test = pl.split(small, spec)
    assert not any(r.state.k2 == 10 for r in train)
    assert any(r.state.k2 == 10 for r in test)
    keys_tr = {r.key for r in train}
    assert keys_tr.isdisjoint({r.key for r in test})


def test_infeasible_split(small):
    with pytest.raises(ValueError):
        pl.split(small, pl.SplitSpec(2, 1))
    with pytest.raises(ValueError):
        pl.SplitSpec(0, 1)
    with pytest.raises(ValueError):
        pl.SplitSpec(exclude_train_loads=(7,))


def test_prepare_preserves_standardization(small):
    train, test = pl.prepare(small, pl.SplitSpec(1, 1), 2, factor=10)
    flat = train.data.transpose(0, 2, 1).reshape(-1, train.data.shape[1])
    assert np.all(np.abs(flat.mean(1)) < 1e-9)
    assert np.all(np.abs(flat.std(1) - 1) < 1e-9)
