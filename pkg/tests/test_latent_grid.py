import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridswitch.errors import ContractViolation
from gridswitch.latent_grid import (
    BinaryMask,
    GridSpec,
    LatentTensor,
    SwitchTimeMatrix,
    build_mask,
    composite_latents,
    load_stm,
    resize_map,
    save_stm,
    validate_stm,
)


def bilinear_oracle(src, H, W):
    """Pixel-by-pixel bilinear resize, half-pixel centres, clamped edges."""
    h, w = len(src), len(src[0])
    out = [[0.0] * W for _ in range(H)]
    for i in range(H):
        sy = min(max((i + 0.5) * h / H - 0.5, 0.0), h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for j in range(W):
            sx = min(max((j + 0.5) * w / W - 0.5, 0.0), w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            top = src[y0][x0] * (1 - fx) + src[y0][x1] * fx
            bot = src[y1][x0] * (1 - fx) + src[y1][x1] * fx
            out[i][j] = top * (1 - fy) + bot * fy
    return np.array(out)


def _latent(values, step=3):
    return LatentTensor(np.asarray(values, dtype=float), step)


# build_mask

def test_mask_example():
    stm = SwitchTimeMatrix(np.array([[5.0, 10.0], [15.0, 20.0]]), 20)
    np.testing.assert_array_equal(build_mask(stm, 12).mask, [[0, 0], [1, 1]])


def test_mask_before_any_switch_is_zero():
    stm = SwitchTimeMatrix(np.array([[5.0, 10.0], [15.0, 20.0]]), 30)
    assert not build_mask(stm, 21).mask.any()


def test_mask_at_zero_is_all_ones():
    stm = SwitchTimeMatrix(np.array([[0.0, 3.5], [7.0, 9.0]]), 10)
    assert build_mask(stm, 0).mask.all()


def test_mask_rejects_step_outside_range():
    stm = SwitchTimeMatrix.uniform((2, 2), 3, 10)
    with pytest.raises(ContractViolation):
        build_mask(stm, 11)
    with pytest.raises(ContractViolation):
        build_mask(stm, -1)


@given(
    arrays(float, (4, 5), elements=st.floats(0, 20)),
    st.integers(0, 20),
    st.integers(0, 20),
)
def test_mask_monotone_in_step(times, t1, t2):
    stm = SwitchTimeMatrix(times, 20)
    hi, lo = max(t1, t2), min(t1, t2)
    assert np.all(build_mask(stm, hi).mask <= build_mask(stm, lo).mask)


# composite_latents

def test_composite_examples():
    a = _latent(np.arange(12.0).reshape(3, 2, 2))
    b = _latent(-np.arange(12.0).reshape(3, 2, 2))
    ones = BinaryMask(np.ones((2, 2), np.uint8), 3)
    zeros = BinaryMask(np.zeros((2, 2), np.uint8), 3)
    np.testing.assert_array_equal(composite_latents(ones, a, b).data, b.data)
    np.testing.assert_array_equal(composite_latents(zeros, a, b).data, a.data)
    out = composite_latents(BinaryMask(np.array([[1, 0]], np.uint8), 3), _latent([[[1, 2]]]), _latent([[[9, 8]]]))
    np.testing.assert_array_equal(out.data, [[[9, 2]]])
    assert out.step == 3


def test_composite_rejects_mismatch():
    a = _latent(np.zeros((2, 2, 2)))
    with pytest.raises(ContractViolation):
        composite_latents(BinaryMask(np.ones((2, 2), np.uint8), 3), a, _latent(np.zeros((2, 2, 3))))
    with pytest.raises(ContractViolation):
        composite_latents(BinaryMask(np.ones((2, 2), np.uint8), 3), a, _latent(np.zeros((2, 2, 2)), step=4))
    with pytest.raises(ContractViolation):
        composite_latents(BinaryMask(np.ones((3, 2), np.uint8), 3), a, a)


latents = arrays(float, (2, 3, 4), elements=st.floats(-1e6, 1e6))
masks = arrays(np.uint8, (3, 4), elements=st.integers(0, 1))


@given(masks, latents, latents)
def test_composite_idempotent(m, a, b):
    mask, xa, xb = BinaryMask(m, 1), _latent(a, 1), _latent(b, 1)
    once = composite_latents(mask, xa, xb)
    np.testing.assert_array_equal(composite_latents(mask, xa, once).data, once.data)


@given(masks, latents, latents)
def test_composite_complement_symmetry(m, a, b):
    xa, xb = _latent(a, 1), _latent(b, 1)
    left = composite_latents(BinaryMask(m, 1), xa, xb)
    right = composite_latents(BinaryMask((1 - m).astype(np.uint8), 1), xb, xa)
    np.testing.assert_array_equal(left.data, right.data)
    assert left.data.shape == a.shape and np.all(np.isfinite(left.data))


def test_latent_rejects_nonfinite():
    with pytest.raises(ContractViolation):
        LatentTensor(np.array([[[np.nan]]]), 0)


# resize_map

def test_resize_identity_returns_input():
    m = np.random.default_rng(0).random((5, 7))
    np.testing.assert_array_equal(resize_map(m, (5, 7)), m)


@pytest.mark.parametrize("target", [(1, 1), (3, 9), (16, 16), (2, 1)])
def test_resize_constant(target):
    np.testing.assert_array_equal(resize_map(np.full((4, 3), 0.7), target), np.full(target, 0.7))


def test_resize_ramp_against_oracle():
    src = [[0.0, 1.0], [0.0, 1.0]]
    out = resize_map(np.array(src), (4, 4))
    assert np.all(np.diff(out, axis=1) >= 0)
    np.testing.assert_allclose(out, bilinear_oracle(src, 4, 4), atol=1e-12, rtol=0)


@given(
    arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-10, 10)),
    st.integers(1, 12),
    st.integers(1, 12),
)
def test_resize_matches_oracle_and_range(src, H, W):
    out = resize_map(src, (H, W))
    np.testing.assert_allclose(out, bilinear_oracle(src.tolist(), H, W), atol=1e-12, rtol=0)
    assert out.min() >= src.min() and out.max() <= src.max()


def test_resize_rejects_empty():
    with pytest.raises(ContractViolation):
        resize_map(np.zeros((0, 3)), (2, 2))


# validate_stm and persistence

def test_validate_in_range():
    assert validate_stm(SwitchTimeMatrix(np.array([[0.0, 5.0], [10.0, 2.5]]), 10))


def test_validate_names_offending_cell():
    times = np.full((3, 3), 4.0)
    times[1, 2] = 11.0
    report = validate_stm(SwitchTimeMatrix(times, 10))
    assert not report
    assert len(report.violations) == 1 and "(1, 2)" in report.violations[0]


def test_validate_flags_nan():
    times = np.zeros((2, 2))
    times[0, 1] = np.nan
    report = validate_stm(SwitchTimeMatrix(times, 10))
    assert not report and "(0, 1)" in report.violations[0]


def test_validate_shape_mismatch():
    assert not validate_stm(SwitchTimeMatrix(np.zeros((2, 2)), 10), latent_shape=(3, 3))


def test_stm_round_trip(tmp_path):
    times = np.random.default_rng(1).uniform(0, 50, (6, 4)).astype(np.float32).astype(float)
    path = save_stm(SwitchTimeMatrix(times, 50), tmp_path / "stm_001.bin")
    assert path.stat().st_size == 6 * 4 * 4
    back = load_stm(path)
    np.testing.assert_array_equal(back.times, times)
    assert back.total_steps == 50
    assert np.frombuffer(path.read_bytes(), "<f4")[1] == np.float32(times[0, 1])


# GridSpec

def test_grid_expand_exact():
    g = GridSpec(4, 6, 2, 3)
    assert g.exact
    out = g.expand(np.array([[1, 2, 3], [4, 5, 6]]))
    np.testing.assert_array_equal(out[:2, :2], 1)
    np.testing.assert_array_equal(out[2:, 4:], 6)


def test_grid_expand_resampled():
    g = GridSpec(5, 5, 2, 2)
    assert not g.exact
    out = g.expand(np.array([[0, 1], [2, 3]]))
    assert out.shape == (5, 5) and set(np.unique(out)) == {0, 1, 2, 3}


def test_grid_rejects_nonpositive():
    with pytest.raises(ContractViolation):
        GridSpec(4, 4, 0, 2)
