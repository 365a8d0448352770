import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridswitch.backends.stubs import StubEmbedder, StubPerceptual
from gridswitch.errors import ContractViolation
from gridswitch.metrics import (
    MetricsReport,
    clip_score,
    combined_loss,
    evaluate_video,
    farneback_flow,
    lpips,
    ms_ssim,
    msssim_scale_count,
    temporal_consistency,
)
from gridswitch.metrics.flow import warp_error

from conftest import smooth_texture

# dyadic values so every normalized term is exact in binary floating point
HAND_TABLE = [
    {"config_id": "A", "ms_ssim": 1.0, "lpips": 0.375, "temporal_consistency": 0.25},
    {"config_id": "B", "ms_ssim": 0.5, "lpips": 0.625, "temporal_consistency": 0.5},
    {"config_id": "C", "ms_ssim": 0.75, "lpips": 0.125, "temporal_consistency": 1.25},
]
# A: (1-1) + 0.5 + 0    = 0.5
# B: (1-0) + 1   + 0.25 = 2.25
# C: (1-.5) + 0  + 1    = 1.5
HAND_LOSS = {"A": 0.5, "B": 2.25, "C": 1.5}


def ssim_oracle(x, y):
    """Single-scale SSIM by explicit loops over every valid 11x11 window."""
    g = [math.exp(-((k - 5) ** 2) / (2 * 1.5**2)) for k in range(11)]
    s = sum(g)
    g = [v / s for v in g]
    c1, c2 = 0.01**2, 0.03**2
    h, w = x.shape
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            mx = my = sxx = syy = sxy = 0.0
            for a in range(11):
                for b in range(11):
                    wt = g[a] * g[b]
                    p, q = x[i + a, j + b], y[i + a, j + b]
                    mx += wt * p
                    my += wt * q
                    sxx += wt * p * p
                    syy += wt * q * q
                    sxy += wt * p * q
            vx, vy, cxy = sxx - mx * mx, syy - my * my, sxy - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)


# MS-SSIM

def test_ms_ssim_identical():
    img = smooth_texture(64, 1)
    assert abs(ms_ssim(img, img) - 1.0) < 1e-6
    rgb = np.stack([img, img[::-1], img.T], axis=-1)
    assert abs(ms_ssim(rgb, rgb) - 1.0) < 1e-6


def test_ms_ssim_shift_beats_noise():
    tex = smooth_texture(200, 2)
    shifted = np.roll(tex, 2, axis=1)
    rng = np.random.default_rng(0)
    assert ms_ssim(tex, shifted) > ms_ssim(rng.random((200, 200)), rng.random((200, 200)))


def test_single_scale_matches_oracle():
    rng = np.random.default_rng(5)
    x = smooth_texture(24, 3)
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    assert abs(ms_ssim(x, y, scales=1) - ssim_oracle(x, y)) < 1e-9


def test_scale_count_rule():
    assert msssim_scale_count((176, 300)) == 5
    assert msssim_scale_count((175, 300)) == 4
    assert msssim_scale_count((64, 64, 3)) == 3
    assert msssim_scale_count((11, 11)) == 1
    with pytest.raises(ContractViolation):
        msssim_scale_count((10, 40))


def test_ms_ssim_symmetric_and_bounded():
    rng = np.random.default_rng(8)
    a, b = rng.random((48, 48)), smooth_texture(48, 4)
    v = ms_ssim(a, b)
    assert v == ms_ssim(b, a) and 0 <= v < 1


def test_ms_ssim_shape_mismatch():
    with pytest.raises(ContractViolation):
        ms_ssim(np.zeros((32, 32)), np.zeros((32, 33)))
    with pytest.raises(ContractViolation):
        ms_ssim(np.zeros((32, 32)), np.zeros((32, 32)), scales=3)


# LPIPS via the stub backend

def test_lpips_contract():
    p = StubPerceptual()
    tex = smooth_texture(64, 6)
    rng = np.random.default_rng(1)
    noise_a, noise_b = rng.random((64, 64)), rng.random((64, 64))
    assert lpips(tex, tex, p) == 0
    assert abs(lpips(tex, noise_a, p) - lpips(noise_a, tex, p)) < 1e-9
    assert lpips(noise_a, noise_b, p) > lpips(tex, np.roll(tex, 2, axis=1), p)


# optical flow

def test_flow_zero_motion():
    tex = smooth_texture(64, 7)
    f = farneback_flow(tex, tex)
    assert np.abs(f.u).mean() < 0.05 and np.abs(f.v).mean() < 0.05


def test_flow_recovers_translation():
    tex = smooth_texture(256, 8, sigma=3.0)
    moved = np.roll(np.roll(tex, 3, axis=0), 2, axis=1)
    u, v = farneback_flow(tex, moved).mean
    assert abs(u - 2) < 0.5 and abs(v - 3) < 0.5


def test_flow_forward_backward():
    tex = smooth_texture(128, 9, sigma=3.0)
    moved = np.roll(np.roll(tex, 1, axis=0), -1, axis=1)
    fwd, bwd = farneback_flow(tex, moved), farneback_flow(moved, tex)
    assert np.abs(fwd.u + bwd.u).mean() < 0.5 and np.abs(fwd.v + bwd.v).mean() < 0.5


def test_flow_needs_room():
    with pytest.raises(ValueError):
        farneback_flow(np.zeros((10, 10)), np.ones((10, 10)))


# temporal consistency

def translation_video(n=24, size=96, seed=10):
    big = smooth_texture(size + n + 4, seed, sigma=3.0)
    return [big[4:4 + size, k:k + size] for k in range(n)]


def test_tc_static_zero():
    tex = smooth_texture(64, 11)
    assert temporal_consistency([tex] * 6) < 1e-6


def test_tc_smooth_beats_shuffled():
    frames = translation_video()
    smooth = temporal_consistency(frames)
    rng = np.random.default_rng(0)
    order = rng.permutation(len(frames))
    assert smooth < temporal_consistency([frames[i] for i in order])


def test_tc_needs_two_frames():
    with pytest.raises(ValueError):
        temporal_consistency([np.zeros((32, 32))])


def test_tc_appended_copy_adds_zero():
    frames = translation_video(n=5, size=64)
    base = [warp_error(a, b) for a, b in zip(frames, frames[1:])]
    extended = temporal_consistency(frames + [frames[-1]])
    assert extended == pytest.approx(sum(base) / (len(base) + 1), abs=1e-12)


# CLIP-style score

class FixedEmbed:
    def __init__(self, text_vec, image_vecs):
        self.text_vec, self.image_vecs = np.asarray(text_vec, float), list(image_vecs)

    def embed_text(self, text):
        return self.text_vec

    def embed_image(self, image):
        return np.asarray(self.image_vecs[int(image[0, 0])], float)


def test_clip_score_rules():
    frames = [np.full((4, 4), i) for i in range(3)]
    same = FixedEmbed([1, 0], [[1, 0]] * 3)
    ortho = FixedEmbed([1, 0], [[0, 1]] * 3)
    assert clip_score(frames, "x", same) == 1.0
    assert clip_score(frames, "x", ortho) == 0.0
    mixed = FixedEmbed([1, 0], [[1, 0], [0, 1], [math.sqrt(0.5), math.sqrt(0.5)]])
    assert clip_score(frames, "x", mixed) == pytest.approx((1 + 0 + math.sqrt(0.5)) / 3, abs=1e-15)


def test_clip_score_stub_range():
    v = clip_score([smooth_texture(32, 1)] * 2, "a fox", StubEmbedder())
    assert -1 <= v <= 1


# combined loss

def test_combined_loss_hand_table():
    ranked = combined_loss(HAND_TABLE)
    assert [r.config_id for r in ranked] == ["A", "C", "B"]
    assert {r.config_id: r.loss for r in ranked} == HAND_LOSS


def test_combined_loss_single_row_zero():
    assert combined_loss(HAND_TABLE[:1])[0].loss == 0.0


def test_combined_loss_duplicate_best():
    ranked = combined_loss(HAND_TABLE + [dict(HAND_TABLE[0], config_id="A2")])
    assert ranked[0].loss == HAND_LOSS["A"]


def test_combined_loss_missing_metric():
    rows = [dict(HAND_TABLE[0]), {"config_id": "X", "ms_ssim": 0.5, "lpips": 0.1}]
    with pytest.raises(ValueError, match="'X'.*temporal_consistency"):
        combined_loss(rows)


@given(
    st.lists(st.tuples(*[st.floats(0, 1)] * 3), min_size=1, max_size=8),
    st.sampled_from(["ms_ssim", "lpips", "temporal_consistency"]),
    st.floats(0.5, 4),
    st.floats(-2, 2),
)
def test_combined_loss_affine_invariant(vals, col, scale, shift):
    # scale and shift values are powers of two or exact halves to keep the check exact
    scale, shift = 2.0 ** round(math.log2(scale)), round(shift * 4) / 4
    rows = [{"config_id": str(i), "ms_ssim": a, "lpips": b, "temporal_consistency": c} for i, (a, b, c) in enumerate(vals)]
    moved = [dict(r, **{col: r[col] * scale + shift}) for r in rows]
    before = [r.config_id for r in combined_loss(rows)]
    after = [r.config_id for r in combined_loss(moved)]
    lb = {r.config_id: r.loss for r in combined_loss(rows)}
    la = {r.config_id: r.loss for r in combined_loss(moved)}
    for k in lb:
        assert la[k] == pytest.approx(lb[k], abs=1e-9)
    if len(set(lb.values())) == len(lb):
        assert before == after


# report

def test_report_rows_and_std_over_videos():
    p, e = StubPerceptual(), StubEmbedder()
    static = [smooth_texture(64, 1)] * 3
    moving = translation_video(n=3, size=64)
    v1 = evaluate_video("static", static, perceptual=p, embedding=e, text="a fox")
    v2 = evaluate_video("moving", moving, perceptual=p, embedding=e, text="a fox")
    assert v1.temporal_consistency < 1e-6 and abs(v1.ms_ssim - 1) < 1e-6 and v1.lpips == 0
    assert v1.ms_ssim_scales == 3
    report = MetricsReport([v1, v2])
    rows = report.rows()
    assert [r["config_id"] for r in rows] == ["static", "moving", "aggregate"]
    agg = rows[-1]
    assert agg["tc_mean"] == pytest.approx((v1.temporal_consistency + v2.temporal_consistency) / 2)
    assert agg["tc_std"] == pytest.approx(abs(v1.temporal_consistency - v2.temporal_consistency) / 2)
    with pytest.raises(ValueError):
        evaluate_video("one", static[:1])
