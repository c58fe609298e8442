import numpy as np
import pytest

from stcnet import numerics as nx
from stcnet.data import PredictionWindow, space_to_depth
from stcnet.generator import (
    GeneratorConfig,
    GeneratorParams,
    decode_direction,
    default_mask,
    directional_rollout,
    fuse_hidden,
    predict_window,
    predict_windows,
    reverse_scheduled_mask,
)


def small(bidirectional=True, layers=2, context=3, predict=2, dtype=np.float64, seed=0):
    cfg = GeneratorConfig(num_layers=layers, hidden=3, kernel_size=3, patch=2, context=context, predict=predict,
                          bidirectional=bidirectional)
    return GeneratorParams(cfg, np.random.default_rng(seed), dtype=dtype)


def clip(rng, b, n, hw=4):
    return rng.random((b, n, 1, hw, hw))


def test_zigzag_identity_bit_exact(rng):
    g = small(layers=4, context=4, predict=3, dtype=np.float32)
    cfg = g.config
    before, after = clip(rng, 2, 4), clip(rng, 2, 4)
    mask = reverse_scheduled_mask(3, 0.5, 1.0, 10, rng, cfg, batch=2)
    pred = predict_window(g, before, after, (mask, mask))
    for roll in (pred.forward, pred.backward):
        assert not np.any(roll.m_in[0][0].data)  # zero state at the first step
        for s in range(1, len(roll.m_in)):
            assert np.array_equal(roll.m_in[s][0].data, roll.m_out[s - 1][-1].data)
            for l in range(1, cfg.num_layers):
                assert np.array_equal(roll.m_in[s][l].data, roll.m_out[s][l - 1].data)


def test_output_shape_and_increment_count(rng):
    g = small(context=3, predict=2)
    pred = predict_window(g, clip(rng, 2, 3), clip(rng, 2, 3))
    assert pred.frames.shape == (2, 2, 1, 4, 4)
    steps = 3 + 2 - 1
    assert len(pred.increments) == 2 * steps * 2  # directions x steps x layers


def test_fusion_is_mean_of_directional_estimates(rng):
    g = small()
    h_f = nx.Tensor(rng.normal(size=(2, 3, 2, 2)))
    h_b = nx.Tensor(rng.normal(size=(2, 3, 2, 2)))
    fused = fuse_hidden(h_f, h_b, g, to_frame=False).data
    mean = 0.5 * (decode_direction(h_f, g, "forward").data + decode_direction(h_b, g, "backward").data)
    np.testing.assert_allclose(fused, mean, rtol=1e-12, atol=1e-12)


def test_target_alignment(rng):
    g = small(context=3, predict=3)
    pred = predict_window(g, clip(rng, 1, 3), clip(rng, 1, 3))
    i, p = 3, 3
    for k in range(p):
        want = fuse_hidden(pred.forward.hidden[i - 1 + k], pred.backward.hidden[i - 1 + (p - 1 - k)], g).data
        np.testing.assert_array_equal(pred.frames.data[:, k], want)


def test_backward_stack_reads_reversed_after_context(rng):
    g = small(context=3, predict=2)
    after = clip(rng, 1, 3)
    pred = predict_window(g, clip(rng, 1, 3), after)
    # the first backward step consumes the frame right after the gap... read last-to-first
    first_input = space_to_depth(after, 2)[:, -1]
    roll = directional_rollout([nx.Tensor(first_input)], [True], 1, g.backward,
                               lambda h: decode_direction(h, g, "backward"))
    np.testing.assert_array_equal(roll.hidden[0].data, pred.backward.hidden[0].data)


def test_unidirectional_uses_forward_only(rng):
    g = small(bidirectional=False)
    assert g.backward == []
    before = clip(rng, 1, 3)
    a = predict_window(g, before, clip(rng, 1, 3)).frames.data
    b = predict_window(g, before, clip(rng, 1, 3)).frames.data
    np.testing.assert_array_equal(a, b)


def test_target_frames_never_consulted(rng):
    g = small()
    before, after = clip(rng, 1, 3)[0], clip(rng, 1, 3)[0]
    w1 = PredictionWindow(before, clip(rng, 1, 2)[0], after, 3)
    w2 = PredictionWindow(before, np.full((2, 1, 4, 4), np.nan), after, 3)
    np.testing.assert_array_equal(predict_windows(g, [w1]).frames.data, predict_windows(g, [w2]).frames.data)


def test_mask_validation(rng):
    g = small(context=3, predict=2)
    frames = [nx.Tensor(rng.random((1, 4, 2, 2))) for _ in range(3)]
    dec = lambda h: decode_direction(h, g)
    with pytest.raises(ValueError, match="first step"):
        directional_rollout(frames, [False, True, True, False], 2, g.forward, dec)
    with pytest.raises(ValueError, match="generation steps"):
        directional_rollout(frames, [True, True, True, True], 2, g.forward, dec)
    with pytest.raises(ValueError, match="covers"):
        directional_rollout(frames, [True, True], 2, g.forward, dec)


def test_per_sample_mask_matches_flat(rng):
    g = small(context=3, predict=2)
    before, after = clip(rng, 2, 3), clip(rng, 2, 3)
    flat = default_mask(g.config)
    per = np.stack([flat, np.array([True, False, True, False])])
    mixed = predict_window(g, before, after, (per, per)).frames.data
    ref = predict_window(g, before[:1], after[:1]).frames.data
    np.testing.assert_allclose(mixed[:1], ref, rtol=1e-12)
    assert not np.allclose(mixed[1:], predict_window(g, before[1:], after[1:]).frames.data)


def test_reverse_scheduled_mask_schedule():
    cfg = GeneratorConfig(context=8, predict=5)
    rng = np.random.default_rng(0)
    m = reverse_scheduled_mask(0, 0.5, 1.0, 100, rng, cfg, batch=4000)
    assert m.shape == (4000, 12)
    assert m[:, 0].all() and not m[:, 8:].any()
    assert abs(m[:, 1:8].mean() - 0.5) < 0.02
    mid = reverse_scheduled_mask(50, 0.5, 1.0, 100, rng, cfg, batch=4000)
    assert abs(mid[:, 1:8].mean() - 0.75) < 0.02
    done = reverse_scheduled_mask(100, 0.5, 1.0, 100, rng, cfg)
    np.testing.assert_array_equal(done, default_mask(cfg))
    with pytest.raises(ValueError):
        reverse_scheduled_mask(0, 1.5, 1.0, 100, rng, cfg)


def test_patch_must_divide_frame(rng):
    g = small()
    with pytest.raises(ValueError, match="patch"):
        predict_window(g, clip(rng, 1, 3, hw=5), clip(rng, 1, 3, hw=5))


def test_full_pass_gradcheck(rng):
    # one layer, context 1 and two generated frames: a two-step rollout per direction
    cfg = GeneratorConfig(num_layers=1, hidden=2, kernel_size=3, patch=2, context=1, predict=2)
    g = GeneratorParams(cfg, rng, dtype=np.float64)
    for p in g.parameters():
        p.data[...] = rng.normal(scale=0.8, size=p.shape)
    before, after = clip(rng, 2, 1), clip(rng, 2, 1)
    proj = rng.normal(size=(2, 2, 1, 4, 4))
    from stcnet.losses import decouple_loss

    def loss():
        pred = predict_window(g, before, after)
        return nx.tsum(pred.frames * proj) + decouple_loss(pred.increments)

    # h balances truncation against round-off for a loss of this magnitude
    assert nx.gradcheck(loss, g.parameters(), h=1e-5) < 1e-5
