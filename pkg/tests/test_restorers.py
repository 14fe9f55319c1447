import math
import sys
import textwrap

import numpy as np
import pytest

from sglc.hazelab import HazeField, smooth_depth_map, synthesize_haze, transmission
from sglc.lewin import LeWinConfig
from sglc.restorers import (
    ExternalProcessRestorer,
    HazeOracleParams,
    PatchSite,
    RestorerError,
    border_damage_restorer,
    haze_oracle_restorer,
    identity_restorer,
    lewin_restorer,
    run_restorer,
)


def test_identity_is_bit_exact(rng):
    p = rng.random((16, 16, 3), dtype=np.float32)
    assert np.array_equal(identity_restorer().restore(p), p)


def test_oracle_unit_transmission_is_identity(rng):
    p = rng.random((8, 8, 3), dtype=np.float32)
    r = haze_oracle_restorer(HazeOracleParams(np.float32(1.0), np.float32(0.9)))
    assert np.allclose(r.restore(p), p, atol=0)


def test_oracle_inverts_half_transmission(rng):
    clean = rng.random((32, 32, 3), dtype=np.float32)
    field = HazeField(math.log(2), np.ones((32, 32)), 1.0)
    t = transmission(field, (32, 32))
    hazy = synthesize_haze(clean, field, t=t)
    r = haze_oracle_restorer(HazeOracleParams(t, np.float32(1.0)))
    site = PatchSite("whole", lambda full: full)
    assert np.abs(r.restore(hazy, site) - clean).max() <= 1e-6


def test_oracle_black_patch():
    hazy = synthesize_haze(np.zeros((4, 4, 3), np.float32), HazeField(math.log(2), np.ones((4, 4)), 1.0))
    assert np.allclose(hazy, 0.5)
    r = haze_oracle_restorer(HazeOracleParams(np.float32(0.5), np.float32(1.0)))
    assert np.abs(r.restore(hazy)).max() <= 1e-7


def test_oracle_closure_random_smooth_depth(rng):
    for seed in range(5):
        clean = rng.random((48, 40, 3), dtype=np.float32)
        depth = smooth_depth_map((48, 40), seed=seed)
        field = HazeField(float(rng.uniform(0.3, 2.3)), depth, float(rng.uniform(0.7, 1.0)))
        t = transmission(field, (48, 40), t_min=0.1)
        hazy = synthesize_haze(clean, field, t=t)
        r = haze_oracle_restorer(HazeOracleParams(t, np.float32(field.atmospheric_light)))
        out = r.restore(hazy, PatchSite("whole", lambda full: full))
        assert np.abs(out - clean).max() <= 1e-5


def test_oracle_rejects_thin_medium():
    with pytest.raises(ValueError):
        haze_oracle_restorer(HazeOracleParams(np.full((4, 4), 0.05, np.float32), np.float32(1.0)))


def test_oracle_needs_site_for_maps():
    r = haze_oracle_restorer(HazeOracleParams(np.full((4, 4), 0.5, np.float32), np.float32(1.0)))
    with pytest.raises(ValueError):
        r.restore(np.zeros((4, 4, 3), np.float32))


def test_border_damage():
    ones = np.ones((8, 8, 1), np.float32)
    assert np.array_equal(border_damage_restorer(0).restore(ones), ones)
    out = border_damage_restorer(2, 0.0).restore(ones)
    assert out[2:6, 2:6].min() == 1 and out.sum() == 16
    assert ones.min() == 1  # input untouched
    with pytest.raises(ValueError):
        border_damage_restorer(4).restore(ones)


def test_lewin_restorer_shape_and_determinism(rng):
    cfg = LeWinConfig(channels=8, window=8, heads=2, seed=5)
    p = rng.random((64, 64, 3), dtype=np.float32)
    a = lewin_restorer(cfg, 64).restore(p)
    b = lewin_restorer(cfg, 64).restore(p)
    assert a.shape == p.shape and np.array_equal(a, b)
    assert not np.array_equal(a, lewin_restorer(LeWinConfig(8, 8, 2, seed=6), 64).restore(p))
    with pytest.raises(ValueError):
        lewin_restorer(cfg, 60)


def test_lewin_restorer_with_zero_block_is_identity(rng):
    from sglc.restorers import LeWinRestorer
    from sglc.lewin import init_weights

    cfg = LeWinConfig(channels=8, window=4, heads=2, seed=1)
    r = LeWinRestorer(cfg, 16, weights=init_weights(cfg).zeroed())
    p = rng.random((16, 16, 3), dtype=np.float32)
    assert np.abs(r.restore(p) - p).max() <= 1e-6


def test_lewin_restorer_matches_dense_oracle(rng):
    from oracles import dense_block
    from sglc.lewin import init_weights
    from sglc.restorers import LeWinRestorer

    cfg = LeWinConfig(channels=3, window=8, heads=1, seed=2)
    weights = init_weights(cfg)
    weights = type(weights)(**{**weights.__dict__, "bias_table": np.zeros_like(weights.bias_table)})
    r = LeWinRestorer(cfg, 8, channels=3, weights=weights)
    p = rng.random((8, 8, 3), dtype=np.float32)
    expected = np.clip(dense_block(p, weights), 0, 1)
    assert np.abs(r.restore(p) - expected).max() <= 1e-5


class _Wrong:
    patch_side = None

    def restore(self, patch, site=None):
        return patch[:-1]


def test_run_restorer_enforces_shape():
    with pytest.raises(RestorerError, match="grid patch 3"):
        run_restorer(_Wrong(), np.zeros((4, 4, 1), np.float32), PatchSite("grid patch 3", lambda a: a))


ECHO_CHILD = textwrap.dedent(
    """
    import sys
    from sglc.rawio import read_raw_stream, write_raw_stream
    inp, out = sys.stdin.buffer, sys.stdout.buffer
    while True:
        try:
            img = read_raw_stream(inp)
        except EOFError:
            break
        write_raw_stream(out, 1.0 - img)
        out.flush()
    """
)


@pytest.fixture
def echo_script(tmp_path):
    path = tmp_path / "child.py"
    path.write_text(ECHO_CHILD)
    return path


def test_external_process_restorer(rng, echo_script):
    with ExternalProcessRestorer([sys.executable, str(echo_script)], 8) as r:
        for _ in range(3):
            p = rng.random((8, 8, 3), dtype=np.float32)
            assert np.array_equal(r.restore(p), (1.0 - p).astype(np.float32))


def test_external_process_failure(tmp_path):
    bad = tmp_path / "bad.py"
    bad.write_text("import sys; sys.stdin.buffer.read(4)\n")
    r = ExternalProcessRestorer([sys.executable, str(bad)])
    with pytest.raises(RestorerError):
        r.restore(np.zeros((64, 64, 3), np.float32))
    r.close()


def test_generic_contract_over_all_restorers(rng):
    cfg = LeWinConfig(channels=8, window=8, heads=2, seed=0)
    restorers = [
        identity_restorer(),
        border_damage_restorer(2, 0.0),
        haze_oracle_restorer(HazeOracleParams(np.float32(0.6), np.float32(0.9))),
        lewin_restorer(cfg, 16),
    ]
    p = rng.random((16, 16, 3), dtype=np.float32)
    for r in restorers:
        a, b = r.restore(p.copy()), r.restore(p.copy())
        assert a.shape == p.shape and np.array_equal(a, b)
