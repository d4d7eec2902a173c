import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mindmesh.errors import ContractError, DegenerateSequenceError
from mindmesh.geometry import PositionMap
from mindmesh.metrics import (
    MetricRow,
    nmae,
    nrmse,
    read_report_csv,
    report_table,
    sequence_errors,
)


def random_sequence(rng, frames=3, size=12, fill=0.6):
    mask = (rng.random((size, size)) < fill).astype(np.uint8)
    mask[0, 0] = 1
    truth = [PositionMap(rng.normal(size=(size, size, 3)).astype(np.float32) * mask[..., None], mask)
             for _ in range(frames)]
    pred = [PositionMap((t.data + rng.normal(scale=0.3, size=t.data.shape)).astype(np.float32), mask)
            for t in truth]
    return pred, truth


def brute(pred, truth):
    """Flat loops with compensated summation."""
    abs_err, sq_err, values = [], [], []
    for p, t in zip(pred, truth):
        h, w, _ = t.data.shape
        for i in range(h):
            for j in range(w):
                if not t.mask[i, j]:
                    continue
                for c in range(3):
                    d = float(p.data[i, j, c]) - float(t.data[i, j, c])
                    abs_err.append(abs(d))
                    sq_err.append(d * d)
                    values.append(float(t.data[i, j, c]))
    rng_ = max(values) - min(values)
    n = len(abs_err)
    return math.fsum(abs_err) / n / rng_, math.sqrt(math.fsum(sq_err) / n) / rng_


def test_identical_is_zero():
    _, truth = random_sequence(np.random.default_rng(0))
    assert nmae(truth, truth) == 0.0 and nrmse(truth, truth) == 0.0


def test_offset_over_ten_unit_range():
    mask = np.ones((4, 4), np.uint8)
    data = np.zeros((4, 4, 3), np.float32)
    data[0, 0, 0], data[3, 3, 2] = -5.0, 5.0
    truth = PositionMap(data, mask)
    pred = PositionMap(data + np.float32(0.01), mask)
    assert nmae(pred, truth) == pytest.approx(0.001, rel=1e-5)
    assert nrmse(pred, truth) == pytest.approx(0.001, rel=1e-5)


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force(seed):
    pred, truth = random_sequence(np.random.default_rng(seed))
    e = sequence_errors(pred, truth)
    bm, br = brute(pred, truth)
    assert abs(e.nmae - bm) < 1e-9 and abs(e.nrmse - br) < 1e-9


def test_nrmse_at_least_nmae_on_100_pairs():
    rng = np.random.default_rng(11)
    for _ in range(100):
        pred, truth = random_sequence(rng, frames=2, size=8)
        assert nrmse(pred, truth) >= nmae(pred, truth)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 100.0))
def test_scale_invariance(seed, s):
    pred, truth = random_sequence(np.random.default_rng(seed), frames=1, size=6)
    a = sequence_errors(pred, truth)
    scaled = lambda seq: [PositionMap((m.data.astype(np.float64) * s).astype(np.float32), m.mask) for m in seq]
    b = sequence_errors(scaled(pred), scaled(truth))
    assert b.nmae == pytest.approx(a.nmae, rel=1e-5)
    assert b.nrmse == pytest.approx(a.nrmse, rel=1e-5)


def test_errors_outside_mask_ignored():
    rng = np.random.default_rng(3)
    pred, truth = random_sequence(rng)
    before = sequence_errors(pred, truth)
    noisy = []
    for p in pred:
        d = p.data.copy()
        d[p.mask == 0] = 1e6
        noisy.append(PositionMap(d, p.mask))
    after = sequence_errors(noisy, truth)
    assert before == after


def test_degenerate_inputs():
    mask = np.ones((3, 3), np.uint8)
    flat = PositionMap(np.ones((3, 3, 3), np.float32), mask)
    with pytest.raises(DegenerateSequenceError):
        nmae(flat, flat)
    empty = PositionMap(np.ones((3, 3, 3), np.float32), np.zeros((3, 3), np.uint8))
    with pytest.raises(ContractError):
        nmae(empty, empty)
    other = PositionMap(flat.data, np.eye(3, dtype=np.uint8))
    with pytest.raises(ContractError):
        nmae(other, flat)


def test_report_layout_and_roundtrip(tmp_path):
    rows = [MetricRow("holdout", 0.004, 0.006, 90, holdout=True)]
    rows += [MetricRow(f"trial{i}", 0.001 * (i + 1), 0.0015 * (i + 1), 54) for i in range(5)]
    rep = report_table(rows, subject_id="S1")
    assert len(rep.rows) == 6 and rep.rows[-1].trial_id == "holdout"
    text = rep.to_csv()
    assert text.splitlines()[0] == "subject,trial,nmae,nrmse,frames"
    assert text.splitlines()[1] == "S1,trial0,0.00100,0.00150,54"
    back = read_report_csv(text)
    assert [(r.trial_id, r.nmae, r.nrmse, r.frames) for r in back.rows] == \
        [(r.trial_id, round(r.nmae, 5), round(r.nrmse, 5), r.frames) for r in rep.rows]
    rep.write_csv(tmp_path / "m.csv")
    assert read_report_csv(tmp_path / "m.csv").rows == back.rows
    assert "(holdout)" in rep.render()


def test_single_zero_row():
    rep = report_table([MetricRow("t", 0.0, 0.0, 1)])
    assert rep.to_csv().splitlines()[1:] == ["S1,t,0.00000,0.00000,1"]
    with pytest.raises(ContractError):
        report_table([])
