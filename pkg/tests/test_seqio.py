"""Sequence file round trips."""

import numpy as np
import pytest

from loadcycle.core import LabeledSequence, Origin
from loadcycle.seqio import HEADER, load_dataset, load_sequence, save_dataset, save_sequence


def sample_seq(n=20, cycle_id="abc"):
    rng = np.random.default_rng(1)
    ch = rng.normal(0, 5, size=(5, n))
    ch[2] = np.clip(ch[2] * 0.1, -1, 1)
    return LabeledSequence(
        t=np.arange(n) * 0.2,
        channels=ch,
        labels=rng.integers(0, 3, n),
        origin=Origin.TARGET,
        cycle_id=cycle_id,
    )


def test_roundtrip_exact(tmp_path):
    seq = sample_seq()
    p = tmp_path / "abc.csv"
    save_sequence(seq, p)
    back = load_sequence(p, origin=Origin.TARGET)
    np.testing.assert_array_equal(back.t, seq.t)
    np.testing.assert_array_equal(back.channels, seq.channels)
    np.testing.assert_array_equal(back.labels, seq.labels)
    assert back.cycle_id == "abc"
    assert back.origin is Origin.TARGET


def test_file_shape(tmp_path):
    p = tmp_path / "s.csv"
    save_sequence(sample_seq(n=3), p)
    lines = p.read_text().splitlines()
    assert lines[0] == HEADER
    assert len(lines) == 4
    assert len(lines[1].split(",")) == 7


def test_save_is_deterministic(tmp_path):
    seq = sample_seq()
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    save_sequence(seq, a)
    save_sequence(seq, b)
    assert a.read_bytes() == b.read_bytes()


def test_joystick_clamped_on_load(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text(HEADER + "\n0.0,1.0,2.0,1.5,3.0,4.0,0\n")
    seq = load_sequence(p)
    assert seq.channels[2, 0] == 1.0


def test_missing_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0.0,1,2,0.5,3,4,0\n")
    with pytest.raises(ValueError):
        load_sequence(p)


def test_dataset_roundtrip(tmp_path):
    seqs = [sample_seq(cycle_id=f"c{i}") for i in range(3)]
    save_dataset(seqs, tmp_path / "ds")
    back = load_dataset(tmp_path / "ds")
    assert [s.cycle_id for s in back] == ["c0", "c1", "c2"]
    np.testing.assert_array_equal(back[1].channels, seqs[1].channels)
