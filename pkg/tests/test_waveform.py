import numpy as np
import pytest

from amlgame.waveform import (
    ChannelParams,
    IqFrame,
    OccupancyProcess,
    RngSeed,
    draw_components,
    dump_frames_csv,
    gen_dataset,
    gen_frame,
    load_frames_csv,
    split_dataset,
)

CH = ChannelParams()
OCC = OccupancyProcess()


def test_frame_determinism():
    a = gen_frame(True, CH, RngSeed(7, 0))
    b = gen_frame(True, CH, RngSeed(7, 0))
    c = gen_frame(True, CH, RngSeed(7, 1))
    assert a == b
    assert a != c
    assert a.iq.shape == (2, 16)


def test_idle_frame_is_unit_power_noise():
    rng = RngSeed(1).rng()
    signal, noise = draw_components(np.zeros(20000, bool), CH, rng)
    assert not signal.any()
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(1.0, abs=0.01)


def test_snr_calibration():
    rng = RngSeed(2).rng()
    signal, noise = draw_components(np.ones(100_000, bool), CH, rng)
    snr_db = 10 * np.log10(np.mean(np.abs(signal) ** 2) / np.mean(np.abs(noise) ** 2))
    assert abs(snr_db - 3.0) < 0.2


def test_block_fading_shares_one_gain():
    ch = ChannelParams(fading="block")
    signal, _ = draw_components(np.ones(5, bool), ch, RngSeed(3).rng())
    # QPSK symbols all have modulus 1, so |signal| is constant along a frame
    mag = np.abs(signal)
    assert np.allclose(mag, mag[:, :1])


def test_dataset_labels_and_concentration():
    ds = gen_dataset(1000, OCC, CH, RngSeed(0, 0))
    k = sum(f.occupied for f in ds)
    assert abs(k - 500) <= 3 * np.sqrt(250)
    assert all(not f.occupied for f in gen_dataset(10, OccupancyProcess(0.0), CH, RngSeed(4)))


def test_dataset_rejects_empty():
    with pytest.raises(ValueError):
        gen_dataset(0, OCC, CH, RngSeed(0))


def test_split_sizes_and_determinism():
    ds = gen_dataset(1000, OCC, CH, RngSeed(0, 0))
    tr, te = split_dataset(ds, 0.8, RngSeed(0, 1))
    assert (len(tr), len(te)) == (800, 200)
    ids = {id(f) for f in tr} | {id(f) for f in te}
    assert len(ids) == 1000
    tr2, _ = split_dataset(ds, 0.8, RngSeed(0, 1))
    assert [id(f) for f in tr] == [id(f) for f in tr2]
    assert tuple(map(len, split_dataset(ds[:1], 0.8, RngSeed(0)))) == (1, 0)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            split_dataset(ds, bad, RngSeed(0))


def test_frame_validation():
    with pytest.raises(ValueError):
        IqFrame(np.zeros((3, 16)), True)
    with pytest.raises(ValueError):
        IqFrame(np.full((2, 16), np.nan), True)
    with pytest.raises(ValueError):
        ChannelParams(fading="weekly")


def test_frames_csv_roundtrip(tmp_path):
    ds = gen_dataset(5, OCC, CH, RngSeed(9))
    p = tmp_path / "frames.csv"
    dump_frames_csv(ds, p)
    assert p.read_text().splitlines()[0].startswith("frame_id,occupied,i_0")
    assert load_frames_csv(p) == ds
