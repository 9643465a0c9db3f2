import numpy as np

from ringsnn.recording import RunMetrics, SpikeRecording, read_kv, write_kv


def test_text_and_binary_round_trip(tmp_path):
    rec = SpikeRecording([0, 0, 5, 9], [3, 7, 1, 3], {"dt": 0.1, "total_steps": 10, "mode": "ring"})
    paths = rec.save(tmp_path)
    assert paths["text"].read_text().splitlines()[0] == "0\t3"
    for p in (paths["text"], paths["binary"], tmp_path):
        back = SpikeRecording.read(p)
        assert back == rec
        assert back.meta["total_steps"] == 10 and back.meta["mode"] == "ring"


def test_empty_recording(tmp_path):
    rec = SpikeRecording([], [], {"dt": 0.1, "total_steps": 0})
    rec.save(tmp_path)
    assert len(SpikeRecording.read(tmp_path / "spikes.txt")) == 0


def test_window_and_trains():
    rec = SpikeRecording([0, 1, 2, 3], [1, 2, 1, 1])
    assert len(rec.window(1, 3)) == 2
    tr = rec.trains([1, 2, 4])
    assert tr[1].tolist() == [0, 2, 3] and tr[4].tolist() == []


def test_kv_round_trip(tmp_path):
    write_kv(tmp_path / "m.kv", {"a": 1, "b": 2.5, "c": "x"})
    assert read_kv(tmp_path / "m.kv") == {"a": 1, "b": 2.5, "c": "x"}


def test_metrics_dict_is_flat():
    d = RunMetrics(link_traffic_right=[1, 2]).as_dict()
    assert all(not isinstance(v, (list, np.ndarray)) for v in d.values())
