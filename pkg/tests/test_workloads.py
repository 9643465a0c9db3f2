import copy
import json

import numpy as np
import pytest

from ringsnn.network import NetworkError
from ringsnn.oracle import oracle_run
from ringsnn.recording import SpikeRecording
from ringsnn.workloads import microcircuit as mc
from ringsnn.workloads import sudoku as sd
from ringsnn.workloads.random_net import gen_random

PUZZLE_1, SOLUTION_1 = sd.BENCHMARKS[1]


# Sudoku

def test_benchmarks_are_consistent():
    for puzzle, solution in sd.BENCHMARKS.values():
        givens = sd.parse_puzzle(puzzle)
        ok, problems = sd.validate_grid(sd.parse_puzzle(solution), givens)
        assert ok, problems


def test_parse_puzzle():
    g = sd.parse_puzzle("." * 80 + "5")
    assert g.shape == (9, 9) and g[8, 8] == 5
    with pytest.raises(sd.SudokuError):
        sd.parse_puzzle("0" * 80)
    with pytest.raises(sd.SudokuError):
        sd.parse_puzzle("x" * 81)


def test_validate_grid_cites_row():
    grid = sd.parse_puzzle(SOLUTION_1)
    grid[0, 1] = grid[0, 0]
    ok, problems = sd.validate_grid(grid)
    assert not ok
    assert "row 0" in problems


def test_inconsistent_givens_rejected():
    with pytest.raises(sd.SudokuError):
        sd.gen_sudoku(sd.SudokuSpec.from_puzzle("11" + "0" * 79))


def test_neuron_count():
    net = sd.gen_sudoku(sd.SudokuSpec.from_puzzle(PUZZLE_1))
    n_given = sum(c != "0" for c in PUZZLE_1)
    assert net.population("digits").size == 3645
    assert net.n_neurons == 3645 + 3645 + 5 * n_given


def test_empty_grid_has_noise_only():
    net = sd.gen_sudoku(sd.SudokuSpec())
    assert net.population("stimulus").size == 0
    gen_src = net.src >= 3645
    assert np.all(net.dst[gen_src] < 3645)
    assert gen_src.sum() == 3645


def brute_inbound(cell, digit):
    """Count inhibitory synapses into one digit population from first principles."""
    r, c = divmod(cell, 9)
    total = 0
    for other in range(81):
        r2, c2 = divmod(other, 9)
        for d2 in range(1, 10):
            if (other, d2) == (cell, digit):
                continue
            same_cell = other == cell
            unit_peer = other != cell and (r2 == r or c2 == c or (r2 // 3, c2 // 3) == (r // 3, c // 3))
            if same_cell or (unit_peer and d2 == digit):
                total += 25
    return total


def test_inbound_inhibition_per_population():
    net = sd.gen_sudoku(sd.SudokuSpec())
    inh = net.weight < 0
    per_pop = np.bincount(net.dst[inh] // 5, minlength=729)
    assert np.all(per_pop == (8 + 20) * 25)
    for cell, digit in [(0, 1), (40, 5), (80, 9), (13, 3)]:
        assert brute_inbound(cell, digit) == 700
    assert np.all(net.weight[inh] == -100.0)


def test_spec_json_round_trip(tmp_path):
    spec = sd.SudokuSpec.from_puzzle(PUZZLE_1, noise_rate_hz=150.0)
    path = tmp_path / "spec.json"
    path.write_text(spec.to_json())
    back = sd.SudokuSpec.from_json(path)
    assert back == spec


def test_generation_reproducible():
    spec = sd.SudokuSpec.from_puzzle(PUZZLE_1)
    assert sd.gen_sudoku(spec, 1).to_bytes() == sd.gen_sudoku(spec, 1).to_bytes()


def test_decode_single_winner_and_silence():
    assert sd.decode_sudoku(SpikeRecording([], [], {"total_steps": 1000}))[1] == 81
    target = sd.parse_puzzle(SOLUTION_1).ravel()
    neurons = [int(sd.population_ids(c, int(target[c]))[0]) for c in range(81)]
    rec = SpikeRecording(np.full(81, 990), neurons, {"total_steps": 1000, "dt": 0.1})
    grid, undecided = sd.decode_sudoku(rec)
    assert undecided == 0
    assert np.array_equal(grid.ravel(), target)


def test_decode_ties_are_undecided():
    ids = [int(sd.population_ids(0, 1)[0]), int(sd.population_ids(0, 2)[0])]
    grid, undecided = sd.decode_sudoku(SpikeRecording([990, 990], ids, {"total_steps": 1000}))
    assert grid[0, 0] == 0 and undecided == 81


def test_oracle_solves_first_benchmark():
    net = sd.gen_sudoku(sd.SudokuSpec.from_puzzle(PUZZLE_1))
    rec = oracle_run(net, 500.0, seed=0)
    assert rec.total_steps == 5000
    grid, _ = sd.decode_sudoku(rec)
    assert sd.format_grid(grid) == SOLUTION_1


# microcircuit

@pytest.mark.parametrize("scale,n", [(1.0, 77169), (0.5, 38586), (0.25, 19292)])
def test_scaled_neuron_counts(scale, n):
    cfg = mc.load_config()
    assert sum(s.size for s in mc.population_specs(cfg, scale)) == n


def test_tiny_scale_faults():
    with pytest.raises(NetworkError, match="L"):
        mc.population_specs(mc.load_config(), 1e-5)


def test_zero_probability_pair_has_no_edges():
    cfg = copy.deepcopy(mc.load_config())
    cfg["conn_probs"][0][3] = 0.0  # L4I -> L23E
    net = mc.gen_microcircuit(cfg, scale=0.02, seed=1)
    starts = np.cumsum([0] + [p.size for p in net.populations])
    from_l4i = (net.src >= starts[3]) & (net.src < starts[4])
    assert not np.any(from_l4i & (net.dst < starts[1]))
    assert np.any(from_l4i)


def test_microcircuit_edge_properties():
    net = mc.gen_microcircuit(scale=0.02, seed=0)
    net.check_edges()
    exc_src = np.zeros(net.n_neurons, bool)
    for p in net.populations:
        if p.name.endswith("E"):
            exc_src[p.ids] = True
    assert np.all(net.weight[exc_src[net.src]] >= 0)
    assert np.all(net.weight[~exc_src[net.src]] <= 0)
    assert net.delay.min() >= 1 and net.delay.max() <= 64
    counts = mc.synapse_counts([p.size for p in net.populations], mc.load_config()["conn_probs"])
    assert net.n_edges == counts.sum()


def test_fixed_total_number_rule():
    # K reproduces p as the probability that a given pair has at least one synapse
    k = mc.synapse_counts([100, 200], [[0.0, 0.1], [0.3, 0.0]])
    assert k[0, 1] == round(np.log(0.9) / np.log(1 - 1 / 20000))
    assert 1 - (1 - 1 / 20000) ** k[0, 1] == pytest.approx(0.1, rel=1e-3)
    assert k[0, 0] == 0 and k[1, 1] == 0


def test_fanout_stats_match_generated_network():
    stats = mc.fanout_stats(scale=0.02, seed=3)
    net = mc.gen_microcircuit(scale=0.02, seed=3)
    fan = net.fanout()
    assert stats["edges"] == net.n_edges
    assert stats["mean_fanout"] == pytest.approx(fan.mean())
    assert stats["max_fanout"] == fan.max()


def test_dc_drive():
    cfg = mc.load_config()
    spec = mc.population_specs(cfg, 0.1)[0]
    expect = cfg["k_ext"][0] * cfg["bg_rate_hz"] * cfg["psc_mean_pa"] * cfg["neuron"]["tau_syn"] * 1e-3
    assert spec.i_dc == pytest.approx(expect)


# random networks

def test_random_network_shape():
    net = gen_random(1024, seed=0)
    assert net.n_neurons == 1024 and net.n_cores * net.core_capacity >= 1024
    assert net.fanout().max() <= 64
    assert net.is_poisson().sum() == 205
    assert np.all(net.dst >= 205)
    assert gen_random(256, seed=2).to_bytes() == gen_random(256, seed=2).to_bytes()
