"""Winner-takes-all Sudoku network, decoding, and grid validation.

Digit neurons come first: neuron ``((cell * 9) + digit - 1) * npd + k`` for
cell ``row * 9 + col``. Noise generators follow (one per digit neuron), then
stimulus generators (one per neuron of each given digit).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..network import LIF, POISSON, Network, NetworkError, Population
from ..neuron import LifParams
from ..recording import SpikeRecording

# givens and solutions of the three benchmark puzzles
BENCHMARKS = {
    1: ("058030020402000905007000680290054070500062000003810250109003064865490130070006000",
        "658931427432678915917245683296354871581762349743819256129583764865497132374126598"),
    2: ("050000190000000042910027568345001906700340000890206003008700210160008004000100685",
        "254683197687915342913427568345871926726349851891256473538764219162598734479132685"),
    3: ("006000802700428096210030705031000980000100007820950003300002060085076000902501308",
        "496715832753428196218639745531267984649183257827954613374892561185376429962541378"),
}


class SudokuError(ValueError):
    pass


def parse_puzzle(text: str) -> np.ndarray:
    """81 characters, row-major; ``0`` or ``.`` marks an empty cell."""
    s = "".join(text.split())
    if len(s) != 81:
        raise SudokuError(f"puzzle must have 81 cells, got {len(s)}")
    bad = [ch for ch in s if ch not in "0123456789."]
    if bad:
        raise SudokuError(f"invalid puzzle characters: {''.join(sorted(set(bad)))}")
    return np.array([0 if ch == "." else int(ch) for ch in s], dtype=np.int64).reshape(9, 9)


def format_grid(grid) -> str:
    return "".join(str(int(x)) for x in np.asarray(grid).ravel())


def peers(cell: int) -> set[int]:
    r, c = divmod(cell, 9)
    br, bc = 3 * (r // 3), 3 * (c // 3)
    out = {r * 9 + j for j in range(9)} | {i * 9 + c for i in range(9)}
    out |= {(br + i) * 9 + bc + j for i in range(3) for j in range(3)}
    out.discard(cell)
    return out


def validate_grid(grid, givens=None) -> tuple[bool, list[str]]:
    """True iff every row, column and box is a permutation of 1..9 and all
    givens are kept; otherwise the list names each violation."""
    g = np.asarray(grid).reshape(9, 9)
    want = set(range(1, 10))
    problems = []
    for i in range(9):
        if set(g[i].tolist()) != want:
            problems.append(f"row {i}")
    for j in range(9):
        if set(g[:, j].tolist()) != want:
            problems.append(f"column {j}")
    for b in range(9):
        r, c = 3 * (b // 3), 3 * (b % 3)
        if set(g[r:r + 3, c:c + 3].ravel().tolist()) != want:
            problems.append(f"box {b}")
    if givens is not None:
        gv = np.asarray(givens).reshape(9, 9)
        for r, c in zip(*np.nonzero(gv)):
            if g[r, c] != gv[r, c]:
                problems.append(f"given ({r},{c})={gv[r, c]} changed to {g[r, c]}")
    return not problems, problems


def check_givens(givens) -> None:
    g = np.asarray(givens).ravel()
    if np.any((g < 0) | (g > 9)):
        raise SudokuError("givens must be in 0..9")
    for cell in np.flatnonzero(g):
        for p in peers(int(cell)):
            if g[p] == g[cell]:
                raise SudokuError(f"givens conflict: cells {cell} and {p} both hold {g[cell]}")


@dataclass
class SudokuSpec:
    givens: list = field(default_factory=lambda: [[0] * 9 for _ in range(9)])
    neurons_per_digit: int = 5
    stim_rate_hz: float = 200.0
    noise_rate_hz: float = 200.0
    w_inh: float = -100.0
    w_stim: float = 200.0
    w_noise: float = 200.0
    delay_ms: float = 1.0
    c_m: float = 250.0
    i_e: float = 200.0
    tau_m: float = 20.0
    t_ref: float = 2.0
    tau_syn: float = 5.0
    v_reset: float = -70.0
    e_l: float = -65.0
    v_th: float = -50.0
    v_init: tuple = (-65.0, -55.0)
    dt: float = 0.1

    @classmethod
    def from_puzzle(cls, text: str, **kw) -> "SudokuSpec":
        return cls(givens=parse_puzzle(text).tolist(), **kw)

    @classmethod
    def from_json(cls, path) -> "SudokuSpec":
        data = json.loads(Path(path).read_text())
        if isinstance(data.get("givens"), str):
            data["givens"] = parse_puzzle(data["givens"]).tolist()
        if "v_init" in data:
            data["v_init"] = tuple(data["v_init"])
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def lif_params(self) -> LifParams:
        return LifParams.from_capacitance(self.c_m, self.tau_m, tau_syn=self.tau_syn, e_l=self.e_l,
                                          v_th=self.v_th, v_reset=self.v_reset, i_dc=self.i_e,
                                          t_ref=self.t_ref, dt=self.dt)

    @property
    def n_digit_neurons(self) -> int:
        return 81 * 9 * self.neurons_per_digit


def population_ids(cell: int, digit: int, npd: int = 5) -> np.ndarray:
    start = (cell * 9 + digit - 1) * npd
    return np.arange(start, start + npd)


def conflict_pairs() -> list[tuple[int, int]]:
    """Ordered (source, target) digit-population pairs that inhibit each other."""
    pairs = []
    for cell in range(81):
        nb = sorted(peers(cell))
        for d in range(9):
            a = cell * 9 + d
            pairs.extend((a, cell * 9 + e) for e in range(9) if e != d)
            pairs.extend((a, p * 9 + d) for p in nb)
    return pairs


def gen_sudoku(spec: SudokuSpec, seed: int = 0, core_capacity: int = 4096) -> Network:
    """Build the WTA network. Generation draws no random numbers; ``seed``
    is accepted for interface symmetry with the other generators."""
    del seed
    givens = np.asarray(spec.givens, dtype=np.int64).reshape(9, 9)
    check_givens(givens)
    npd = spec.neurons_per_digit
    n_digit = spec.n_digit_neurons
    delay = int(round(spec.delay_ms / spec.dt))
    if not 1 <= delay <= 64:
        raise NetworkError(f"delay {spec.delay_ms} ms is outside 1..64 steps")

    pairs = np.array(conflict_pairs(), dtype=np.int64)
    k = np.arange(npd)
    # every neuron of the source population to every neuron of the target
    src = (pairs[:, 0, None, None] * npd + k[None, :, None]).repeat(npd, axis=2).reshape(-1)
    dst = (pairs[:, 1, None, None] * npd + k[None, None, :]).repeat(npd, axis=1).reshape(-1)
    w = np.full(len(src), spec.w_inh)

    noise_start = n_digit
    noise_src = noise_start + np.arange(n_digit)
    noise_dst = np.arange(n_digit)

    flat = givens.ravel()
    given_cells = np.flatnonzero(flat)
    stim_targets = np.concatenate([population_ids(int(c), int(flat[c]), npd) for c in given_cells]) \
        if len(given_cells) else np.zeros(0, np.int64)
    stim_start = noise_start + n_digit
    stim_src = stim_start + np.arange(len(stim_targets))

    src = np.concatenate([src, noise_src, stim_src])
    dst = np.concatenate([dst, noise_dst, stim_targets])
    w = np.concatenate([w, np.full(n_digit, spec.w_noise), np.full(len(stim_targets), spec.w_stim)])
    order = np.argsort(src, kind="stable")
    gen_params = LifParams(dt=spec.dt)
    pops = [
        Population("digits", 0, n_digit, LIF, spec.lif_params(), 0.0, tuple(spec.v_init)),
        Population("noise", noise_start, n_digit, POISSON, gen_params, spec.noise_rate_hz),
        Population("stimulus", stim_start, len(stim_targets), POISSON, gen_params, spec.stim_rate_hz),
    ]
    n_total = stim_start + len(stim_targets)
    n_cores = -(-n_total // core_capacity)
    return Network(pops, src[order], dst[order], w[order], np.full(len(src), delay),
                   dt=spec.dt, core_capacity=core_capacity, n_cores=n_cores)


def digit_counts(rec: SpikeRecording, start_step: int, stop_step: int, npd: int = 5) -> np.ndarray:
    """Spike counts per (cell, digit) population in ``[start_step, stop_step)``."""
    n_digit = 81 * 9 * npd
    win = rec.window(start_step, stop_step)
    nid = win.neurons[win.neurons < n_digit]
    return np.bincount(nid // npd, minlength=81 * 9).reshape(81, 9)


def decode_sudoku(rec: SpikeRecording, window_ms: float = 100.0, npd: int = 5,
                  total_steps: int | None = None) -> tuple[np.ndarray, int]:
    """Winning digit per cell over the final ``window_ms``; 0 where the top
    count is tied (including all-silent cells). Returns (grid, undecided)."""
    total = rec.total_steps if total_steps is None else total_steps
    start = max(total - int(round(window_ms / rec.dt)), 0)
    counts = digit_counts(rec, start, total, npd)
    top = counts.max(axis=1)
    winners = (counts == top[:, None]).sum(axis=1)
    grid = np.where(winners == 1, counts.argmax(axis=1) + 1, 0)
    return grid.reshape(9, 9), int((winners != 1).sum())
