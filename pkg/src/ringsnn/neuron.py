"""LIF dynamics with exact integration, Poisson sources, membrane init."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as crng


class NeuronFault(ArithmeticError):
    def __init__(self, index: int, message: str):
        super().__init__(f"neuron {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class LifParams:
    """Parameters of a current-based LIF neuron with exponential synapses.

    Units: ms, mV, pA. ``r_m`` is in mV/pA (GOhm); :meth:`from_capacitance`
    derives it as ``tau_m / c_m`` with ``c_m`` in pF.
    """

    tau_m: float = 20.0
    tau_syn: float = 5.0
    e_l: float = -65.0
    v_th: float = -50.0
    v_reset: float = -70.0
    r_m: float = 0.08
    i_dc: float = 0.0
    t_ref: float = 2.0
    dt: float = 0.1

    def __post_init__(self):
        if not (self.tau_m > 0 and self.tau_syn > 0 and self.dt > 0):
            raise ValueError("tau_m, tau_syn and dt must be positive")
        if not self.v_th > self.v_reset:
            raise ValueError("v_th must exceed v_reset")
        if self.t_ref < 0:
            raise ValueError("t_ref must be non-negative")

    @classmethod
    def from_capacitance(cls, c_m: float, tau_m: float, **kw) -> "LifParams":
        return cls(tau_m=tau_m, r_m=tau_m / c_m, **kw)

    @property
    def ref_steps(self) -> int:
        return int(round(self.t_ref / self.dt))


@dataclass
class NeuronState:
    v: np.ndarray
    i_syn: np.ndarray
    ref_count: np.ndarray

    @classmethod
    def resting(cls, n: int, e_l=-65.0) -> "NeuronState":
        return cls(np.full(n, e_l, dtype=np.float64), np.zeros(n), np.zeros(n, dtype=np.int64))

    def copy(self) -> "NeuronState":
        return NeuronState(self.v.copy(), self.i_syn.copy(), self.ref_count.copy())


def p21(tau_m, tau_syn, r_m, dt):
    """Coupling of synaptic current into membrane potential over one step."""
    tau_m = np.asarray(tau_m, dtype=np.float64)
    tau_syn = np.asarray(tau_syn, dtype=np.float64)
    alpha = np.exp(-dt / tau_m)
    beta = np.exp(-dt / tau_syn)
    same = np.isclose(tau_m, tau_syn, rtol=0.0, atol=1e-12)
    denom = np.where(same, 1.0, tau_syn - tau_m)
    general = r_m * tau_syn / denom * (beta - alpha)
    limit = r_m * (dt / tau_m) * alpha
    return np.where(same, limit, general)


@dataclass
class Propagators:
    """Per-neuron step constants, precomputed from LifParams."""

    alpha: np.ndarray
    beta: np.ndarray
    p21: np.ndarray
    v_inf: np.ndarray
    v_th: np.ndarray
    v_reset: np.ndarray
    ref_steps: np.ndarray

    @classmethod
    def from_params(cls, params: list[LifParams] | LifParams, n: int | None = None) -> "Propagators":
        if isinstance(params, LifParams):
            params = [params] * (1 if n is None else n)
        col = lambda name: np.array([getattr(p, name) for p in params], dtype=np.float64)
        tau_m, tau_syn, r_m, dt = col("tau_m"), col("tau_syn"), col("r_m"), col("dt")
        return cls(
            alpha=np.exp(-dt / tau_m),
            beta=np.exp(-dt / tau_syn),
            p21=p21(tau_m, tau_syn, r_m, dt),
            v_inf=col("e_l") + r_m * col("i_dc"),
            v_th=col("v_th"),
            v_reset=col("v_reset"),
            ref_steps=np.array([p.ref_steps for p in params], dtype=np.int64),
        )

    def take(self, idx) -> "Propagators":
        return Propagators(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))


def lif_step(state: NeuronState, prop: Propagators, w_in: np.ndarray,
             index_offset: int = 0) -> np.ndarray:
    """Advance ``state`` in place by one timestep; return the spike mask.

    ``w_in`` is the weight released by the delay accumulator for this step.
    It enters the synaptic current after the membrane update, so it first
    moves V on the following step.
    """
    v, i_syn, ref = state.v, state.i_syn, state.ref_count
    v_new = prop.alpha * v + prop.v_inf * (1.0 - prop.alpha) + prop.p21 * i_syn
    i_new = prop.beta * i_syn + w_in
    if not (np.isfinite(v_new).all() and np.isfinite(i_new).all()):
        bad = int(np.flatnonzero(~(np.isfinite(v_new) & np.isfinite(i_new)))[0])
        raise NeuronFault(bad + index_offset, "non-finite state or input")
    refractory = ref > 0
    spiked = (v_new > prop.v_th) & ~refractory
    v_new = np.where(refractory | spiked, prop.v_reset, v_new)
    ref[:] = np.where(refractory, ref - 1, np.where(spiked, prop.ref_steps, 0))
    v[:] = v_new
    i_syn[:] = i_new
    return spiked


def lif_step_scalar(v: float, i_syn: float, ref_count: int, p: LifParams, w_in: float = 0.0):
    """Single-neuron convenience wrapper around :func:`lif_step`."""
    st = NeuronState(np.array([v], float), np.array([i_syn], float), np.array([ref_count]))
    spiked = lif_step(st, Propagators.from_params(p), np.array([w_in], float))
    return NeuronState(st.v, st.i_syn, st.ref_count), bool(spiked[0])


def spike_probability(rate_hz, dt_ms) -> np.ndarray:
    return -np.expm1(-np.asarray(rate_hz, dtype=np.float64) * dt_ms / 1000.0)


def poisson_spikes(prob: np.ndarray, seed: int, neuron_ids: np.ndarray, step: int) -> np.ndarray:
    """Bernoulli draws for a block of generators at one step."""
    return crng.uniform(seed, neuron_ids, step) < prob


@dataclass
class PoissonSource:
    rate: float
    seed: int = 0
    neuron_id: int = 0
    step: int = field(default=0)

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be non-negative")


def poisson_step(src: PoissonSource, dt: float) -> bool:
    p = spike_probability(src.rate, dt)
    spiked = bool(poisson_spikes(np.atleast_1d(p), src.seed, np.array([src.neuron_id]), src.step)[0])
    src.step += 1
    return spiked


def init_membrane(rng: np.random.Generator, lo: float, hi: float, size=None):
    if not lo < hi:
        raise ValueError("init_membrane needs lo < hi")
    return rng.uniform(lo, hi, size)


def init_membrane_counter(seed: int, neuron_ids: np.ndarray, lo, hi) -> np.ndarray:
    """Initial potentials keyed by neuron ID, independent of core layout."""
    u = crng.uniform(seed, neuron_ids, crng.STREAM_INIT_V)
    lo = np.asarray(lo, dtype=np.float64)
    return lo + (np.asarray(hi, dtype=np.float64) - lo) * u
