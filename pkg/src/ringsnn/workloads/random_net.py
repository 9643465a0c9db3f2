"""Random mixed LIF/Poisson networks for equivalence and stress runs."""
from __future__ import annotations

import numpy as np

from ..network import LIF, POISSON, MAX_DELAY, Network, Population
from ..neuron import LifParams


def gen_random(n_neurons: int = 1024, seed: int = 0, poisson_fraction: float = 0.2,
               max_fanout: int = 64, rate_hz: float = 20.0, w_exc: float = 120.0,
               w_inh: float = -200.0, inh_fraction: float = 0.25, i_dc: float = 150.0,
               dt: float = 0.1, core_capacity: int = 256, n_cores: int = 4) -> Network:
    """Poisson generators first, then LIF neurons; each neuron draws a fanout
    in [0, max_fanout], uniform targets among LIF neurons, delays in [1, 64]."""
    rng = np.random.default_rng(seed)
    n_poi = int(round(n_neurons * poisson_fraction))
    n_lif = n_neurons - n_poi
    params = LifParams.from_capacitance(250.0, 20.0, tau_syn=5.0, e_l=-65.0, v_th=-50.0,
                                        v_reset=-70.0, i_dc=i_dc, t_ref=2.0, dt=dt)
    pops = [Population("poisson", 0, n_poi, POISSON, LifParams(dt=dt), rate_hz),
            Population("lif", n_poi, n_lif, LIF, params, 0.0, (-70.0, -50.0))]
    fan = rng.integers(0, max_fanout + 1, size=n_neurons)
    src = np.repeat(np.arange(n_neurons), fan)
    dst = rng.integers(n_poi, n_neurons, size=len(src)) if n_lif else np.zeros(0, int)
    inh = rng.random(n_neurons) < inh_fraction
    inh[:n_poi] = False
    w = np.where(inh[src], w_inh, w_exc) * rng.uniform(0.5, 1.5, size=len(src))
    delay = rng.integers(1, MAX_DELAY + 1, size=len(src))
    return Network(pops, src, dst, w, delay, dt=dt, core_capacity=core_capacity, n_cores=n_cores)
