"""Functional simulator of a bidirectional ring of spiking-neural-network cores."""
from .network import Network, Population
from .neuron import LifParams
from .oracle import oracle_run
from .recording import RunMetrics, SpikeRecording
from .fabric import TopologyConfig
from .simulator import RingSimulator, run

__all__ = ["LifParams", "Network", "Population", "RingSimulator", "RunMetrics",
           "SpikeRecording", "TopologyConfig", "oracle_run", "run"]
__version__ = "0.1.0"
