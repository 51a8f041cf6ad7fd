"""Max-flow over energy-harvesting DAG networks with log-rate links, and lazy online scheduling."""
from .flowmax import (FlowSolution, NotLayerConnected, TraceEntry, flowmax_multilayer, flowmax_two_layer, maxflow,
                      min_cut_gap_demo, power_aug)
from .layer_solver import (LOG2, LayerProblem, LayerSolution, NotACut, RateFunction, cut_capacity, layer_opt,
                           mac_layer_opt)
from .network import (UNBOUNDED, CycleDetected, DagNetwork, DuplicateEdge, LayeredNetwork, MissingSourceOrDestination,
                      NegativePower, NetworkError, ParseError, dag_to_layered, is_layer_connected, load_network,
                      parse_network, save_network, validate)
from .online import (ArrivalSequence, HorizonExceeded, LazySchedule, RateOracle, UnknownNode, accumulate,
                     competitive_ratio_estimate, lazy_online, load_arrivals, offline_lower_bound, r_star)
from .oracle import NonConvergence, OracleReport, TooLarge, direct_maxflow, grid_maxflow

__all__ = [n for n in dir() if not n.startswith("_")]
