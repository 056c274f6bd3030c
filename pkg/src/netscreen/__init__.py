"""Multi-round active screening on contact networks."""
from .agents import SOSAgent, TrainConfig, evaluate, train
from .baselines import EigenvaluePolicy, MaxDegreePolicy, NoIntervention, RandomPolicy
from .belief import BeliefState, init_belief
from .epidemic import EpidemicParams, HealthState, run_episode
from .graph import (
    ContactNetwork,
    generate_barabasi_albert,
    generate_erdos_renyi,
    load_edge_list,
    network_stats,
    spectral_radius,
)

__version__ = "0.1.0"
