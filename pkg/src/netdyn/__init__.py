"""Continuous-time noisy voter dynamics on random graphs.

Exact event-driven simulation, mean-field ODE limits per graph family,
and a statistical verification battery (master-equation oracle, propensity
gaps, concentration bounds).
"""

from .graph import (Configuration, Graph, MultiGraph, RegularGraphError,
                    SelectionTuple, boundary_crossings, dump_edgelist, gamma,
                    generate_er, generate_regular, generate_sbm,
                    load_edgelist, psi, sample_selection_tuple)
from .model import (CnvmParams, CollectiveState, ErFamily, RegularFamily,
                    SbmFamily, SystemState, collective_variable, load_params,
                    neighbor_opinion_count, node_rate, propensity_exact,
                    propensity_reduced, save_params, state_index)
from .sim import (EnsembleStats, InitSpec, Trajectory, ensemble,
                  ensemble_to_csv, gillespie_run, init_state, make_time_grid,
                  substream, trajectory_to_csv)
from .meanfield import MfeSystem, StepSizeError, integrate, rhs, sirs_preset
from .analysis import (ConcentrationReport, DeviationReport,
                       chernoff_check, convergence_study, delta_estimate,
                       edge_count_between, isomorphism_invariance_check,
                       master_equation_oracle, sup_deviation)

__version__ = "0.1.0"
