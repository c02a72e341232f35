"""Nash-bargaining solutions for matching markets.

Two solver families: multiplicative weights on a price-feasibility program
(one-sided markets, linear or SPLC utilities, with endowments) and
Frank-Wolfe on a smoothed log objective (one-sided, two-sided and
non-bipartite markets). Certificates and lottery rounding sit on top.
"""

from .cgd import SmoothedObjective, SolveReport, eta, eta_prime, fw_gap, fw_solve, psi_and_grad, smoothed_objective
from .certify import (
    Certificate,
    approx_feasibility,
    best_response_gain,
    fit_duals,
    kkt_residual,
    nash_objective,
    proportionality_check,
)
from .instance import (
    DELTA_MAX,
    DegenerateInstanceError,
    InfeasibleInstanceError,
    InstanceError,
    Kind,
    MarketInstance,
    ScalingInfo,
    feasibility_gap,
    gen_common_value,
    gen_random,
    gen_tightness,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    normalize,
    save_instance,
    validate,
)
from .mwu import DualState, MwuResult, MwuTrace, best_bundle, cp_values, rescale, solve_liad, solve_sad
from .oracles import (
    VertexSolution,
    max_weight_bipartite_matching,
    max_weight_capacitated_assignment,
    max_weight_general_matching,
    shift,
)
from .reforacle import OracleResult, grid_solve
from .rounding import LotteryDecomposition, bvn_decompose, complete_to_doubly_stochastic, sample_matching

__version__ = "0.1.0"
