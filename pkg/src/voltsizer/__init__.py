"""voltsizer: sizing and two-timescale volt/var control for a single-branch
radial distribution circuit serving an intermittent load.

The package solves the exact branch power flow, estimates a stage-power
Markov model from a load trace, sizes a fixed capacitor, a switchable
capacitor and a D-STATCOM by simulated annealing over a chance-constrained
control heuristic, and replays the real-time controller over traces with
full cost/violation reporting.
"""

from .accel import NUMBA_ENABLED
from .circuit import (CircuitParams, ControlDecision, DeviceSizes,
                      OperatingPoint, distflow_residuals, solve_distflow,
                      v_squared_closed_form)
from .control import (ConstraintBounds, SlowControlResult, constraint_bounds,
                      fast_control_Cf, loss_current_bounds, slow_control_Hs)
from .errors import (ConfigError, EmptyTrace, InsufficientData, NoConvergence,
                     NoFeasibleSizes, ParseError, StabilityViolation,
                     VoltsizerError)
from .load import (LoadTrace, StageSequence, StationaryDistribution,
                   SyntheticConfig, TransitionModel, estimate_stationary,
                   estimate_transition_model, generate_synthetic_trace,
                   ingest_trace, quantile_h1, quantile_h2, segment_stages)
from .realtime import (RealtimeConfig, SimulationReport,
                       run_benchmark_dstatcom_only, run_benchmark_fixed_only,
                       run_realtime_Hrt)
from .sizing import (CostModel, EvalResult, SAConfig, TerminationThresholds,
                     approx_objective_E, optimal_sizing_Hosz,
                     simulated_annealing)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "CircuitParams", "DeviceSizes", "ControlDecision", "OperatingPoint",
    "solve_distflow", "v_squared_closed_form", "distflow_residuals",
    "ConstraintBounds", "SlowControlResult", "loss_current_bounds",
    "constraint_bounds", "slow_control_Hs", "fast_control_Cf",
    "LoadTrace", "StageSequence", "TransitionModel",
    "StationaryDistribution", "SyntheticConfig", "ingest_trace",
    "segment_stages", "estimate_transition_model", "estimate_stationary",
    "quantile_h1", "quantile_h2", "generate_synthetic_trace",
    "CostModel", "SAConfig", "TerminationThresholds", "EvalResult",
    "approx_objective_E", "simulated_annealing", "optimal_sizing_Hosz",
    "RealtimeConfig", "SimulationReport", "run_realtime_Hrt",
    "run_benchmark_fixed_only", "run_benchmark_dstatcom_only",
    "VoltsizerError", "NoConvergence", "StabilityViolation", "ParseError",
    "EmptyTrace", "InsufficientData", "ConfigError", "NoFeasibleSizes",
]
