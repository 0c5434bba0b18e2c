"""Joint estimator/controller tuning testbed.

Moving-horizon estimation and model predictive control acting as
value-function approximators, tuned online by temporal-difference updates
with exact parametric sensitivities. The heavy lifting lives in the C++
extension; this package re-exports its functions.
"""

from ._mheq import (
    baseline_cost,
    component_names,
    default_config_json,
    estimate,
    gradient_audit,
    mpc_action_value,
    mpc_policy,
    mpc_value,
    project_psd,
    run_episode,
    run_scenarios,
    solve_qp,
    td_error,
)

__all__ = [
    "baseline_cost",
    "component_names",
    "default_config_json",
    "estimate",
    "gradient_audit",
    "mpc_action_value",
    "mpc_policy",
    "mpc_value",
    "project_psd",
    "run_episode",
    "run_scenarios",
    "solve_qp",
    "td_error",
]

__version__ = "0.1.0"
