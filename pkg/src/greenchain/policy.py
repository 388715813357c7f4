"""Carbon-regulation objectives over the base profit model.

Three regimes are supported, selected by the string names used throughout
the configuration surface:

* ``"tax"``        - each player pays the carbon price on net emissions.
* ``"cap_trade"``  - net emissions are settled against an allowance U1 at a
  symmetric buy/sell price, so under-emitters earn trading revenue.
* ``"limited"``    - base profits minus the green investment, subject to a
  hard joint emission cap U2; the excess is reported as the constraint
  violation for penalty-based optimizers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .model import CostBreakdown, DecisionVector, DomainError, _breakdown_from_terms
from .params import ModelParameters

POLICY_IDS = {
    "tax": K.POLICY_TAX,
    "cap_trade": K.POLICY_CAP_TRADE,
    "limited": K.POLICY_LIMITED,
}
POLICY_NAMES = {v: k for k, v in POLICY_IDS.items()}


def policy_id(policy: str) -> int:
    try:
        return POLICY_IDS[policy]
    except KeyError:
        raise ValueError(
            f"unknown policy {policy!r}; expected one of {sorted(POLICY_IDS)}"
        ) from None


@dataclass(frozen=True)
class GreenReduction:
    """Emission reductions (tonnes/year) bought by the green investment."""

    rho_m: float
    rho_r: float
    rho_G: float


@dataclass(frozen=True)
class PolicyObjective:
    """One policy evaluation: joint value, per-player profits, violation."""

    kind: str
    value: float
    phi_m: float
    phi_r: float
    constraint_violation: float
    diagnostics: CostBreakdown

    @property
    def feasible(self) -> bool:
        return self.constraint_violation <= 0.0


def green_reduction(G: float, params: ModelParameters) -> GreenReduction:
    if G < 0:
        raise DomainError(K.ERR_BAD_INVESTMENT)
    rho_m, rho_r, rho_G = K.green_reduction_terms(
        G, params.omega, params.l1, params.l2, params.kappa1,
        params.l3, params.l4, params.kappa2)
    return GreenReduction(rho_m=rho_m, rho_r=rho_r, rho_G=rho_G)


def _evaluate(params: ModelParameters, decisions: DecisionVector,
              policy: str) -> PolicyObjective:
    params.require_policy_price(policy)
    p = params.as_array()
    terms = np.empty(K.N_TERMS, dtype=np.float64)
    status = K.evaluate_terms(decisions.T0, decisions.xi1, decisions.xi2,
                              decisions.G, decisions.W_r, p, terms)
    if status != K.OK:
        raise DomainError(status)
    value, phi_m, phi_r, violation = K.policy_value_from_terms(
        policy_id(policy), decisions.G, p, terms)
    return PolicyObjective(kind=policy, value=value, phi_m=phi_m,
                           phi_r=phi_r, constraint_violation=violation,
                           diagnostics=_breakdown_from_terms(terms))


def carbon_tax_profit(params: ModelParameters, decisions: DecisionVector
                      ) -> PolicyObjective:
    """Joint profit after carbon-tax charges and the green-investment split."""
    return _evaluate(params, decisions, "tax")


def cap_and_trade_profit(params: ModelParameters, decisions: DecisionVector
                         ) -> PolicyObjective:
    """Joint profit with net emissions traded around the allowance U1."""
    return _evaluate(params, decisions, "cap_trade")


def limited_emission_objective(params: ModelParameters,
                               decisions: DecisionVector) -> PolicyObjective:
    """Base joint profit minus G, with the U2 emission-cap violation."""
    return _evaluate(params, decisions, "limited")


def evaluate_policy(params: ModelParameters, decisions: DecisionVector,
                    policy: str) -> PolicyObjective:
    return _evaluate(params, decisions, policy)


def penalize(objective: PolicyObjective, coefficient: float) -> float:
    """Quadratic exterior penalty; equals the value on feasible points."""
    if not coefficient > 0:
        raise ValueError("penalty coefficient must be positive")
    return objective.value - coefficient * objective.constraint_violation ** 2


def make_batch_objective(params: ModelParameters, policy: str):
    """Vectorised objective for the optimizers.

    Returns ``f(X) -> (values, violations, valid)`` for an (n, 5) decision
    matrix.  Rows that violate the model domain come back invalid; the
    optimizers treat them as unusable rather than aborting.  Uses the
    compiled batch kernel when numba is active, the NumPy twin otherwise.
    """
    params.require_policy_price(policy)
    p = params.as_array()
    pid = policy_id(policy)

    if K.NUMBA_ENABLED:
        def objective(X: np.ndarray):
            X = np.ascontiguousarray(X, dtype=np.float64)
            n = X.shape[0]
            values = np.empty(n, dtype=np.float64)
            violations = np.empty(n, dtype=np.float64)
            valid = np.empty(n, dtype=np.bool_)
            K.evaluate_policy_batch(pid, X, p, values, violations, valid)
            return values, violations, valid
    else:
        def objective(X: np.ndarray):
            return K.evaluate_policy_batch_numpy(pid, np.asarray(X), p)

    return objective
