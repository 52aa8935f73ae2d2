"""Resource counts, query-infidelity bounds and success rates.

Per-step errors come from the gate-level modules: a CSWAP timestep is one CZ,
a GUE timestep is one CZ followed by one state transfer.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .noise import ParameterSet, preset

FAMILIES = ("CSWAP", "GUE")
RAILS = ("single", "dual")


@dataclass(frozen=True)
class ArchitectureSpec:
    family: str
    rail: str
    n: int
    params: ParameterSet = field(default_factory=lambda: preset("PS2"))

    def __post_init__(self):
        fam = self.family.upper()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.rail not in RAILS:
            raise ValueError(f"rail must be one of {RAILS}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("need n >= 2 address qubits")

    @property
    def N(self) -> int:
        return 2**self.n


@dataclass(frozen=True)
class Resources:
    N_cav: int
    N_gates: int
    N_ts: int


@dataclass
class QueryMetrics:
    N_cav: int
    N_gates: int
    N_ts: int
    t_query: float
    epsilon: float
    infidelity_bound: float
    P_no_flag: float
    T_success: float
    Gamma_success: float
    A: float = 4.0

    @property
    def fidelity_bound(self) -> float:
        return 1.0 - self.infidelity_bound

    @property
    def flag_probability(self) -> float:
        return 1.0 - self.P_no_flag

    def as_dict(self) -> dict:
        return asdict(self)


def _check_n(n: int):
    if int(n) != n or n < 2:
        raise ValueError("need n >= 2 address qubits")


def cswap_timesteps(n: int) -> int:
    """Pipelined timestep count of the CSWAP tree.

    Counted as 4 x (1 + 2 + 3(n - 3) + 2) + 2 for n >= 3, which collapses to
    12n - 14; the two-bit tree needs 10.
    """
    _check_n(n)
    if n == 2:
        return 10
    return 4 * (1 + 2 + 3 * (n - 3) + 2) + 2


def resources(spec: ArchitectureSpec) -> Resources:
    n, N = spec.n, spec.N
    if spec.family == "CSWAP":
        n_cav = (5 * N) // 2 + n - 3
        n_gates = 7 * N - 4 * n - 8
        n_ts = cswap_timesteps(n)
    else:
        n_cav = 3 * N + n - 2
        n_gates = 4 * N - 2 * n - 4
        n_ts = 6 * n - 6
    if spec.rail == "dual":
        n_cav *= 2
    return Resources(n_cav, n_gates, n_ts)


def timestep_duration(spec: ArchitectureSpec, transfer_window: float | None = None) -> float:
    """Wall-clock length of one timestep in us.

    GUE timesteps add one state transfer, whose duration is the full pulse
    window (8/xi by default).
    """
    p = spec.params
    if spec.family == "CSWAP":
        return p.t_cz
    window = 8.0 / p.xi if transfer_window is None else transfer_window
    return p.t_cz + window


def infidelity_bound(
    epsilon: float,
    N: int,
    N_ts: int,
    router_model: str = "two_level",
    A: float = 4.0,
) -> float:
    """A eps N_ts log2 N (1 + log2 N) for two-level routers, without the last factor for three-level ones.

    Capped at 1.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    n = math.log2(N)
    bound = A * epsilon * N_ts * n
    if router_model == "two_level":
        bound *= 1 + n
    elif router_model != "three_level":
        raise ValueError("router_model must be 'two_level' or 'three_level'")
    return min(bound, 1.0)


def success_metrics(
    spec: ArchitectureSpec,
    epsilon: float,
    P_step: float,
    A: float = 4.0,
    router_model: str = "two_level",
) -> QueryMetrics:
    if not 0 <= P_step <= 1:
        raise ValueError("P_step must lie in [0, 1]")
    r = resources(spec)
    t_query = timestep_duration(spec) * r.N_ts
    p_ok = P_step**r.N_gates
    # rate first: p_ok can be subnormal, where t_query / p_ok overflows
    gamma = p_ok / t_query
    T = t_query / p_ok if p_ok > 0 else math.inf
    return QueryMetrics(
        r.N_cav, r.N_gates, r.N_ts, t_query, epsilon,
        infidelity_bound(epsilon, spec.N, r.N_ts, router_model, A),
        p_ok, T, gamma, A,
    )


# ---------------------------------------------------------------------------
# Per-step errors from the gate-level simulations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepErrors:
    """Per-timestep error, keep probability and error without post-selection."""

    epsilon: float
    P_step: float
    epsilon_no_postselect: float


@lru_cache(maxsize=None)
def _cz_errors(params: ParameterSet, rail: str) -> StepErrors:
    from .czfid import MeasurementModel, dual_rail_channel, simulate_physical_cz_channel, single_rail_estimate

    ps = simulate_physical_cz_channel(params)
    nps = simulate_physical_cz_channel(params, MeasurementModel(1.0, 1.0, 1.0))
    if rail == "single":
        est, raw = single_rail_estimate(ps), single_rail_estimate(nps)
        return StepErrors(est.epsilon, est.P_success, raw.epsilon)
    est = dual_rail_channel(ps).estimate
    raw = dual_rail_channel(nps, post_select=False).estimate
    return StepErrors(est.epsilon, est.P_success, raw.epsilon)


@lru_cache(maxsize=None)
def _transfer_outcomes(params: ParameterSet):
    from .gue import GueChain, PulsePair, dual_rail_outcome, propagate_single_rail, single_rail_outcome

    ch = propagate_single_rail(GueChain.symmetric(params.gamma), PulsePair.from_params(params), params)
    return single_rail_outcome(ch), dual_rail_outcome(ch)


def step_errors(family: str, rail: str, params: ParameterSet) -> StepErrors:
    """Simulated per-step errors for one architecture variant.

    GUE steps combine the CZ with one transfer: eps = 1 - F_g(CZ) F_st and
    P_step = P_CZ P_st. Without post-selection a lost dual-rail photon counts
    as an error, so the transfer contributes 1 - F_st P_st.
    """
    family = family.upper()
    cz = _cz_errors(params, rail)
    if family == "CSWAP":
        return cz
    sr, dr = _transfer_outcomes(params)
    st = sr if rail == "single" else dr
    eps = 1 - (1 - cz.epsilon) * st.F_st
    p_step = cz.P_step * st.P_st
    eps_raw = 1 - (1 - cz.epsilon_no_postselect) * st.F_st * st.P_st
    return StepErrors(eps, p_step, eps_raw)


def architecture_metrics(spec: ArchitectureSpec, errors: StepErrors | None = None, **kw) -> QueryMetrics:
    errors = step_errors(spec.family, spec.rail, spec.params) if errors is None else errors
    return success_metrics(spec, errors.epsilon, errors.P_step, **kw)


def architecture_comparison_table(
    presets: Sequence[str] = ("PS1", "PS2", "PS3"),
    n_range: Iterable[int] = range(2, 13),
    families: Sequence[str] = FAMILIES,
    rails: Sequence[str] = RAILS,
    errors: dict | None = None,
) -> list[dict]:
    """One row per (preset, family, rail, n).

    ``errors`` may map (preset, family, rail) to precomputed StepErrors.
    The non-post-selected bound uses the error without flagging.
    """
    rows = []
    n_values = list(n_range)
    for name in presets:
        params = preset(name)
        for fam in families:
            for rail in rails:
                key = (name, fam.upper(), rail)
                e = errors[key] if errors and key in errors else step_errors(fam, rail, params)
                for n in n_values:
                    spec = ArchitectureSpec(fam, rail, n, params)
                    m = success_metrics(spec, e.epsilon, e.P_step)
                    rows.append(dict(
                        preset=name, family=spec.family, rail=rail, n=n,
                        N_cav=m.N_cav, N_gates=m.N_gates, N_ts=m.N_ts, t_query_us=m.t_query,
                        epsilon=e.epsilon, infidelity_bound=m.infidelity_bound,
                        infidelity_bound_no_postselect=infidelity_bound(
                            e.epsilon_no_postselect, spec.N, m.N_ts),
                        flag_probability=m.flag_probability,
                        T_success_us=m.T_success, Gamma_success_per_us=m.Gamma_success,
                    ))
    return rows
