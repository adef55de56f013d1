"""Time loop of the splitting scheme."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import subproblems as sub
from .mms import MmsCase, make_case
from .params import PhysicalParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    n: int
    dt: float
    T: float
    params: PhysicalParams = field(default_factory=PhysicalParams)
    case: str = "mms"
    parallel: bool = True
    record_energy: bool = False
    init: str = "interp"  # interp | ritz | random
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.init not in ("interp", "ritz", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.params.dt != self.dt:
            object.__setattr__(self, "params", self.params.with_(dt=self.dt))
        _ = self.steps

    @property
    def steps(self) -> int:
        ratio = self.T / self.dt
        N = int(round(ratio))
        if N < 1 or abs(ratio - N) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"T / dt = {ratio} is not a positive integer")
        return N


@dataclass(frozen=True, eq=False)
class Systems:
    disc: sub.Discretization
    fluid: sub.FluidSystem
    poro: sub.PoroSystem
    case: MmsCase


def build_systems(config: RunConfig) -> Systems:
    disc = sub.build_discretization(config.n)
    return Systems(
        disc=disc,
        fluid=sub.build_fluid_system(disc, config.params),
        poro=sub.build_poro_system(disc, config.params),
        case=make_case(config.case, config.params),
    )


def random_state(disc: sub.Discretization, seed: int) -> sub.State:
    """Random fields vanishing on the exterior boundary."""
    rng = np.random.default_rng(seed)
    fields = []
    for dm in (disc.V_f, disc.Q_f, disc.V_p, disc.V_p, disc.Q_p):
        v = rng.standard_normal(dm.size)
        if dm is not disc.Q_f:
            v[dm.dirichlet_dofs()] = 0.0
        fields.append(v)
    return sub.State(*fields, t=0.0)


def initialize(config: RunConfig, systems: Systems) -> sub.State:
    """Initial state at t = 0 (nodal interpolation, Ritz projections or random)."""
    disc, case = systems.disc, systems.case
    if config.init == "random":
        return random_state(disc, config.seed)
    if config.init == "ritz":
        from .diagnostics import initial_ritz_state

        return initial_ritz_state(systems, 0.0)
    return sub.State(
        u=disc.V_f.interpolate(case.exact_u, 0.0),
        p=disc.Q_f.interpolate(case.exact_p, 0.0),
        eta=disc.V_p.interpolate(case.exact_eta, 0.0),
        xi=disc.V_p.interpolate(case.exact_xi, 0.0),
        phi=disc.Q_p.interpolate(case.exact_phi, 0.0),
        t=0.0,
    )


def advance(state: sub.State, systems: Systems, executor: ThreadPoolExecutor | None = None,
            t_next: float | None = None) -> sub.State:
    """One step: both subproblems read the same level-n state."""
    if t_next is None:
        t_next = state.t + systems.fluid.params.dt
    if executor is None:
        u, p = sub.fluid_step(systems.fluid, state, systems.case, t_next)
        eta, xi, phi = sub.poro_step(systems.poro, state, systems.case, t_next)
    else:
        fut_f = executor.submit(sub.fluid_step, systems.fluid, state, systems.case, t_next)
        fut_p = executor.submit(sub.poro_step, systems.poro, state, systems.case, t_next)
        (u, p), (eta, xi, phi) = fut_f.result(), fut_p.result()
    return sub.State(u, p, eta, xi, phi, t_next)


@dataclass
class RunResult:
    config: RunConfig
    systems: Systems
    initial: sub.State
    final: sub.State
    energy: list = field(default_factory=list)


def run(config: RunConfig, systems: Systems | None = None, initial: sub.State | None = None,
        callback=None) -> RunResult:
    """Initialize and take ``config.steps`` steps.

    ``callback(prev, next)`` is invoked after every step when given.
    """
    systems = systems or build_systems(config)
    state = initial if initial is not None else initialize(config, systems)
    start = state
    forms = None
    if config.record_energy:
        from .diagnostics import EnergyForms

        forms = EnergyForms(systems.disc, config.params)
    records = []
    executor = ThreadPoolExecutor(max_workers=2) if config.parallel else None
    try:
        for k in range(config.steps):
            t_next = config.T if k + 1 == config.steps else (k + 1) * config.dt
            nxt = advance(state, systems, executor, t_next)
            if forms is not None:
                records.append(forms.record(state, nxt))
            if callback is not None:
                callback(state, nxt)
            state = nxt
    finally:
        if executor is not None:
            executor.shutdown()
    log.debug("n=%d dt=%g: %d steps to t=%g", config.n, config.dt, config.steps, state.t)
    return RunResult(config, systems, start, state, records)
