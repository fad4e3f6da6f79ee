"""Min-max CRLB geometry optimization and codebook construction.

The geometry search alternates a genetic algorithm over the binary pixel
connections (feed ports fixed) with sequential best-replacement updates of
the feed-port set (connections fixed) until neither changes.  A codebook
covering an angular space is built by recursive subdivision: each child
area's optimization warm-starts from the codeword of the parent area that
contains it, so child objectives never exceed the parent's on their area.

All randomness is drawn from streams keyed by (seed, generation,
individual), and fitness evaluation is pure, so results are independent of
the worker-thread count.
"""

from __future__ import annotations

import json
import math
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .crlb import SensingArea, _step_multiple, fd_stencil
from .emdata import ETA0, EMDataset, PortLayout, pattern_gram
from .errors import (
    ConfigError,
    CoverageError,
    DatasetFormatError,
    NonPhysicalConfigError,
    NumericalError,
    ScheduleError,
)
from .network import FeedNetworkConfig, GeometryConfig, build_permutation, load_correction

CODEBOOK_FILE_VERSION = 1

# rng stream tags
_STREAM_SELECT = 0
_STREAM_CROSSOVER = 1
_STREAM_MUTATE = 2


# ---------------------------------------------------------------------------
# parameter types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GAParams:
    """Genetic-algorithm knobs: tournament selection, uniform crossover,
    per-bit flip mutation, elitism."""

    population: int = 500
    generations: int = 200
    crossover_prob: float = 0.9
    mutation_prob: float | None = None      # None: 1/Q per bit
    tournament_size: int = 3
    elite_count: int = 2
    seed: int = 0
    enumerate_small_spaces: bool = True     # exhaustive init population when 2^Q fits

    def __post_init__(self):
        if self.population < 2:
            raise ConfigError("GA population must be at least 2")
        if self.generations < 1:
            raise ConfigError("GA needs at least one generation")
        if not (0.0 <= self.crossover_prob <= 1.0):
            raise ConfigError("crossover probability outside [0, 1]")
        if self.mutation_prob is not None and not (0.0 <= self.mutation_prob <= 1.0):
            raise ConfigError("mutation probability outside [0, 1]")
        if self.tournament_size < 1:
            raise ConfigError("tournament size must be positive")
        if not (0 <= self.elite_count < self.population):
            raise ConfigError("elite count must be smaller than the population")


@dataclass(frozen=True)
class Codeword:
    """Optimized geometry for one sensing area."""

    area: SensingArea
    config: GeometryConfig
    objective: float
    iterations_used: int


@dataclass(frozen=True)
class SubdivisionSchedule:
    """Recursive equal-split schedule over a root space.

    factors[t] is the number of children each stage-t area splits into
    (factors[0] must be 1: the first stage optimizes the whole space).
    axes[t] controls the split: 'both' (square factor, split each axis by
    sqrt(K)), 'theta' or 'phi' (split one axis by K).
    """

    space: SensingArea
    factors: tuple[int, ...] = (1,)
    axes: tuple[str, ...] = ("both",)

    def __post_init__(self):
        if len(self.factors) < 1 or self.factors[0] != 1:
            raise ScheduleError("the first subdivision factor must be 1 (whole space)")
        if len(self.axes) != len(self.factors):
            raise ScheduleError("need one split axis per stage")
        for k, ax in zip(self.factors, self.axes):
            if k < 1:
                raise ScheduleError("subdivision factors must be positive")
            if ax not in ("both", "theta", "phi"):
                raise ScheduleError(f"unknown split axis {ax!r}")
            if ax == "both" and int(round(math.sqrt(k))) ** 2 != k:
                raise ScheduleError(f"axis 'both' needs a square factor, got {k}")

    @property
    def n_stages(self) -> int:
        return len(self.factors)

    @property
    def total_areas(self) -> int:
        return int(np.prod(self.factors))

    def stage_splits(self) -> list[tuple[int, int]]:
        out = []
        for k, ax in zip(self.factors, self.axes):
            if ax == "both":
                r = int(round(math.sqrt(k)))
                out.append((r, r))
            elif ax == "theta":
                out.append((k, 1))
            else:
                out.append((1, k))
        return out


@dataclass(frozen=True)
class TraceRecord:
    area_label: str
    iteration: int
    phase: str                     # 'connections' | 'ports' | 'outer'
    objective: float
    config: GeometryConfig


@dataclass
class OptimizationTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def add(self, area_label, iteration, phase, objective, config):
        self.records.append(TraceRecord(area_label, iteration, phase, float(objective), config))

    def objectives(self, phase: str | None = None, area_label: str | None = None) -> np.ndarray:
        vals = [r.objective for r in self.records
                if (phase is None or r.phase == phase)
                and (area_label is None or r.area_label == area_label)]
        return np.array(vals)

    def phases(self, area_label: str | None = None) -> list[str]:
        return [r.phase for r in self.records
                if area_label is None or r.area_label == area_label]


def export_trace(trace: OptimizationTrace, path) -> None:
    """Tabular text dump: iteration, phase, objective (plus the area label)."""
    with open(path, "w") as fh:
        fh.write("area,iteration,phase,objective\n")
        for r in trace.records:
            obj = "inf" if math.isinf(r.objective) else repr(r.objective)
            fh.write(f"{r.area_label},{r.iteration},{r.phase},{obj}\n")


@dataclass(frozen=True, eq=False)
class Codebook:
    """Per-area optimized geometries (leaves of the subdivision)."""

    schedule: SubdivisionSchedule
    snr_linear: float
    n_feed: int
    n_loaded: int
    codewords: tuple[Codeword, ...]
    stages: tuple[tuple[Codeword, ...], ...] = ()
    traces: dict = field(default_factory=dict)

    @property
    def space(self) -> SensingArea:
        return self.schedule.space


# ---------------------------------------------------------------------------
# objective evaluation with caching
# ---------------------------------------------------------------------------

class ConfigEvaluator:
    """Worst-case CRLB objective of geometries over sensing areas.

    Patterns are computed only on the area's grid points plus the
    finite-difference margin; radiated power comes from the dataset-level
    pattern Gram matrix, which is algebraically the full-sphere quadrature.
    Results are cached by (config, area); evaluation is pure, so many
    configurations can be scored concurrently.
    """

    def __init__(self, dataset: EMDataset, snr_linear: float,
                 feednet: FeedNetworkConfig = FeedNetworkConfig(),
                 fd_step_deg: float | None = None, threads: int = 1):
        if not (snr_linear > 0):
            raise ConfigError("snr must be positive")
        self.dataset = dataset
        self.snr = float(snr_linear)
        self.feednet = feednet
        self.fd_step_deg = fd_step_deg
        self.threads = max(1, int(threads))
        self.hits = 0
        self.misses = 0
        self._cache: dict = {}
        self._supports: dict = {}
        w = dataset.quadrature()
        self._gram = pattern_gram(dataset.e_oc, w)

    # -- area support -------------------------------------------------------

    def _support(self, area: SensingArea):
        key = area.bounds()
        sup = self._supports.get(key)
        if sup is None:
            sup = self._build_support(area)
            self._supports[key] = sup
        return sup

    def _build_support(self, area: SensingArea):
        grid = self.dataset.grid
        s = _step_multiple(grid, self.fd_step_deg)
        t_ids, p_ids = area.indices(grid)
        it = np.repeat(t_ids, p_ids.size)
        ip = np.tile(p_ids, t_ids.size)
        itp, itm, inv_dt, ipp, ipm, inv_dp = fd_stencil(grid, it, ip, s)

        t_sel = np.unique(np.concatenate([it, itp, itm]))
        p_sel = np.unique(np.concatenate([ip, ipp, ipm]))
        t_map = np.full(grid.n_theta, -1, dtype=np.int64)
        t_map[t_sel] = np.arange(t_sel.size)
        p_map = np.full(grid.n_phi, -1, dtype=np.int64)
        p_map[p_sel] = np.arange(p_sel.size)

        slab = np.ascontiguousarray(self.dataset.e_oc[:, :, t_sel][:, :, :, p_sel])
        return {
            "slab": slab,                      # (2, P, Tn, Pn)
            "it": t_map[it], "ip": p_map[ip],
            "itp": t_map[itp], "itm": t_map[itm], "inv_dt": inv_dt,
            "ipp": p_map[ipp], "ipm": p_map[ipm], "inv_dp": inv_dp,
        }

    # -- single evaluation ----------------------------------------------------

    def efficiencies(self, config: GeometryConfig) -> np.ndarray:
        """Per-port radiation efficiencies via the dataset Gram matrix.

        Agrees with network.radiation_efficiency on the full-grid coupled
        patterns up to floating-point reassociation.
        """
        _, lam = self._network_solution(config)
        return lam

    def _combined_port_map(self, config: GeometryConfig):
        V, _ = self._network_solution(config)
        return V

    def _network_solution(self, config: GeometryConfig):
        """V (P, N): overall pattern = e_oc . V, plus the efficiencies."""
        ds = self.dataset
        M, Q = ds.n_feed, ds.n_loaded
        config.validate_against(M, Q)
        N = config.n_active
        W = load_correction(ds.Z, M, Q, config, self.feednet, "evaluate_config")
        perm = build_permutation(config.feed_ports, M, Q)
        Z_AA = ds.Z[np.ix_(perm.active, perm.active)]
        if Q:
            Z_AL = ds.Z[np.ix_(perm.active, perm.loaded)]
            z_feed = Z_AA - Z_AL @ W
        else:
            z_feed = Z_AA.copy()

        A = self.feednet.source_matrix(N) + z_feed
        I = np.linalg.solve(A, np.eye(N, dtype=np.complex128))
        accepted = np.real(np.conj(np.diagonal(I)) * np.diagonal(z_feed @ I))
        if np.any(accepted <= 0):
            raise NonPhysicalConfigError("non-positive accepted power")

        T = np.zeros((ds.n_ports, N), dtype=np.complex128)
        for j, fp in enumerate(config.feed_ports):
            T[fp, j] = 1.0
        if Q:
            T[M:, :] = -W
        S = T @ I
        radiated = np.real(np.einsum("pn,pn->n", S.conj(), self._gram @ S))
        lam = radiated / (2.0 * ETA0 * accepted)
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise NonPhysicalConfigError("invalid efficiency")
        return S * np.sqrt(lam)[None, :], lam

    def _evaluate(self, config: GeometryConfig, area: SensingArea) -> float:
        try:
            V = self._combined_port_map(config)
        except (NonPhysicalConfigError, NumericalError):
            return math.inf
        sup = self._support(area)
        slab = sup["slab"]                                 # (2, P, Tn, Pn)
        pats = np.tensordot(V, slab, axes=([0], [1]))      # (N, 2, Tn, Pn)
        e = np.ascontiguousarray(
            np.moveaxis(pats, 0, 1).reshape(2 * V.shape[1], slab.shape[2], slab.shape[3]))
        _, _, _, obj, _ = kernels.fim_sweep(
            e, sup["it"], sup["ip"], sup["itp"], sup["itm"], sup["inv_dt"],
            sup["ipp"], sup["ipm"], sup["inv_dp"], self.snr)
        return float(obj[np.argmax(obj)])

    # -- public api -----------------------------------------------------------

    def objective(self, config: GeometryConfig, area: SensingArea) -> float:
        key = (config.feed_ports, config.connections, area.bounds())
        val = self._cache.get(key)
        if val is not None:
            self.hits += 1
            return val
        self.misses += 1
        val = self._evaluate(config, area)
        self._cache[key] = val
        return val

    def objective_many(self, configs, area: SensingArea) -> list[float]:
        """Score a batch; duplicates and cache hits are computed once.

        The result order matches the input order and is independent of the
        thread count.
        """
        keys = [(c.feed_ports, c.connections, area.bounds()) for c in configs]
        missing: dict = {}
        for cfg, key in zip(configs, keys):
            if key not in self._cache and key not in missing:
                missing[key] = cfg
        if missing:
            todo = list(missing.values())
            if self.threads > 1 and len(todo) > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    vals = list(pool.map(lambda c: self._evaluate(c, area), todo))
            else:
                vals = [self._evaluate(c, area) for c in todo]
            for key, v in zip(missing.keys(), vals):
                self._cache[key] = v
            self.misses += len(todo)
            self.hits += len(keys) - len(todo)
        else:
            self.hits += len(keys)
        return [self._cache[k] for k in keys]


_EVALUATORS: "weakref.WeakKeyDictionary[EMDataset, dict]" = weakref.WeakKeyDictionary()


def get_evaluator(dataset: EMDataset, snr_linear: float,
                  feednet: FeedNetworkConfig = FeedNetworkConfig(),
                  fd_step_deg: float | None = None, threads: int = 1) -> ConfigEvaluator:
    """Shared per-dataset evaluator so repeated calls reuse the cache."""
    per_ds = _EVALUATORS.get(dataset)
    if per_ds is None:
        per_ds = {}
        _EVALUATORS[dataset] = per_ds
    key = (float(snr_linear), complex(feednet.source_impedance_ohm),
           float(feednet.z_open_ohm), fd_step_deg)
    ev = per_ds.get(key)
    if ev is None:
        ev = ConfigEvaluator(dataset, snr_linear, feednet, fd_step_deg, threads)
        per_ds[key] = ev
    ev.threads = max(1, int(threads))
    return ev


def evaluate_config(dataset: EMDataset, config: GeometryConfig, area: SensingArea,
                    snr_linear: float, feednet: FeedNetworkConfig = FeedNetworkConfig(),
                    fd_step_deg: float | None = None) -> float:
    """Worst-case objective sqrt(Tr C) of one geometry over one area (cached)."""
    return get_evaluator(dataset, snr_linear, feednet, fd_step_deg).objective(config, area)


# ---------------------------------------------------------------------------
# genetic algorithm over pixel connections
# ---------------------------------------------------------------------------

def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _initial_population(params: GAParams, Q: int, init_g: tuple[int, ...]) -> list[tuple[int, ...]]:
    pop: list[tuple[int, ...]] = [tuple(init_g)]
    if params.enumerate_small_spaces and Q <= 20 and (1 << Q) <= params.population:
        for code in range(1 << Q):
            pop.append(tuple((code >> (Q - 1 - b)) & 1 for b in range(Q)))
    seen: set = set()
    pop = [g for g in pop if not (g in seen or seen.add(g))]
    rng = _rng(params.seed, 0, 0, 3)
    while len(pop) < params.population:
        pop.append(tuple(int(b) for b in rng.integers(0, 2, size=Q)))
    return pop[: params.population]


def ga_optimize_connections(
    dataset: EMDataset,
    fixed_feed_ports: tuple[int, ...],
    area: SensingArea,
    params: GAParams,
    init_g: tuple[int, ...],
    snr_linear: float = 1.0,
    feednet: FeedNetworkConfig = FeedNetworkConfig(),
    evaluator: ConfigEvaluator | None = None,
) -> tuple[tuple[int, ...], list[tuple[float, tuple[int, ...]]]]:
    """Best connection vector found for fixed feed ports, plus the
    best-so-far (objective, vector) per generation (non-increasing by
    construction).

    The start vector is injected into the initial population; when 2^Q fits
    in the population the initial population enumerates every vector, which
    makes the result exhaustively optimal.
    """
    ev = evaluator or get_evaluator(dataset, snr_linear, feednet)
    Q = dataset.n_loaded
    if Q == 0:
        cfg = GeometryConfig(fixed_feed_ports, ())
        return (), [(ev.objective(cfg, area), ())]

    mut = params.mutation_prob if params.mutation_prob is not None else 1.0 / Q
    F = tuple(fixed_feed_ports)

    population = _initial_population(params, Q, tuple(init_g))
    best_g: tuple[int, ...] | None = None
    best_obj = math.inf
    history: list[tuple[float, tuple[int, ...]]] = []

    for gen in range(params.generations):
        configs = [GeometryConfig(F, g) for g in population]
        fitness = ev.objective_many(configs, area)
        order = sorted(range(len(population)), key=lambda i: (fitness[i], population[i]))
        gen_best = order[0]
        if fitness[gen_best] < best_obj:
            best_obj = fitness[gen_best]
            best_g = population[gen_best]
        history.append((best_obj, best_g))

        if gen == params.generations - 1:
            break

        next_pop: list[tuple[int, ...]] = [population[i] for i in order[: params.elite_count]]
        for child in range(params.elite_count, params.population):
            sel = _rng(params.seed, gen, child, _STREAM_SELECT)
            picks1 = sel.integers(0, len(population), size=params.tournament_size)
            picks2 = sel.integers(0, len(population), size=params.tournament_size)
            p1 = min(picks1, key=lambda i: (fitness[i], i))
            p2 = min(picks2, key=lambda i: (fitness[i], i))
            g1, g2 = population[p1], population[p2]

            xo = _rng(params.seed, gen, child, _STREAM_CROSSOVER)
            if xo.uniform() < params.crossover_prob:
                mask = xo.integers(0, 2, size=Q)
                genome = tuple(a if m else b for a, b, m in zip(g1, g2, mask))
            else:
                genome = g1

            mu = _rng(params.seed, gen, child, _STREAM_MUTATE)
            flips = mu.uniform(size=Q) < mut
            genome = tuple(int(b ^ f) for b, f in zip(genome, flips))
            next_pop.append(genome)
        population = next_pop

    assert best_g is not None
    return best_g, history


# ---------------------------------------------------------------------------
# sequential feed-port update
# ---------------------------------------------------------------------------

def sequential_port_update(
    dataset: EMDataset,
    fixed_g: tuple[int, ...],
    init_feed_ports: tuple[int, ...],
    area: SensingArea,
    snr_linear: float = 1.0,
    feednet: FeedNetworkConfig = FeedNetworkConfig(),
    evaluator: ConfigEvaluator | None = None,
) -> tuple[tuple[int, ...], list[tuple[float, tuple[int, ...]]]]:
    """Best-replacement sweep over feed-port slots until a full pass is quiet.

    Slot n is re-selected from the unused ports plus its incumbent; the
    incumbent is always a candidate, so the objective never increases.
    Ties break toward the smallest port index.  Returns the port set and the
    (objective, ports) after each pass.
    """
    ev = evaluator or get_evaluator(dataset, snr_linear, feednet)
    M = dataset.n_feed
    F = list(init_feed_ports)
    g = tuple(fixed_g)
    passes: list[tuple[float, tuple[int, ...]]] = []

    while True:
        changed = False
        for slot in range(len(F)):
            in_use = set(F) - {F[slot]}
            candidates = sorted(set(range(M)) - in_use)
            trials = [GeometryConfig(tuple(F[:slot] + [c] + F[slot + 1:]), g)
                      for c in candidates]
            objs = ev.objective_many(trials, area)
            best = int(np.argmin(objs))          # first minimum: smallest port index
            if candidates[best] != F[slot]:
                F[slot] = candidates[best]
                changed = True
        passes.append((ev.objective(GeometryConfig(tuple(F), g), area), tuple(F)))
        if not changed:
            break
    return tuple(F), passes


# ---------------------------------------------------------------------------
# alternating optimization
# ---------------------------------------------------------------------------

def alternating_optimize(
    dataset: EMDataset,
    init_config: GeometryConfig,
    area: SensingArea,
    ga_params: GAParams = GAParams(),
    snr_linear: float = 1.0,
    max_outer: int = 20,
    feednet: FeedNetworkConfig = FeedNetworkConfig(),
    evaluator: ConfigEvaluator | None = None,
    trace: OptimizationTrace | None = None,
    area_label: str | None = None,
) -> tuple[Codeword, OptimizationTrace]:
    """Alternate connection GA and port updates until the geometry is stable.

    Every phase starts from the incumbent, so the objective sequence is
    non-increasing; non-convergence at max_outer returns the best-so-far.
    """
    if max_outer < 1:
        raise ConfigError("max_outer must be at least 1")
    ev = evaluator or get_evaluator(dataset, snr_linear, feednet)
    trace = trace if trace is not None else OptimizationTrace()
    label = area_label or area.label()

    F = tuple(init_config.feed_ports)
    g = tuple(init_config.connections)
    init_config.validate_against(dataset.n_feed, dataset.n_loaded)

    step = 0
    outer = 0
    for outer in range(1, max_outer + 1):
        F_before, g_before = F, g

        g, ga_hist = ga_optimize_connections(
            dataset, F, area, ga_params, g, snr_linear, feednet, evaluator=ev)
        for obj, g_best in ga_hist:
            trace.add(label, step, "connections", obj, GeometryConfig(F, g_best))
            step += 1

        F, pass_hist = sequential_port_update(
            dataset, g, F, area, snr_linear, feednet, evaluator=ev)
        for obj, f_best in pass_hist:
            trace.add(label, step, "ports", obj, GeometryConfig(f_best, g))
            step += 1

        current = ev.objective(GeometryConfig(F, g), area)
        trace.add(label, step, "outer", current, GeometryConfig(F, g))
        step += 1

        if F == F_before and g == g_before:
            break

    config = GeometryConfig(F, g)
    cw = Codeword(area=area, config=config,
                  objective=ev.objective(config, area), iterations_used=outer)
    return cw, trace


# ---------------------------------------------------------------------------
# initial configuration
# ---------------------------------------------------------------------------

def default_initial_config(layout: PortLayout, n_active: int) -> GeometryConfig:
    """Greedy farthest-point feed spread with all pixel links shorted."""
    if not (1 <= n_active <= layout.n_feed):
        raise ConfigError(f"n_active must be within 1..{layout.n_feed}")
    pos = layout.feed_port_positions()
    centroid = pos.mean(axis=0)
    d0 = np.linalg.norm(pos - centroid, axis=1)
    chosen = [int(np.argmax(d0))]
    while len(chosen) < n_active:
        dmin = np.min(np.linalg.norm(pos[:, None, :] - pos[chosen][None, :, :], axis=2), axis=1)
        dmin[chosen] = -1.0
        chosen.append(int(np.argmax(dmin)))
    return GeometryConfig(tuple(chosen), (0,) * layout.n_loaded)


# ---------------------------------------------------------------------------
# subdivision codebook
# ---------------------------------------------------------------------------

def _split_span(lo: float, hi: float, k: int, step_deg: float, what: str) -> list[tuple[float, float]]:
    if k == 1:
        return [(lo, hi)]
    width = Fraction(str(float(hi))) - Fraction(str(float(lo)))
    child = width / k
    if (child / Fraction(str(float(step_deg)))).denominator != 1:
        raise ScheduleError(
            f"cannot split {what} span [{lo}, {hi}] into {k} grid-aligned parts "
            f"at step {step_deg}")
    edges = [float(Fraction(str(float(lo))) + i * child) for i in range(k + 1)]
    return [(edges[i], edges[i + 1]) for i in range(k)]


def stage_areas(schedule: SubdivisionSchedule, step_deg: float) -> list[list[SensingArea]]:
    """Areas per stage; each stage tiles its parent exactly on the grid."""
    stages = [[schedule.space]]
    for (kt, kp) in schedule.stage_splits()[1:]:
        children: list[SensingArea] = []
        for parent in stages[-1]:
            th = _split_span(parent.theta_min_deg, parent.theta_max_deg, kt, step_deg, "theta")
            ph = _split_span(parent.phi_min_deg, parent.phi_max_deg, kp, step_deg, "phi")
            for t0, t1 in th:
                for p0, p1 in ph:
                    children.append(SensingArea(t0, t1, p0, p1))
        stages.append(children)
    return stages


def _containing(parent_areas: list[SensingArea], child: SensingArea) -> int:
    cx = 0.5 * (child.theta_min_deg + child.theta_max_deg)
    cy = 0.5 * (child.phi_min_deg + child.phi_max_deg)
    for i, area in enumerate(parent_areas):
        if area.contains(cx, cy):
            return i
    raise ScheduleError(f"child area {child} lies in no parent area")


def build_codebook(
    dataset: EMDataset,
    schedule: SubdivisionSchedule,
    ga_params: GAParams = GAParams(),
    snr_linear: float = 1.0,
    init_config: GeometryConfig | None = None,
    n_active: int | None = None,
    max_outer: int = 20,
    feednet: FeedNetworkConfig = FeedNetworkConfig(),
    threads: int = 1,
    fd_step_deg: float | None = None,
) -> Codebook:
    """Optimize one codeword per area, subdividing stage by stage.

    Children warm-start from the codeword of the parent area containing
    them, so the parent geometry is always a candidate and the child's
    objective on its own area can only improve on it.
    """
    if init_config is None:
        if n_active is None:
            raise ConfigError("provide init_config or n_active")
        init_config = default_initial_config(dataset.layout, n_active)
    init_config.validate_against(dataset.n_feed, dataset.n_loaded)

    areas_per_stage = stage_areas(schedule, dataset.grid.step_deg)
    for stage in areas_per_stage:
        for area in stage:
            area.indices(dataset.grid)          # alignment check up front

    ev = ConfigEvaluator(dataset, snr_linear, feednet, fd_step_deg, threads)
    traces: dict[str, OptimizationTrace] = {}
    stages: list[tuple[Codeword, ...]] = []

    for t, areas in enumerate(areas_per_stage):
        stage_cws: list[Codeword] = []
        for k, area in enumerate(areas):
            if t == 0:
                start = init_config
            else:
                parent = stages[t - 1][_containing(areas_per_stage[t - 1], area)]
                start = parent.config
            label = f"stage{t + 1}_area{k + 1}_{area.label()}"
            tr = OptimizationTrace()
            cw, _ = alternating_optimize(
                dataset, start, area, ga_params, snr_linear, max_outer,
                feednet, evaluator=ev, trace=tr, area_label=label)
            traces[label] = tr
            stage_cws.append(cw)
        stages.append(tuple(stage_cws))

    return Codebook(
        schedule=schedule, snr_linear=float(snr_linear),
        n_feed=dataset.n_feed, n_loaded=dataset.n_loaded,
        codewords=stages[-1], stages=tuple(stages), traces=traces,
    )


def codebook_lookup(codebook: Codebook, angle_deg: tuple[float, float]) -> Codeword:
    """Codeword whose leaf area contains the angle.

    Boundaries are lower-inclusive and upper-exclusive, except on the global
    upper edges of the covered space, which belong to the last tile.
    """
    th, ph = angle_deg
    space = codebook.space
    if not space.contains(th, ph):
        raise CoverageError(f"angle ({th}, {ph}) outside the codebook space {space}")
    for cw in codebook.codewords:
        a = cw.area
        t_hi_ok = th < a.theta_max_deg or a.theta_max_deg == space.theta_max_deg
        p_hi_ok = ph < a.phi_max_deg or a.phi_max_deg == space.phi_max_deg
        if a.theta_min_deg <= th and t_hi_ok and a.phi_min_deg <= ph and p_hi_ok:
            return cw
    raise CoverageError(f"angle ({th}, {ph}) not covered by any leaf area")


# ---------------------------------------------------------------------------
# codebook file I/O
# ---------------------------------------------------------------------------

def _area_dict(a: SensingArea) -> dict:
    return {"theta_min_deg": a.theta_min_deg, "theta_max_deg": a.theta_max_deg,
            "phi_min_deg": a.phi_min_deg, "phi_max_deg": a.phi_max_deg}


def _area_from(d: dict) -> SensingArea:
    return SensingArea(float(d["theta_min_deg"]), float(d["theta_max_deg"]),
                       float(d["phi_min_deg"]), float(d["phi_max_deg"]))


def save_codebook(cb: Codebook, path) -> None:
    """Versioned structured-text codebook: 1-based port indices, connection
    bitstring with the first loaded port leftmost."""
    doc = {
        "version": CODEBOOK_FILE_VERSION,
        "space": _area_dict(cb.space),
        "schedule": {"factors": list(cb.schedule.factors), "axes": list(cb.schedule.axes)},
        "snr_linear": cb.snr_linear,
        "n_feed": cb.n_feed,
        "n_loaded": cb.n_loaded,
        "codewords": [
            {
                "area": _area_dict(cw.area),
                "feed_ports": [i + 1 for i in cw.config.feed_ports],
                "connections": cw.config.connection_bitstring(),
                "objective_rad": cw.objective,
                "iterations_used": cw.iterations_used,
            }
            for cw in cb.codewords
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_codebook(path) -> Codebook:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DatasetFormatError(f"{path}: not a valid codebook file ({exc})") from exc
    if doc.get("version") != CODEBOOK_FILE_VERSION:
        raise DatasetFormatError(f"{path}: unsupported codebook version {doc.get('version')!r}")
    try:
        schedule = SubdivisionSchedule(
            space=_area_from(doc["space"]),
            factors=tuple(int(k) for k in doc["schedule"]["factors"]),
            axes=tuple(str(a) for a in doc["schedule"]["axes"]),
        )
        cws = []
        for rec in doc["codewords"]:
            cfg = GeometryConfig(
                feed_ports=tuple(int(i) - 1 for i in rec["feed_ports"]),
                connections=tuple(int(ch) for ch in rec["connections"]),
            )
            cws.append(Codeword(area=_area_from(rec["area"]), config=cfg,
                                objective=float(rec["objective_rad"]),
                                iterations_used=int(rec["iterations_used"])))
        return Codebook(
            schedule=schedule, snr_linear=float(doc["snr_linear"]),
            n_feed=int(doc["n_feed"]), n_loaded=int(doc["n_loaded"]),
            codewords=tuple(cws),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"{path}: missing or malformed field ({exc})") from exc
