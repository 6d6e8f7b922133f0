"""Real-coded genetic algorithm: rank scaling, selection, crossover, mutation, elitism.

Chromosomes are plain float rows of a 2-D array. A :class:`GeneSpace`
carries the bounds and the repair rule (clamp to bounds, then sort the
leading radius genes ascending).
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import (ChannelParams, EvalSettings, SymbolStream, amplify, fitness,
                      mse_on_stream)
from .constellation import GeneVector, RingLayout, SymmetryMode, expand, gene_bounds


class Selection(enum.Enum):
    STOCHASTIC_UNIFORM = "stochastic_uniform"
    REMAINDER = "remainder"
    UNIFORM = "uniform"
    ROULETTE = "roulette"
    TOURNAMENT = "tournament"


class Crossover(enum.Enum):
    SCATTERED = "scattered"
    SINGLE_POINT = "single_point"
    TWO_POINT = "two_point"
    INTERMEDIATE = "intermediate"
    HEURISTIC = "heuristic"
    ARITHMETIC = "arithmetic"


class Termination(enum.Enum):
    MAX_GENERATIONS = "MAX_GENERATIONS"
    STALL = "STALL"


def _parse_enum(cls, v):
    if isinstance(v, cls):
        return v
    key = str(v).strip().upper().replace("-", "_")
    try:
        return cls[key]
    except KeyError:
        names = ", ".join(m.name for m in cls)
        raise ValueError(f"unknown {cls.__name__.lower()} {v!r}; choose from {names}") from None


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 80
    max_generations: int = 130
    selection: Selection = Selection.STOCHASTIC_UNIFORM
    crossover: Crossover = Crossover.SCATTERED
    elite_count: int = 2
    crossover_fraction: float = 0.8
    tournament_size: int = 4
    mutation_scale: float = 1.0
    mutation_shrink: float = 1.0
    heuristic_ratio: float = 1.2
    intermediate_ratio: float = 1.0
    stall_generations: int = 50
    stall_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "selection", _parse_enum(Selection, self.selection))
        object.__setattr__(self, "crossover", _parse_enum(Crossover, self.crossover))
        if self.pop_size < 4:
            raise ValueError(f"pop_size must be >= 4, got {self.pop_size}")
        if not 0 <= self.elite_count < self.pop_size:
            raise ValueError(f"elite_count must be in [0, pop_size), got {self.elite_count}")
        if not 0 < self.crossover_fraction <= 1:
            raise ValueError(f"crossover_fraction must be in (0, 1], got {self.crossover_fraction}")
        if self.max_generations < 0:
            raise ValueError("max_generations must be non-negative")
        if not 1 <= self.tournament_size <= self.pop_size:
            raise ValueError(f"tournament_size must be in [1, pop_size], got {self.tournament_size}")
        if self.mutation_scale < 0:
            raise ValueError("mutation_scale must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selection"] = self.selection.name
        d["crossover"] = self.crossover.name
        return d


@dataclass(frozen=True, eq=False)
class GeneSpace:
    """Box bounds for a chromosome; the first ``n_sorted`` genes are kept ascending."""

    lower: np.ndarray
    upper: np.ndarray
    n_sorted: int = 0
    layout: RingLayout | None = None
    symmetry: SymmetryMode | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or np.any(self.upper < self.lower):
            raise ValueError("bad gene bounds")

    @classmethod
    def for_apsk(cls, layout: RingLayout, symmetry: SymmetryMode) -> GeneSpace:
        b = np.array(gene_bounds(layout, symmetry))
        return cls(b[:, 0], b[:, 1], layout.n_rings - 1, layout, symmetry)

    @property
    def n_genes(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def repair(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(x, self.lower, self.upper)
        if self.n_sorted > 1:
            x[..., : self.n_sorted] = np.sort(x[..., : self.n_sorted], axis=-1)
        return x

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.repair(rng.uniform(self.lower, self.upper, size=(n, self.n_genes)))

    def to_genes(self, x: Sequence[float]) -> GeneVector:
        if self.layout is None:
            raise ValueError("gene space has no APSK layout attached")
        return GeneVector.from_array(x, self.layout, self.symmetry)


# -- fitness scaling and selection ---------------------------------------------


def rank_scale(scores: Sequence[float], n_parents: int) -> np.ndarray:
    """Expectations proportional to 1/sqrt(rank), summing to ``n_parents``."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("cannot rank an empty score list")
    if n_parents < 1:
        raise ValueError("n_parents must be >= 1")
    order = np.argsort(-s, kind="stable")
    e = np.empty(s.size)
    e[order] = 1.0 / np.sqrt(np.arange(1, s.size + 1))
    return e * (n_parents / e.sum())


def select_stochastic_uniform(e, n: int, rng: np.random.Generator) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    cum = np.cumsum(e)
    step = cum[-1] / n
    pointers = rng.uniform(0, step) + step * np.arange(n)
    idx = np.searchsorted(cum, pointers, side="right")
    return np.minimum(idx, e.size - 1)


def select_roulette(e, n: int, rng: np.random.Generator) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    cum = np.cumsum(e)
    idx = np.searchsorted(cum, rng.uniform(0, cum[-1], size=n), side="right")
    return np.minimum(idx, e.size - 1)


def select_remainder(e, n: int, rng: np.random.Generator) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    # tiny slack so values like 2.0000000001 from normalization count as whole
    whole = np.floor(e + 1e-9).astype(int)
    if whole.sum() > n:
        whole = np.floor(e * (n / e.sum())).astype(int)
    fixed = np.repeat(np.arange(e.size), whole)
    rest = n - fixed.size
    if rest == 0:
        return fixed
    frac = np.clip(e - whole, 0, None)
    if frac.sum() <= 0:
        frac = e
    return np.concatenate([fixed, select_roulette(frac, rest, rng)])


def select_uniform(pop_size: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, pop_size, size=n)


def select_tournament(scores, n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Each slot: draw k distinct members, keep the best score (first drawn on ties)."""
    s = np.asarray(scores, dtype=float)
    if not 1 <= k <= s.size:
        raise ValueError(f"tournament size {k} outside [1, {s.size}]")
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        draw = rng.choice(s.size, size=k, replace=False)
        out[i] = draw[np.argmax(s[draw])]
    return out


def select(cfg: GaConfig, scores: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if cfg.selection is Selection.UNIFORM:
        return select_uniform(len(scores), n, rng)
    if cfg.selection is Selection.TOURNAMENT:
        return select_tournament(scores, n, cfg.tournament_size, rng)
    e = rank_scale(scores, n)
    if cfg.selection is Selection.STOCHASTIC_UNIFORM:
        return select_stochastic_uniform(e, n, rng)
    if cfg.selection is Selection.REMAINDER:
        return select_remainder(e, n, rng)
    return select_roulette(e, n, rng)


# -- crossover -----------------------------------------------------------------


def _pair(p1, p2):
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError(f"parent shapes differ: {p1.shape} vs {p2.shape}")
    return p1, p2


def xover_scattered(p1, p2, rng: np.random.Generator) -> np.ndarray:
    p1, p2 = _pair(p1, p2)
    return np.where(rng.random(p1.size) < 0.5, p1, p2)


def xover_single_point(p1, p2, rng: np.random.Generator, cut: int | None = None) -> np.ndarray:
    p1, p2 = _pair(p1, p2)
    if p1.size < 2:
        raise ValueError("point crossover needs at least 2 genes")
    c = int(rng.integers(1, p1.size)) if cut is None else cut
    return np.concatenate([p1[:c], p2[c:]])


def xover_two_point(p1, p2, rng: np.random.Generator, cuts: tuple[int, int] | None = None):
    p1, p2 = _pair(p1, p2)
    if p1.size < 2:
        raise ValueError("point crossover needs at least 2 genes")
    if cuts is None:
        # distinct cut positions from 1..L; a cut at L leaves a one-sided segment
        a, b = np.sort(rng.choice(np.arange(1, p1.size + 1), size=2, replace=False))
    else:
        a, b = cuts
    child = p1.copy()
    child[a:b] = p2[a:b]
    return child


def xover_intermediate(p1, p2, rng: np.random.Generator, ratio: float = 1.0) -> np.ndarray:
    p1, p2 = _pair(p1, p2)
    return p1 + rng.random(p1.size) * ratio * (p2 - p1)


def xover_heuristic(p1, p2, s1: float, s2: float, ratio: float = 1.2,
                    lower=None, upper=None) -> np.ndarray:
    """Step from the worse parent past the better one, then clamp."""
    p1, p2 = _pair(p1, p2)
    best, worst = (p1, p2) if s1 >= s2 else (p2, p1)
    child = worst + ratio * (best - worst)
    if lower is not None or upper is not None:
        child = np.clip(child, lower, upper)
    return child


def xover_arithmetic(p1, p2, rng: np.random.Generator, alpha: float | None = None):
    p1, p2 = _pair(p1, p2)
    a = rng.random() if alpha is None else alpha
    return a * p1 + (1 - a) * p2


def crossover(cfg: GaConfig, space: GeneSpace, p1, p2, s1, s2, rng) -> np.ndarray:
    kind = cfg.crossover
    if kind is Crossover.SCATTERED:
        child = xover_scattered(p1, p2, rng)
    elif kind is Crossover.SINGLE_POINT:
        child = xover_single_point(p1, p2, rng)
    elif kind is Crossover.TWO_POINT:
        child = xover_two_point(p1, p2, rng)
    elif kind is Crossover.INTERMEDIATE:
        child = xover_intermediate(p1, p2, rng, cfg.intermediate_ratio)
    elif kind is Crossover.HEURISTIC:
        child = xover_heuristic(p1, p2, s1, s2, cfg.heuristic_ratio, space.lower, space.upper)
    else:
        child = xover_arithmetic(p1, p2, rng)
    return space.repair(child)


def mutate_gaussian(x, gen: int, cfg: GaConfig, space: GeneSpace,
                    rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    shrink = 1.0 - cfg.mutation_shrink * gen / max(cfg.max_generations, 1)
    sigma = cfg.mutation_scale * space.span * max(shrink, 0.0)
    if not np.any(sigma > 0):
        return x.copy()
    return space.repair(x + sigma * rng.standard_normal(x.size))


# -- population loop -----------------------------------------------------------

# evaluator(genes[k, L], generation, member_indices[k]) -> mse[k]
Evaluator = Callable[[np.ndarray, int, np.ndarray], np.ndarray]


@dataclass(eq=False)
class Population:
    generation_index: int
    genes: np.ndarray
    mse: np.ndarray
    space: GeneSpace | None = None

    @property
    def scores(self) -> np.ndarray:
        return np.array([fitness(m) for m in self.mse])

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.scores))

    @property
    def members(self) -> list[GeneVector]:
        return [self.space.to_genes(x) for x in self.genes]

    def __len__(self) -> int:
        return self.genes.shape[0]


def brood_sizes(cfg: GaConfig) -> tuple[int, int, int]:
    """(elite, crossover, mutation) child counts per generation."""
    n_elite = cfg.elite_count
    n_xover = int(round(cfg.crossover_fraction * (cfg.pop_size - n_elite)))
    return n_elite, n_xover, cfg.pop_size - n_elite - n_xover


def next_generation(pop: Population, cfg: GaConfig, space: GeneSpace, evaluator: Evaluator,
                    rng: np.random.Generator) -> Population:
    n_elite, n_xover, n_mut = brood_sizes(cfg)
    scores = pop.scores
    gen = pop.generation_index + 1
    order = np.argsort(-scores, kind="stable")
    elite = order[:n_elite]

    parents = select(cfg, scores, 2 * n_xover + n_mut, rng)
    parents = parents[rng.permutation(parents.size)]

    kids = np.empty((n_xover + n_mut, space.n_genes))
    for i in range(n_xover):
        a, b = parents[2 * i], parents[2 * i + 1]
        kids[i] = crossover(cfg, space, pop.genes[a], pop.genes[b], scores[a], scores[b], rng)
    for j in range(n_mut):
        kids[n_xover + j] = mutate_gaussian(pop.genes[parents[2 * n_xover + j]], gen, cfg, space,
                                            rng)

    idx = np.arange(n_elite, cfg.pop_size)
    kid_mse = np.asarray(evaluator(kids, gen, idx), dtype=float)
    return Population(
        generation_index=gen,
        genes=np.vstack([pop.genes[elite], kids]),
        mse=np.concatenate([pop.mse[elite], kid_mse]),
        space=space,
    )


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_mse: float
    mean_mse: float
    best_genes: tuple[float, ...]


@dataclass
class RunTrace:
    records: list[GenerationRecord] = field(default_factory=list)
    termination_reason: Termination | None = None

    @property
    def best_mse(self) -> np.ndarray:
        return np.array([r.best_mse for r in self.records])

    def record(self, pop: Population) -> None:
        b = pop.best_index
        self.records.append(GenerationRecord(
            pop.generation_index, float(pop.mse[b]), float(np.mean(pop.mse)),
            tuple(float(v) for v in pop.genes[b]),
        ))


def stalled(best: Sequence[float], window: int, tol: float) -> bool:
    """Relative best-MSE improvement over the last ``window`` generations below ``tol``."""
    if window < 1 or len(best) <= window:
        return False
    old, new = best[-window - 1], best[-1]
    if old <= 0:
        return True
    return (old - new) / old < tol


def ga_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def evolve(space: GeneSpace, cfg: GaConfig, evaluator: Evaluator) -> tuple[np.ndarray, RunTrace]:
    """Run the GA loop on an arbitrary gene space; returns (best genes, trace)."""
    rng = ga_rng(cfg.seed)
    x0 = space.sample(rng, cfg.pop_size)
    pop = Population(0, x0, np.asarray(evaluator(x0, 0, np.arange(cfg.pop_size)), float), space)
    trace = RunTrace()
    trace.record(pop)
    reason = Termination.MAX_GENERATIONS
    for _ in range(cfg.max_generations):
        pop = next_generation(pop, cfg, space, evaluator, rng)
        trace.record(pop)
        if stalled(trace.best_mse, cfg.stall_generations, cfg.stall_tol):
            reason = Termination.STALL
            break
    trace.termination_reason = reason
    return pop.genes[pop.best_index].copy(), trace


class ChannelEvaluator:
    """Distortion MSE of each chromosome at the target SNR.

    Noise streams depend only on (master seed, generation) with common random
    numbers, or (master seed, generation, member index) without, so results
    do not depend on ``workers``.
    """

    def __init__(self, space: GeneSpace, channel: ChannelParams | None = None,
                 settings: EvalSettings | None = None, master_seed: int | None = None,
                 workers: int = 1):
        self.space = space
        self.channel = channel or ChannelParams()
        self.settings = settings or EvalSettings()
        self.master_seed = self.settings.seed if master_seed is None else master_seed
        self.workers = max(int(workers), 1)
        self._cached: tuple[int, SymbolStream] | None = None

    def stream(self, generation: int, member: int) -> SymbolStream:
        M = self.space.layout.M
        n = self.settings.n_symbols
        if self.settings.crn:
            if self._cached is None or self._cached[0] != generation:
                seq = np.random.SeedSequence(self.master_seed, spawn_key=(1, generation))
                self._cached = (generation, SymbolStream.draw(seq, n, M))
            return self._cached[1]
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(1, generation, member))
        return SymbolStream.draw(seq, n, M)

    def mse(self, x: np.ndarray, stream: SymbolStream) -> float:
        amp = amplify(expand(self.space.to_genes(x)), self.channel.saleh)
        _, sigma = self.channel.noise(amp.es_avg)
        return mse_on_stream(amp, sigma, stream)

    def __call__(self, genes: np.ndarray, generation: int, members: np.ndarray) -> np.ndarray:
        streams = [self.stream(generation, int(m)) for m in members]
        if self.workers == 1:
            return np.array([self.mse(x, s) for x, s in zip(genes, streams)])
        with ThreadPoolExecutor(self.workers) as pool:
            return np.array(list(pool.map(self.mse, genes, streams)))


def run(layout: RingLayout, symmetry: SymmetryMode, cfg: GaConfig, channel_params=None,
        eval_settings=None, workers: int = 1, evaluator: Evaluator | None = None):
    """Optimize an APSK constellation; returns (best GeneVector, RunTrace)."""
    space = GeneSpace.for_apsk(layout, SymmetryMode.parse(symmetry))
    if evaluator is None:
        evaluator = ChannelEvaluator(space, channel_params, eval_settings, master_seed=cfg.seed,
                                     workers=workers)
    best, trace = evolve(space, cfg, evaluator)
    return space.to_genes(best), trace

