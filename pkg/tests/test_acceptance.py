"""Acceptance suite. Each test carries a ``criterion`` marker; the terminal
summary prints one PASS/FAIL line per criterion."""
import copy
import math
import statistics

import numpy as np
import pytest
from scipy.stats import norm

from apskga import catalog, harness
from apskga.channel import ChannelParams, EvalSettings, SalehParams, amam, estimate_mse, exact_mse
from apskga.constellation import LAYOUT_16, reference_constellation
from apskga.genetic import (GaConfig, rank_scale, select_remainder, select_roulette,
                            select_stochastic_uniform, xover_arithmetic, xover_heuristic,
                            xover_intermediate, xover_scattered, xover_single_point,
                            xover_two_point)

SEEDS = range(5)
crit = pytest.mark.criterion


# -- shared full-size GA runs ---------------------------------------------------


@pytest.fixture(scope="module")
def ga_runs(tmp_path_factory):
    """Lazily run and cache (layout, symmetry) batches over SEEDS with default settings."""
    cache = {}

    def get(layout, symmetry):
        key = (layout, symmetry)
        if key not in cache:
            runs = []
            for seed in SEEDS:
                out = tmp_path_factory.mktemp(f"{layout}-{symmetry}-{seed}")
                spec = harness.ExperimentSpec(
                    layout=layout, symmetry=symmetry,
                    ga=GaConfig(selection="remainder", crossover="single_point", seed=seed),
                    snr_db=10.0, out=str(out))
                res = harness.cmd_optimize(spec, validate_symbols=0)
                runs.append((res, out))
            cache[key] = runs
        return cache[key]

    return get


# -- 1 -------------------------------------------------------------------------


@crit(1, "Saleh unit values amam(0), amam(1), amam(0.6404)")
def test_c1_saleh_values():
    assert amam(0.0) == 0.0
    assert abs(amam(1.0) - 1.003253) <= 1e-6
    assert abs(amam(0.6404) - 0.938954) <= 1e-6


# -- 2 -------------------------------------------------------------------------


ORACLE_CASES = {"uniform": lambda: reference_constellation(LAYOUT_16, [0.5])}
ORACLE_CASES.update({n: (lambda n=n: catalog.published_constellation(n))
                     for n in catalog.NAMES if n.startswith("16apsk")})


@crit(2, "Monte Carlo and quadrature MSE agree within 1% at 10 dB")
@pytest.mark.parametrize("name", sorted(ORACLE_CASES))
def test_c2_oracle_equivalence(name):
    c = ORACLE_CASES[name]()
    ch = ChannelParams(10.0)
    mc = estimate_mse(c, ch, EvalSettings(1_000_000, seed=0))
    ex = exact_mse(c, ch)
    assert abs(mc - ex) / ex < 0.01, (mc, ex)


# -- 3 -------------------------------------------------------------------------


@crit(3, "antipodal toy gives Q(1): exact within 0.5%, Monte Carlo within 1.5%")
def test_c3_antipodal(antipodal):
    q1 = norm.sf(1.0)
    assert q1 == pytest.approx(0.158655, abs=1e-6)
    # identity HPA, Es = 1, N0 = 2: sigma per dimension = 1 with separation 2
    ch = ChannelParams(10 * math.log10(0.5), SalehParams(1.0, 0.0))
    assert abs(exact_mse(antipodal, ch) - q1) / q1 < 0.005
    mc = estimate_mse(antipodal, ch, EvalSettings(1_000_000, seed=0))
    assert abs(mc - q1) / q1 < 0.015


# -- 4 -------------------------------------------------------------------------

ROUNDS = 10_000
EXPECT = rank_scale(np.random.default_rng(11).random(9), 12)


def _counts(fn, seed):
    rng = np.random.default_rng(seed)
    return np.array([np.bincount(fn(EXPECT, 12, rng), minlength=EXPECT.size)
                     for _ in range(ROUNDS)])


@crit(4, "selection counts match expectations; SUS within 1; remainder copies exact")
@pytest.mark.parametrize("fn", [select_stochastic_uniform, select_remainder, select_roulette],
                         ids=["sus", "remainder", "roulette"])
def test_c4_selection_means(fn):
    counts = _counts(fn, 4)
    p = EXPECT / 12
    se = np.sqrt(12 * p * (1 - p) / ROUNDS)
    assert np.all(np.abs(counts.mean(axis=0) - EXPECT) <= 3 * se)
    if fn is select_stochastic_uniform:
        assert np.all(np.abs(counts - EXPECT) <= 1)
    if fn is select_remainder:
        whole = np.floor(EXPECT).astype(int)
        assert whole.sum() > 0
        assert np.all(counts >= whole)
        rng = np.random.default_rng(5)
        for _ in range(100):
            idx = select_remainder(EXPECT, 12, rng)
            np.testing.assert_array_equal(idx[:whole.sum()],
                                          np.repeat(np.arange(EXPECT.size), whole))


# -- 5 -------------------------------------------------------------------------

TRIALS = 1_000


def _parents(rng, size=9):
    return rng.uniform(-3, 3, size), rng.uniform(-3, 3, size)


@crit(5, "crossover postconditions hold in 1000 randomized trials per operator")
@pytest.mark.parametrize("op", ["scattered", "single_point", "two_point"])
def test_c5_donor_genes(op):
    fn = {"scattered": xover_scattered, "single_point": xover_single_point,
          "two_point": xover_two_point}[op]
    rng = np.random.default_rng(21)
    for _ in range(TRIALS):
        p1, p2 = _parents(rng)
        child = fn(p1, p2, rng)
        from_1 = child == p1
        assert np.all(from_1 | (child == p2))
        # point crossovers swap contiguous runs: count the switches between donors
        switches = int(np.count_nonzero(np.diff(from_1.astype(int))))
        if op == "single_point":
            assert from_1[0] and switches <= 1
        elif op == "two_point":
            assert from_1[0] and switches <= 2


@crit(5, "crossover postconditions hold in 1000 randomized trials per operator")
def test_c5_intermediate_hull():
    rng = np.random.default_rng(22)
    for _ in range(TRIALS):
        p1, p2 = _parents(rng)
        child = xover_intermediate(p1, p2, rng, 1.0)
        assert np.all(child >= np.minimum(p1, p2)) and np.all(child <= np.maximum(p1, p2))


@crit(5, "crossover postconditions hold in 1000 randomized trials per operator")
def test_c5_heuristic_formula():
    rng = np.random.default_rng(23)
    lo, hi = np.full(9, -2.0), np.full(9, 2.0)
    for _ in range(TRIALS):
        p1, p2 = _parents(rng)
        s1, s2 = rng.random(2)
        best, worst = (p1, p2) if s1 >= s2 else (p2, p1)
        expected = np.clip(worst + 1.2 * (best - worst), lo, hi)
        child = xover_heuristic(p1, p2, s1, s2, 1.2, lo, hi)
        np.testing.assert_array_equal(child, expected)


@crit(5, "crossover postconditions hold in 1000 randomized trials per operator")
def test_c5_arithmetic_formula():
    rng = np.random.default_rng(24)
    for _ in range(TRIALS):
        p1, p2 = _parents(rng)
        twin = copy.deepcopy(rng)
        child = xover_arithmetic(p1, p2, rng)
        a = twin.random()
        np.testing.assert_array_equal(child, a * p1 + (1 - a) * p2)


# -- 6, 7, 8 ---------------------------------------------------------------------


def _best(runs):
    return [res.best_mse for res, _ in runs]


@crit(6, "16-APSK double, remainder + single point: median <= 1.30, min <= 1.20")
@pytest.mark.slow
def test_c6_double_end_to_end(ga_runs):
    best = _best(ga_runs("16apsk", "double"))
    print("16apsk double best MSE:", best)
    assert statistics.median(best) <= 1.30
    assert min(best) <= 1.20


@crit(7, "16-APSK median best MSE: single symmetry < double symmetry")
@pytest.mark.slow
def test_c7_symmetry_relaxation(ga_runs):
    double = _best(ga_runs("16apsk", "double"))
    single = _best(ga_runs("16apsk", "single"))
    print("16apsk single best MSE:", single)
    assert statistics.median(single) < statistics.median(double)


@crit(8, "32-APSK none: majority of runs end by MAX_GENERATIONS, reason in trace")
@pytest.mark.slow
def test_c8_32_none_does_not_converge(ga_runs):
    runs = ga_runs("32apsk", "none")
    reasons = []
    for res, out in runs:
        text = (out / "trace.csv").read_text()
        line = next(l for l in text.splitlines() if l.startswith("# termination_reason:"))
        reasons.append(line.split(":", 1)[1].strip())
        assert reasons[-1] == res.trace.termination_reason.value
    print("32apsk none termination:", reasons)
    assert reasons.count("MAX_GENERATIONS") > len(runs) / 2


# -- 9 -------------------------------------------------------------------------

SMALL = ["--pop", "8", "--generations", "4", "--symbols", "4000", "--seed", "77"]


@crit(9, "optimize and sweep reruns are byte-identical for workers 1 and 4")
@pytest.mark.parametrize("workers", ["1", "4"])
def test_c9_determinism(tmp_path, workers):
    from apskga.cli import main
    outputs = []
    for rep in ("a", "b"):
        opt, sw = tmp_path / f"opt-{rep}", tmp_path / f"sweep-{rep}"
        assert main(["optimize", "--workers", workers, "--out", str(opt)] + SMALL) == 0
        assert main(["sweep", "--replicates", "1", "--workers", workers, "--pop", "4",
                     "--generations", "2", "--symbols", "1000", "--seed", "77",
                     "--out", str(sw)]) == 0
        outputs.append({f.name: f.read_bytes() for d in (opt, sw) for f in sorted(d.glob("*.csv"))})
    assert set(outputs[0]) == {"trace.csv", "sweep.csv", "sweep_cells.csv", "sweep_runs.csv"}
    assert outputs[0] == outputs[1]


# -- 10 ------------------------------------------------------------------------


@crit(10, "every RunTrace has non-increasing best_mse")
@pytest.mark.slow
def test_c10_elitism_monotone(ga_runs):
    traces = [res.trace for key in (("16apsk", "double"), ("16apsk", "single"),
                                    ("32apsk", "none")) for res, _ in ga_runs(*key)]
    for trace in traces:
        best = [r.best_mse for r in trace.records]
        assert all(b <= a for a, b in zip(best, best[1:]))
