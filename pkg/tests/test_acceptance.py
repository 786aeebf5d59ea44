"""Acceptance criteria, one test each; every test prints one PASS/FAIL line.

    pytest tests/test_acceptance.py -v

The scaling criteria (5 and the timing half of 6) run tests/scaling.py in a
fresh interpreter and take several minutes on a single core.
"""

import functools
import json
import pathlib
import random
import statistics
import subprocess
import sys
import time

import pytest

from awditkit.checkers import check, check_cc, check_ra, check_ra_one_session, check_rc
from awditkit.generators import (
    RandomSpec,
    gen_ra_reduction,
    gen_random,
    gen_range_reduction,
    gen_rc_reduction,
    has_triangle,
    random_graph,
)
from awditkit.graph import EdgeLabel
from awditkit.history_io import read_history
from awditkit.oracle import axiom_holds, oracle_check
from awditkit.read_consistency import check_read_consistency
from figures import EXPECTED, READ_KIND

HERE = pathlib.Path(__file__).parent
LEVELS = ("rc", "ra", "cc")
MAX_DOUBLING = 2.5
MAX_DOUBLING_ONE_SESSION = 2.2
SESSION_BAND = 0.25


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
        return ok
    return emit


def run_scaling(mode):
    out = subprocess.run([sys.executable, str(HERE / "scaling.py"), mode],
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def paired_ratios(series):
    return [statistics.median(b / a for a, b in zip(lo, hi)) for lo, hi in zip(series, series[1:])]


def paired_relative(series):
    """Median over rounds of t[i] / t[0], for each size i."""
    return [statistics.median(b / a for a, b in zip(series[0], ts)) for ts in series]


def fmt(xs, digits=2):
    return "[" + ", ".join(f"{x:.{digits}f}" for x in xs) + "]"


# -- suites shared by several criteria ----------------------------------------

@functools.lru_cache(maxsize=None)
def figure_suite():
    """(name, history, level, verdict) for every figure fixture."""
    out = []
    for name in sorted(EXPECTED) + sorted(READ_KIND):
        h = read_history(HERE / "data" / f"{name}.hist")
        out += [(name, h, lv, check(h, lv)) for lv in LEVELS]
    return tuple(out)


def small_spec(seed):
    rng = random.Random(seed)
    return RandomSpec(seed=seed, sessions=rng.randint(2, 4), txns=6, ops_per_txn=(1, 4),
                      keys=rng.randint(1, 4), read_fraction=rng.choice([0.3, 0.5, 0.7]),
                      causal=seed % 5 == 0, abort_rate=rng.choice([0.0, 0.15]))


@functools.lru_cache(maxsize=None)
def random_suite(count=1200):
    """(history, {level: verdict}) for the small random histories."""
    out = []
    for seed in range(count):
        h = gen_random(small_spec(seed))
        out.append((h, {lv: check(h, lv) for lv in LEVELS}))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def reduction_suite(count=240):
    """(graph, has_triangle, {name: (history, level, verdict)})."""
    out = []
    for seed in range(count):
        rng = random.Random(10_000 + seed)
        g = random_graph(rng.randint(1, 10), (0.2, 0.5)[seed % 2], rng)
        rng_h, ra_h, rc_h = gen_range_reduction(g), gen_ra_reduction(g), gen_rc_reduction(g)
        runs = {
            "rc/rc-reduction": (rc_h, "rc", check_rc(rc_h)),
            "ra/ra-reduction": (ra_h, "ra", check_ra(ra_h)),
            "cc/range-reduction": (rng_h, "cc", check_cc(rng_h)),
            "rc/range-reduction": (rng_h, "rc", check_rc(rng_h)),
        }
        out.append((g, has_triangle(g), runs))
    return tuple(out)


def outcome_class(verdict_or_result):
    if verdict_or_result.consistent:
        return "consistent"
    if verdict_or_result.read_violations:
        return "read"
    return "axiom"


# -- criteria --------------------------------------------------------------------

def test_criterion_1_figures(report):
    t0 = time.perf_counter()
    bad = []
    for name in sorted(EXPECTED):
        h = read_history(HERE / "data" / f"{name}.hist")
        for lv in LEVELS:
            if check(h, lv).consistent != EXPECTED[name][lv]:
                bad.append(f"{name}/{lv}")
        if check_read_consistency(h):
            bad.append(f"{name}/read-consistency")
    for name, kind in sorted(READ_KIND.items()):
        h = read_history(HERE / "data" / f"{name}.hist")
        kinds = [v.kind.value for v in check_read_consistency(h)]
        if kinds[:1] != [kind]:
            bad.append(f"{name}: {kinds}")
        for lv in LEVELS:
            v = check(h, lv)
            if v.kind != "ReadConsistency" or v.read_violations[0].kind.value != kind:
                bad.append(f"{name}/{lv}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0
    report(1, ok, f"{len(EXPECTED)} figures x 3 levels + {len(READ_KIND)} read patterns, "
                  f"mismatches={bad or 0}, {elapsed * 1000:.0f} ms (< 1 s)")
    assert ok


def test_criterion_2_oracle_equivalence(report):
    t0 = time.perf_counter()
    suite = random_suite()
    mismatches = []
    classes: dict[str, int] = {}
    committed = max(len(h.committed_refs) for h, _ in suite)
    for i, (h, verdicts) in enumerate(suite):
        for lv in LEVELS:
            mine, ref = outcome_class(verdicts[lv]), outcome_class(oracle_check(h, lv))
            classes[f"{lv}:{mine}"] = classes.get(f"{lv}:{mine}", 0) + 1
            if mine != ref:
                mismatches.append((i, lv, mine, ref))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and len(suite) >= 1000 and committed <= 6
    report(2, ok, f"{len(suite)} histories (<= {committed} committed txns, 2-4 sessions, <= 4 keys), "
                  f"{len(mismatches)} disagreements, classes {dict(sorted(classes.items()))}, {elapsed:.1f} s")
    assert ok, mismatches[:5]


def test_criterion_3_reductions(report):
    suite = reduction_suite()
    bad = []
    for i, (g, tri, runs) in enumerate(suite):
        for name, (_, _, v) in runs.items():
            if v.consistent == tri:
                bad.append((i, name))
        # range property: triangle-free => CC-consistent, RC violation => triangle
        if not tri and not runs["cc/range-reduction"][2].consistent:
            bad.append((i, "range: triangle-free but not CC"))
        if not runs["rc/range-reduction"][2].consistent and not tri:
            bad.append((i, "range: RC violation without triangle"))
    tris = sum(tri for _, tri, _ in suite)
    ok = not bad and len(suite) >= 200 and max(g.node_count for g, _, _ in suite) <= 10
    report(3, ok, f"{len(suite)} graphs (n <= 10, p in {{0.2, 0.5}}, {tris} with a triangle), "
                  f"4 equivalences + range property, {len(bad)} failures")
    assert ok, bad[:5]


def _witness_ok(h, v) -> bool:
    for cyc in v.cycles:
        if cyc.nodes[0] != cyc.nodes[-1] or not cyc.is_valid_in(v.graph):
            return False
        for u, w, lab in cyc.edges():
            # so and wr edges must also be real in the history, not just in the graph
            if lab is EdgeLabel.SO and not (u.session == w.session and u.position < w.position):
                return False
            if lab is EdgeLabel.WR and not any(
                    h.wr.get(op.id) is not None and h.wr[op.id].txn == u for op in h.txn(w).ops):
                return False
    return True


def test_criterion_4_certificates(report):
    runs = [(h, lv, v) for _, h, lv, v in figure_suite()]
    runs += [(h, lv, vs[lv]) for h, vs in random_suite() for lv in LEVELS]
    runs += [r for _, _, rs in reduction_suite() for r in rs.values()]
    consistent = cycles = 0
    bad = []
    for h, lv, v in runs:
        if v.consistent:
            consistent += 1
            if axiom_holds(h, lv, v.commit_order) != (True, None):
                bad.append(("order", lv))
        elif v.kind == "CoCycle":
            cycles += 1
            if not _witness_ok(h, v):
                bad.append(("witness", lv))
    ok = not bad and consistent > 0 and cycles > 0
    report(4, ok, f"{consistent} commit orders satisfy the axioms, {cycles} CoCycle verdicts with "
                  f"valid closed witnesses, {len(bad)} failures")
    assert ok, bad[:5]


def test_criterion_5_scaling(report):
    t0 = time.perf_counter()
    by_ops = run_scaling("ops")
    by_k = run_scaling("sessions")
    elapsed = time.perf_counter() - t0
    lines, ok = [], True
    for lv in LEVELS:
        r = paired_ratios(by_ops["samples"][lv])
        ok &= all(x <= MAX_DOUBLING for x in r)
        lines.append(f"{lv} x{fmt(r)}")
    ops_part = "doubling n 2^14..2^17 at k=100: " + " ".join(lines)
    cc = paired_ratios(by_k["samples"]["cc"])
    ok &= all(x > 1.0 for x in cc)
    flat = []
    for lv in ("rc", "ra"):
        rel = paired_relative(by_k["samples"][lv])
        ok &= all(abs(x - 1.0) <= SESSION_BAND for x in rel)
        flat.append(f"{lv} rel {fmt(rel)}")
    ok &= elapsed < 300
    report(5, ok, f"{ops_part} (<= {MAX_DOUBLING}); k 25..200 at n=1e5: cc step x{fmt(cc)} (> 1), "
                  f"{' '.join(flat)} (within +-25% of k=25); {elapsed:.0f} s")
    assert ok


def test_criterion_6_one_session(report):
    mismatches = []
    for seed in range(600):
        rng = random.Random(seed)
        spec = RandomSpec(seed=seed, sessions=1, txns=rng.randint(1, 250), ops_per_txn=(1, 4),
                          keys=rng.randint(1, 12), read_fraction=rng.choice([0.3, 0.5, 0.7]),
                          causal=seed % 3 == 0, abort_rate=rng.choice([0.0, 0.1]))
        h = gen_random(spec)
        fast, slow = check_ra_one_session(h), check_ra(h)
        if (fast.consistent, fast.kind) != (slow.consistent, slow.kind):
            mismatches.append(seed)
        for cyc in fast.cycles:
            if not cyc.is_valid_in(fast.graph):
                mismatches.append(seed)
    timing = run_scaling("one")
    r = paired_ratios(timing["samples"]["fast"])
    ok = not mismatches and all(x <= MAX_DOUBLING_ONE_SESSION for x in r)
    report(6, ok, f"600 one-session histories, {len(mismatches)} verdict mismatches; doubling "
                  f"{timing['ops'][0]}..{timing['ops'][-1]} ops x{fmt(r)} (<= {MAX_DOUBLING_ONE_SESSION})")
    assert ok, mismatches[:5]


def test_criterion_7_monotonicity(report):
    triples = [tuple(vs[lv].consistent for lv in ("cc", "ra", "rc")) for _, vs in random_suite()]
    for _, _, runs in reduction_suite():
        for h in {id(h): h for h, _, _ in runs.values()}.values():
            triples.append(tuple(check(h, lv).consistent for lv in ("cc", "ra", "rc")))
    larger = 0
    for seed in range(100):
        rng = random.Random(50_000 + seed)
        inject = frozenset(rng.sample(["FracturedRead", "CausalityViolation", "FutureRead"], rng.randint(0, 1)))
        h = gen_random(RandomSpec(seed=seed, sessions=rng.randint(3, 6), txns=rng.randint(30, 80),
                                  keys=rng.randint(3, 10), causal=seed % 2 == 0, abort_rate=0.05,
                                  inject=inject))
        larger += 1
        triples.append(tuple(check(h, lv).consistent for lv in ("cc", "ra", "rc")))
    exceptions = [t for t in triples if (t[0] and not t[1]) or (t[1] and not t[2])]
    ok = not exceptions and larger == 100
    dist = {f"cc={a:d} ra={b:d} rc={c:d}": triples.count((a, b, c)) for a, b, c in sorted(set(triples))}
    report(7, ok, f"{len(triples)} histories, {len(exceptions)} exceptions to CC => RA => RC; "
                  f"outcomes {dist}")
    assert ok
