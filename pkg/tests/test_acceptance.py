"""Acceptance suite: one test per shipped guarantee, one verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.  Everything here is exact (set equality, zero
violations); there are no numeric tolerances anywhere in the artifact.
"""

import time

from conftest import ACCEPTANCE_LINES

from binsos.algorithms import instance_for_line
from binsos.checker import (
    ExplorationBudget,
    branch_choices,
    check_table,
    explore,
    sample_traces,
    witness_lone_survivor,
    witness_split_crash,
)
from binsos.oracle import observed_output_sets
from binsos.outputsets import (
    OutputSet,
    SystemConfig,
    Timing,
    line_members,
    tight_condition,
)
from binsos.patterns import enum_failure_patterns
from binsos.simkernel import medium_check, replay, run

TIMINGS = (Timing.ASYNC, Timing.SYNC)


def _report(name: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, detail


def test_criterion_1_table_matrix_at_desk_scale():
    """Every solvable cell with n <= 4 is safe and complete, exhaustively."""
    start = time.time()
    report = check_table(4, ExplorationBudget())
    elapsed = time.time() - start
    bad = [c.row() for c in report.failures()]
    _report(
        "1 table-matrix",
        report.passed and len(report.cells) > 0,
        f"{len(report.cells)} cells explored in {elapsed:.0f}s; failures: {bad}",
    )


def test_criterion_2_oracle_equivalence():
    """The budgeted explorer and the full-interleaving interpreter agree."""
    budget = ExplorationBudget(max_delay_patterns=12)
    cells = checked = 0
    mismatches = []
    for line in range(1, 16):
        for timing in TIMINGS:
            condition = tight_condition(line, timing)
            for n in range(0, 4):
                for t in range(0, min(n, 1) + 1):
                    if not condition.holds(n, t):
                        continue
                    cells += 1
                    inst = instance_for_line(line, timing).bind(n, t)
                    cfg = SystemConfig(n, t, timing)
                    expected = observed_output_sets(inst, cfg)
                    got = explore(inst, cfg, budget).observed
                    if got == expected:
                        checked += 1
                    else:
                        mismatches.append((line, timing.value, n, t))
    _report(
        "2 oracle-equivalence",
        checked == cells and not mismatches,
        f"{checked}/{cells} cells agree; mismatches: {mismatches}",
    )


def test_criterion_3_safety_is_budget_independent():
    """10,000 random triples per line at n=5 never leave the allowed family."""
    runs_per_line = 10_000
    total = 0
    escapes = []
    for line in range(1, 16):
        members = line_members(line)
        instances = []
        for timing in TIMINGS:
            condition = tight_condition(line, timing)
            valid_t = [t for t in range(0, 6) if condition.holds(5, t)]
            if valid_t:
                instances.append((timing, max(valid_t)))
        share = runs_per_line // len(instances)
        for timing, t in instances:
            inst = instance_for_line(line, timing)
            cfg = SystemConfig(5, t, timing)
            for trace in sample_traces(inst, cfg, share, meta_seed=line * 31 + t):
                total += 1
                if trace.output_set() not in members:
                    escapes.append((line, timing.value, t, trace.output_set()))
    _report(
        "3 safety-under-sampling",
        total >= 15 * runs_per_line and not escapes,
        f"{total} randomized executions at n=5, 0 tolerated, found {len(escapes)}",
    )


def _audit_instances():
    # 10,000 randomized triples per algorithm at n = 5, split across the
    # timing models each algorithm admits.
    per_algorithm = 10_000
    groups = [
        [(1, Timing.ASYNC), (1, Timing.SYNC)],    # all-output
        [(9, Timing.ASYNC), (9, Timing.SYNC)],    # single-output
        [(3, Timing.ASYNC), (3, Timing.SYNC)],    # timing-adaptive
        [(7, Timing.ASYNC)],                      # asynchronous disagreement
        [(7, Timing.SYNC), (8, Timing.SYNC)],     # synchronous disagreement
        [(10, Timing.SYNC)],                      # synchronous consensus
    ]
    for group in groups:
        share = per_algorithm // len(group)
        for line, timing in group:
            condition = tight_condition(line, timing)
            n = 5
            t = max(t for t in range(0, n + 1) if condition.holds(n, t))
            yield instance_for_line(line, timing), SystemConfig(n, t, timing), share


def test_criterion_4_medium_property_audit():
    """Zero violations of the four medium properties, 10,000 randomized
    traces per algorithm, both timing models covered."""
    audited = 0
    kinds = set()
    dirty = []
    for inst, cfg, share in _audit_instances():
        kinds.add(inst.kind)
        for trace in sample_traces(inst, cfg, share, meta_seed=97, record=True):
            violations = medium_check(trace)
            audited += 1
            if violations:
                dirty.append((inst.kind.value, cfg.timing.value, violations[:2]))
    _report(
        "4 medium-audit",
        audited >= 60_000 and len(kinds) == 6 and not dirty,
        f"{audited} traces audited across all six algorithms, violations: {dirty}",
    )


def test_criterion_5_necessity_witnesses():
    """The crash constructions break both disagreement algorithms outside
    the tight region, with replayable singleton traces.

    These are counterexample demonstrations against the shipped algorithms,
    not general impossibility proofs.
    """
    singletons = (OutputSet.ZERO, OutputSet.ONE)
    results = []
    for cfg in (SystemConfig(2, 1, Timing.ASYNC), SystemConfig(2, 1, Timing.SYNC)):
        results.append((f"lone_survivor {cfg.timing.value} (2,1)",
                        witness_lone_survivor(cfg)))
    results.append(("split_crash async (4,2)",
                    witness_split_crash(SystemConfig(4, 2, Timing.ASYNC))))
    problems = []
    for name, result in results:
        if result.output_set not in singletons:
            problems.append(f"{name}: produced {result.output_set}")
            continue
        text = result.trace.to_jsonl()
        again = replay(text)
        if again.to_jsonl() != text or again.output_set() is not result.output_set:
            problems.append(f"{name}: witness does not replay")
    _report(
        "5 necessity-witnesses",
        not problems,
        f"{len(results)} witness schedules, each a replayable singleton; "
        f"problems: {problems}",
    )


def test_criterion_6_determinism_and_replay():
    """100 randomly selected traces replay byte-identically from headers."""
    cases = [
        (instance_for_line(7, Timing.ASYNC), SystemConfig(5, 2, Timing.ASYNC)),
        (instance_for_line(8, Timing.SYNC), SystemConfig(4, 2, Timing.SYNC)),
        (instance_for_line(10, Timing.SYNC), SystemConfig(3, 2, Timing.SYNC)),
        (instance_for_line(5, Timing.ASYNC), SystemConfig(4, 4, Timing.ASYNC)),
        (instance_for_line(2, Timing.SYNC), SystemConfig(3, 2, Timing.SYNC)),
    ]
    total = mismatched = 0
    for inst, cfg in cases:
        for trace in sample_traces(inst, cfg, 20, meta_seed=13, record=True):
            total += 1
            text = trace.to_jsonl()
            if replay(text).to_jsonl() != text:
                mismatched += 1
    _report(
        "6 determinism-replay",
        total == 100 and mismatched == 0,
        f"{total} traces, {mismatched} replay mismatches",
    )


def test_criterion_7_sync_consensus_behavior():
    """Exhaustively at n in {1,2,3}, t < n: every execution agrees on one
    value and the observed family is exactly {{0},{1}}."""
    problems = []
    cells = 0
    for n in (1, 2, 3):
        for t in range(0, n):
            cells += 1
            inst = instance_for_line(10, Timing.SYNC).bind(n, t)
            cfg = SystemConfig(n, t, Timing.SYNC)
            observed = set()
            slot_counts = [p.slot_count for p in inst.programs()]
            for fp in enum_failure_patterns(n, t, slot_counts):
                for picks, trace in branch_choices(
                    lambda c, fp=fp: run(inst, cfg, c, fp)
                ):
                    decided = {v for v in trace.outputs if v is not None}
                    if len(decided) != 1:
                        problems.append((n, t, dict(picks), trace.outputs))
                    observed.add(trace.output_set())
            if observed != {OutputSet.ZERO, OutputSet.ONE}:
                problems.append((n, t, "observed", observed))
    _report(
        "7 sync-consensus",
        cells == 6 and not problems,
        f"{cells} (n,t) cells exhaustively enumerated; problems: {problems}",
    )
