"""Reflection structure of the solution set, expressed over GF(2).

Branch codes (the n-bit side sequences of solutions) live in the group of
n-bit vectors under XOR.  The *suffix flip* at level i (all bits from i on
flipped) models re-branching at that level: reflecting the tail of a solution
across its level-i anchor hyperplane lands on another solution whose code is
the original XOR the flip.  On generic instances the code set is a single
orbit of the subgroup spanned by the flips at the fully branching levels, so
the solution count is the subgroup order, a power of two.  This module
verifies all of that numerically and flags the degenerate cases where it
fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousSpectrum,
    GroupTooLarge,
    NoSiblingBranch,
    SubtreeNotFull,
    TreeDiscarded,
)
from .geometry import hyperplane_through, reflect

#: Largest generator count for which the subgroup is materialised exactly.
MAX_EXACT_GENERATORS = 24

#: Number of random elements drawn for the sampled orbit check.
ORBIT_SAMPLES = 2**16

#: Relative cluster tolerance for distance spectra (scaled by the largest
#: edge distance of the instance).
SPECTRUM_TOL = 1e-6


def suffix_flip(level: int, n: int) -> tuple:
    """Bit vector with ones from position ``level`` (1-based) to the end."""
    if not 1 <= level <= n:
        raise IndexError(f"level must be in 1..{n}, got {level}")
    return tuple(1 if j >= level else 0 for j in range(1, n + 1))


def xor_bits(a: tuple, b: tuple) -> tuple:
    """Elementwise XOR of two equal-length bit tuples."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return tuple(x ^ y for x, y in zip(a, b))


def combine_flips(levels, n: int) -> tuple:
    """XOR of the suffix flips at the given levels (empty set gives zero).

    Distinct level sets always give distinct results: bit j changes exactly
    when level j enters or leaves the set, so the map is injective over the
    power set of {1..n}.
    """
    out = (0,) * n
    for level in levels:
        out = xor_bits(out, suffix_flip(level, n))
    return out


def span_flips(generators, n: int) -> set:
    """Every XOR combination of the generators (the subgroup they generate)."""
    gens = list(generators)
    if len(gens) > MAX_EXACT_GENERATORS:
        raise GroupTooLarge(
            f"{len(gens)} generators span up to 2**{len(gens)} elements")
    masks = []
    for g in gens:
        if len(g) != n:
            raise ValueError(f"generator length {len(g)} != {n}")
        masks.append(int("".join(map(str, g)), 2) if n else 0)
    span = {0}
    for mask in masks:
        span |= {s ^ mask for s in span}
    return {_int_to_bits(s, n) for s in span}


def _int_to_bits(value: int, n: int) -> tuple:
    return tuple((value >> (n - 1 - j)) & 1 for j in range(n))


def branch_levels(result) -> frozenset:
    """Levels at which every surviving search prefix splits both ways.

    A level i belongs to the set iff every length-(i-1) prefix of the code
    set extends with both a 0 and a 1 bit, i.e. every feasible node at level
    i-1 that lies on a path to a feasible leaf has two children that each
    reach a feasible leaf.  Levels where some prefixes split and others do
    not (possible only on degenerate instances) are excluded.
    """
    codes = list(result.branch_codes) if hasattr(result, "branch_codes") else list(result)
    if not codes:
        return frozenset()
    n = len(codes[0])
    out = set()
    for i in range(1, n + 1):
        groups: dict = {}
        for code in codes:
            groups.setdefault(code[: i - 1], set()).add(code[i - 1])
        if all(bits == {0, 1} for bits in groups.values()):
            out.add(i)
    return frozenset(out)


def branches_both_ways(result, index: int, vertex: int) -> bool:
    """Does this solution's path split at ``vertex`` with feasible leaves on
    both sides?  Computed from the retained tree."""
    if result.tree is None or result.leaves is None:
        raise TreeDiscarded("branch predicate needs solve(..., keep_tree=True)")
    K, n = result.instance.dimension, result.instance.n
    if not K + 1 <= vertex <= n:
        raise ValueError(f"vertex must be in {K + 1}..{n}, got {vertex}")
    node = result.leaves[index]
    while node.level > vertex:
        node = node.parent
    marks = result.tree.feasible_path_marks()
    live = [c for c in node.parent.children if c.feasible and id(c) in marks]
    return len(live) == 2


def partial_reflection(result, index: int, vertex: int) -> np.ndarray:
    """Reflect the tail of a solution across its anchor hyperplane at ``vertex``.

    Coordinates of vertices before ``vertex`` are kept; every vertex from
    ``vertex`` on is mirrored across the hyperplane through the K window
    anchors of ``vertex`` in this solution.  Meaningful (it lands on another
    solution, with the branch code XORed by the suffix flip) whenever the
    path genuinely branches at ``vertex``; otherwise NoSiblingBranch is
    raised.
    """
    if not branches_both_ways(result, index, vertex):
        raise NoSiblingBranch(
            f"solution {index} does not branch both ways at vertex {vertex}")
    y = result.solutions[index]
    K = result.instance.dimension
    plane = hyperplane_through(y[vertex - 1 - K : vertex - 1])
    out = y.copy()
    for row in range(vertex - 1, len(y)):
        out[row] = reflect(plane, y[row])
    return out


@dataclass(frozen=True)
class ReflectionCheck:
    solution_index: int
    level: int
    residual: float
    code_matches: bool
    matched_index: int


@dataclass(frozen=True)
class SymmetryReport:
    n: int
    solution_count: int
    branch_levels: frozenset
    generators: tuple
    group_order: int
    codes: tuple
    orbit_verified: bool
    orbit_check_exact: bool
    power_of_two: bool
    degenerate: bool
    uniform_level_violations: tuple
    tangent_events: int
    reflection_checks: tuple


def verify_orbit(result, rng_seed: int = 0) -> SymmetryReport:
    """Check that the code set is one orbit of the suffix-flip subgroup.

    Spans the flips at the fully branching levels, XORs the lexicographically
    least code against the whole subgroup and compares with the code set, and
    checks that the solution count equals the subgroup order.  Both verdicts
    are reported, not raised: on generic instances they hold, on degenerate
    ones (flagged via the mixed-children diagnostic or tangent events) they
    are expected to fail.  With a retained tree, every (solution, level) pair
    is additionally checked against the tail-reflection prediction.

    Beyond ``MAX_EXACT_GENERATORS`` branching levels the subgroup is not
    materialised; membership is then sampled (``orbit_check_exact=False``).
    """
    codes = list(result.branch_codes)
    if not codes:
        raise ValueError("orbit verification needs at least one solution")
    n = len(codes[0])
    levels = branch_levels(result)
    gens = tuple(suffix_flip(i, n) for i in sorted(levels))
    code_set = set(codes)
    base = min(code_set)
    group_order = 2 ** len(levels)
    if len(levels) <= MAX_EXACT_GENERATORS:
        group = span_flips(gens, n)
        assert len(group) == group_order
        orbit_verified = {xor_bits(base, g) for g in group} == code_set
        exact = True
    else:
        rng = np.random.default_rng(rng_seed)
        picks = rng.integers(0, 2, size=(ORBIT_SAMPLES, len(gens)))
        orbit_verified = True
        for row in picks:
            element = combine_flips(
                [lvl for lvl, bit in zip(sorted(levels), row) if bit], n)
            if xor_bits(base, element) not in code_set:
                orbit_verified = False
                break
        exact = False
    power_of_two = len(result.solutions) == group_order

    stats = getattr(result, "stats", None)
    violations = tuple(stats.uniform_level_violations) if stats else ()
    tangents = stats.tangent_events if stats else 0
    degenerate = bool(violations) or tangents > 0

    checks: list[ReflectionCheck] = []
    if result.tree is not None and result.leaves is not None and result.solutions:
        stack = np.stack(result.solutions)
        for idx, code in enumerate(codes):
            for lvl in sorted(levels):
                mirrored = partial_reflection(result, idx, lvl)
                residuals = np.max(
                    np.linalg.norm(stack - mirrored[None, :, :], axis=2), axis=1)
                best = int(np.argmin(residuals))
                want = xor_bits(code, suffix_flip(lvl, n))
                checks.append(ReflectionCheck(
                    solution_index=idx,
                    level=lvl,
                    residual=float(residuals[best]),
                    code_matches=codes[best] == want,
                    matched_index=best,
                ))

    return SymmetryReport(
        n=n,
        solution_count=len(result.solutions),
        branch_levels=levels,
        generators=gens,
        group_order=group_order,
        codes=tuple(codes),
        orbit_verified=orbit_verified,
        orbit_check_exact=exact,
        power_of_two=power_of_two,
        degenerate=degenerate,
        uniform_level_violations=violations,
        tangent_events=tangents,
        reflection_checks=tuple(checks),
    )


def distance_spectrum(result, u: int, v: int) -> tuple:
    """Distinct distances between ranks ``u`` and ``v`` over a full subtree.

    Starting from the leftmost feasible node at level ``u``, descends through
    levels u..v requiring every feasible node to carry its full complement of
    feasible children (SubtreeNotFull otherwise), then clusters the distances
    from the subtree root's point to each level-``v`` point.  On generic
    chains with v - u = K + q the cluster count is 2**q.  Clusters separated
    by less than ten times the tolerance raise AmbiguousSpectrum rather than
    guessing.
    """
    if result.tree is None:
        raise TreeDiscarded("distance_spectrum needs solve(..., keep_tree=True)")
    inst = result.instance
    K, n = inst.dimension, inst.n
    if not 1 <= u < v <= n:
        raise ValueError(f"need 1 <= u < v <= {n}, got u={u}, v={v}")
    if v - u <= K:
        raise ValueError(f"need v - u > K for a spectrum, got v - u = {v - u}")
    roots = [nd for nd in result.tree.levels.get(u, []) if nd.feasible]
    if not roots:
        raise SubtreeNotFull(f"no feasible node at level {u}")
    frontier = [roots[0]]
    for level in range(u, v):
        expected = 1 if level + 1 <= K else 2
        nxt = []
        for node in frontier:
            live = [c for c in node.children if c.feasible]
            if len(live) != expected:
                raise SubtreeNotFull(
                    f"node at level {level} has {len(live)} feasible children, "
                    f"expected {expected}")
            nxt.extend(live)
        frontier = nxt
    anchor = roots[0].point
    dists = sorted(float(np.linalg.norm(node.point - anchor)) for node in frontier)
    scale = max(inst.edges.values())
    tol = SPECTRUM_TOL * scale
    clusters: list[list[float]] = [[dists[0]]]
    for d in dists[1:]:
        if d - clusters[-1][-1] > tol:
            clusters.append([d])
        else:
            clusters[-1].append(d)
    reps = tuple(sum(c) / len(c) for c in clusters)
    for a, b in zip(reps, reps[1:]):
        if b - a < 10.0 * tol:
            raise AmbiguousSpectrum(
                f"clusters at {a!r} and {b!r} are closer than 10x tolerance")
    return reps


def serialize_report(report: SymmetryReport) -> str:
    """Deterministic plain-text form of a symmetry report."""
    lines = [
        "format: dgp-symmetry 1",
        f"n: {report.n}",
        f"solution_count: {report.solution_count}",
        "branch_levels: " + " ".join(map(str, sorted(report.branch_levels))),
        f"group_order: {report.group_order}",
        f"orbit_verified: {str(report.orbit_verified).lower()}",
        f"orbit_check: {'exact' if report.orbit_check_exact else 'sampled'}",
        f"power_of_two: {str(report.power_of_two).lower()}",
        f"degenerate: {str(report.degenerate).lower()}",
        "uniform_level_violations: "
        + " ".join(map(str, report.uniform_level_violations)),
        f"tangent_events: {report.tangent_events}",
        "codes:",
    ]
    for code in report.codes:
        lines.append("".join(map(str, code)))
    lines.append("reflection_checks:")
    for chk in report.reflection_checks:
        lines.append(
            f"{chk.solution_index} {chk.level} {chk.residual:.17g} "
            f"{str(chk.code_matches).lower()} {chk.matched_index}")
    return "\n".join(lines) + "\n"
