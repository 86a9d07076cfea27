"""Regenerates the frozen rank fixtures in this directory.

Each ranking shows five counterfactuals per method. Only ownership of rank
positions 1..3 matters for the top-k summary, so the search works on those
and fills the remaining ranks deterministically. A position owned by "both"
is a tie between identical counterfactuals from the two methods; ties use
competition ranking, so the following rank is left empty.

Usage: python3 make_rank_fixtures.py  (writes the CSVs next to this file; needs scipy)
"""
import csv
import itertools
import os
import sys
import random

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

TARGETS = {
    "adult_study_ranks.csv": dict(
        methods=("c2", "c1"), users=18, ties=False,
        percent={"c2": (64.4, 70.6, 74.2), "c1": (35.6, 29.4, 25.8)}),
    "german_study_ranks.csv": dict(
        methods=("c3", "c2"), users=16, ties=True,
        percent={"c3": (68.7, 59.3, 58.0), "c2": (55.0, 50.7, 53.5)}),
}
TOLERANCE = 0.02  # percentage points; published figures carry one decimal
SAMPLES = (2, 3, 4, 5, 6, 7, 8)
PER_METHOD = 5


def patterns(ties):
    owners = ("a", "b", "both") if ties else ("a", "b")
    out = []
    for p in itertools.product(owners + ("none",), repeat=3):
        # Competition ranking: a tie at rank r leaves rank r + 1 empty.
        skip = [i > 0 and p[i - 1] == "both" for i in range(3)]
        if all((o == "none") == s for o, s in zip(p, skip)):
            out.append(p)
    return out


def credit(pattern, side):
    hits = [o in (side, "both") for o in pattern]
    return tuple(100.0 * sum(hits[:k]) / k for k in (1, 2, 3))


def summarize(state, ties):
    out = {"a": [0.0] * 3, "b": [0.0] * 3}
    for user in state:
        for side in ("a", "b"):
            per = [credit(p, side) for p in user]
            for k in range(3):
                out[side][k] += sum(c[k] for c in per) / len(per) / len(state)
    return out


def search(goal, seed):
    """Exact search for fixed per-user sample counts.

    With the number of samples per user fixed, each summary cell is linear in
    the per-user pattern counts, so landing within TOLERANCE of every cell is
    a small integer feasibility program.
    """
    rng = random.Random(seed)
    pats = patterns(goal["ties"])
    users = goal["users"]
    sizes = [rng.choice(SAMPLES) for _ in range(users)]
    n_vars = users * len(pats) + 1  # counts, then the gap bound t
    cost = np.zeros(n_vars)  # feasibility only; keeps the solve deterministic
    rows, lo, hi = [], [], []
    for u in range(users):
        row = np.zeros(n_vars)
        row[u * len(pats):(u + 1) * len(pats)] = 1.0
        rows.append(row)
        lo.append(sizes[u])
        hi.append(sizes[u])
    for si, m in enumerate(goal["methods"]):
        side = "ab"[si]
        for k in range(3):
            row = np.zeros(n_vars)
            for u in range(users):
                for pi, p in enumerate(pats):
                    row[u * len(pats) + pi] = credit(p, side)[k] / sizes[u] / users
            target = goal["percent"][m][k]
            up = row.copy()
            up[-1] = -1.0
            rows.append(up)
            lo.append(-np.inf)
            hi.append(target)
            down = row.copy()
            down[-1] = 1.0
            rows.append(down)
            lo.append(target)
            hi.append(np.inf)
    integrality = np.ones(n_vars)
    integrality[-1] = 0
    upper = np.full(n_vars, np.inf)
    upper[-1] = TOLERANCE
    res = milp(cost, constraints=LinearConstraint(np.array(rows), lo, hi),
               integrality=integrality, bounds=Bounds(0, upper))
    if res.x is None:
        return None, float("inf")
    state = []
    for u in range(users):
        user = []
        for pi, p in enumerate(pats):
            user += [p] * int(round(res.x[u * len(pats) + pi]))
        rng.shuffle(user)
        state.append(user)
    got = summarize(state, goal["ties"])
    gap = max(abs(got["ab"[si]][k] - goal["percent"][m][k])
              for si, m in enumerate(goal["methods"]) for k in range(3))
    return state, gap


def rows_for(user, sample, pattern, methods, rng):
    a, b = methods
    rows = []
    next_id = {"a": 0, "b": 0}

    def cf(side):
        i = next_id[side]
        next_id[side] += 1
        return "%s-%s-%s%d" % (user, sample, side, i)

    rank = 1
    for owner in pattern:
        if owner == "none":
            rank += 1
            continue
        if owner == "both":
            shared = "%s-%s-shared%d" % (user, sample, rank)
            next_id["a"] += 1
            next_id["b"] += 1
            rows.append((shared, a, rank))
            rows.append((shared, b, rank))
        else:
            rows.append((cf(owner), a if owner == "a" else b, rank))
        rank += 1
    if pattern[-1] == "both":
        rank += 1
    rest = ["a"] * (PER_METHOD - next_id["a"]) + ["b"] * (PER_METHOD - next_id["b"])
    rng.shuffle(rest)
    for side in rest:
        rows.append((cf(side), a if side == "a" else b, rank))
        rank += 1
    return rows


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    only = sys.argv[1:]
    for name, goal in TARGETS.items():
        if only and name not in only:
            continue
        for seed in range(100):
            state, err = search(goal, seed)
            print(name, "seed", seed, "gap", round(err, 4), flush=True)
            if err <= TOLERANCE:
                break
        assert err <= TOLERANCE, (name, err)
        rng = random.Random(7)
        with open(os.path.join(here, name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "sample", "cf_id", "method", "rank"])
            for ui, user in enumerate(state):
                uid = "u%02d" % (ui + 1)
                for si, pattern in enumerate(user):
                    sid = "s%d" % (si + 1)
                    for cf_id, method, rank in rows_for(uid, sid, pattern,
                                                        goal["methods"], rng):
                        w.writerow([uid, sid, cf_id, method, rank])
        got = summarize(state, goal["ties"])
        print(name, {m: [round(v, 3) for v in got[s]]
                     for s, m in zip(("a", "b"), goal["methods"])})


if __name__ == "__main__":
    main()
