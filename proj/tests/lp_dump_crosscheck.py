"""Re-solve dumped cell programs with scipy and compare against the solver's objective."""

import json
import os
import re
import subprocess
import sys

import numpy as np
from scipy.optimize import linprog

TERM = re.compile(r"([+-])\s+(\S+)\s+(\S+)")


def parse_terms(text):
    return [(float(v) * (-1 if sign == "-" else 1), name) for sign, v, name in TERM.findall(text)]


def parse_lp(path):
    objective, rows, names = [], [], []
    section = None
    with open(path) as f:
        for raw in f:
            line = raw.strip()
            if line in ("maximize", "subject to", "bounds", "end"):
                section = line
                continue
            if section == "maximize":
                objective = parse_terms(line.split(":", 1)[1])
            elif section == "subject to":
                body = line.split(":", 1)[1]
                m = re.search(r"(<=|>=|=)\s*(\S+)$", body)
                rows.append((parse_terms(body[: m.start()]), m.group(1), float(m.group(2))))
            elif section == "bounds":
                name, _ = line.split(">=")
                names.append(name.strip())
    index = {n: i for i, n in enumerate(names)}
    return objective, rows, index


def solve_lp(path):
    objective, rows, index = parse_lp(path)
    n = len(index)
    c = np.zeros(n)
    for v, name in objective:
        c[index[name]] -= v
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for terms, sense, rhs in rows:
        row = np.zeros(n)
        for v, name in terms:
            row[index[name]] += v
        if sense == "<=":
            a_ub.append(row), b_ub.append(rhs)
        elif sense == ">=":
            a_ub.append(-row), b_ub.append(-rhs)
        else:
            a_eq.append(row), b_eq.append(rhs)
    res = linprog(
        c,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=b_ub or None,
        A_eq=np.array(a_eq) if a_eq else None,
        b_eq=b_eq or None,
        bounds=[(0, None)] * n,
        method="highs",
    )
    if res.status == 2:
        return None
    if res.status != 0:
        raise RuntimeError(f"{path}: scipy status {res.status}: {res.message}")
    return -res.fun, n, len(rows)


def run(cmdp, *args):
    out = subprocess.run([cmdp, "--report", "json", *args], check=True, capture_output=True, text=True)
    return json.loads(out.stdout)


def main():
    cmdp, work = sys.argv[1], sys.argv[2]
    os.makedirs(work, exist_ok=True)
    instances = {
        "gap": ["--kind", "gap"],
        "toy": ["--kind", "random", "--seed", "7"],
        "wide": ["--kind", "random", "--seed", "3", "--states", "3", "--actions", "3", "--horizon", "3"],
    }
    cells = {
        "gap": [(1, 0, 0), (2, 1, 3), (3, 3, 2), (3, 3, 5), (2, 2, 40), (3, 3, 400)],
        "toy": [(1, 0, 0), (1, 1, 4), (2, 0, 2), (2, 1, 9)],
        "wide": [(1, 0, 1), (2, 2, 3), (3, 1, 6)],
    }
    failures, checked = 0, 0
    for name, gen in instances.items():
        inst = os.path.join(work, name + ".json")
        run(cmdp, "generate", *gen, "--out", inst)
        for h, s, k in cells[name]:
            lp = os.path.join(work, f"{name}_{h}_{s}_{k}.lp")
            rep = run(cmdp, "solve", "--instance", inst, "--epsilon", "0.5", "--out", os.path.join(work, "p.json"),
                      "--dump-lp", lp, "--lp-cell", f"{h},{s},{k}")["lp_dump"]
            ref = solve_lp(lp)
            checked += 1
            if ref is None:
                ok = not rep["feasible"]
                detail = "infeasible"
            else:
                value, nvars, nrows = ref
                ok = (rep["feasible"] and abs(value - rep["objective"]) <= 1e-6
                      and nvars == rep["variables"] and nrows == rep["rows"])
                detail = f"scipy={value:.12g} solver={rep['objective']}"
            print(f"{'PASS' if ok else 'FAIL'} {name} h={h} s={s} k={k} {detail}")
            failures += not ok
    print(f"{checked - failures} of {checked} cells agree")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
