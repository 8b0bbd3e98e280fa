#!/usr/bin/env python3
"""Independent Newton power-flow reference for the bundled cases.

Parses a MATPOWER .m case, solves the power flow with a plain polar-coordinate
Newton iteration, and prints the solution voltages. Used once to freeze the
reference solutions asserted in the Rust test suite. Deliberately written
without reference to the Rust implementation.
"""
import re
import sys

import numpy as np


def parse_matrix(text, name):
    m = re.search(rf"mpc\.{name}\s*=\s*\[(.*?)\];", text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if not line:
            continue
        rows.append([float(tok) for tok in line.split()])
    return np.array(rows)


def main(path):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.]+)\s*;", text).group(1))
    bus = parse_matrix(text, "bus")
    gen = parse_matrix(text, "gen")
    branch = parse_matrix(text, "branch")

    nb = bus.shape[0]
    id2i = {int(b[0]): i for i, b in enumerate(bus)}
    Y = np.zeros((nb, nb), dtype=complex)
    for br in branch:
        if br[10] == 0:
            continue
        f, t = id2i[int(br[0])], id2i[int(br[1])]
        ys = 1.0 / (br[2] + 1j * br[3])
        bc = 1j * br[4] / 2.0
        tap = br[8] if br[8] != 0 else 1.0
        shift = np.deg2rad(br[9])
        tz = tap * np.exp(1j * shift)
        Y[f, f] += (ys + bc) / (tap * tap)
        Y[t, t] += ys + bc
        Y[f, t] += -ys / np.conj(tz)
        Y[t, f] += -ys / tz
    for i, b in enumerate(bus):
        Y[i, i] += (b[4] + 1j * b[5]) / base

    types = bus[:, 1].astype(int)
    vm = np.where(types != 1, 1.0, 1.0)
    va = np.zeros(nb)
    pg = np.zeros(nb)
    qg = np.zeros(nb)
    for g in gen:
        if g[7] <= 0:
            continue
        i = id2i[int(g[0])]
        pg[i] += g[1]
        qg[i] += g[2]
        vm[i] = g[5]
    p = (pg - bus[:, 2]) / base
    q = (qg - bus[:, 3]) / base

    slack = np.where(types == 3)[0][0]
    pvs = [i for i in range(nb) if types[i] == 2]
    pqs = [i for i in range(nb) if types[i] == 1]
    pv_pq = pvs + pqs

    for it in range(50):
        v = vm * np.exp(1j * va)
        s = v * np.conj(Y @ v)
        dp = p - s.real
        dq = q - s.imag
        mis = np.concatenate([dp[pv_pq], dq[pqs]])
        if np.max(np.abs(mis)) < 1e-12:
            break
        n1, n2 = len(pv_pq), len(pqs)
        J = np.zeros((n1 + n2, n1 + n2))
        for a, i in enumerate(pv_pq + pqs):
            is_q = a >= n1
            for bcol, j in enumerate(pv_pq + pqs):
                col_v = bcol >= n1
                if not col_v:
                    if i == j:
                        d = -s[i].imag - Y[i, i].imag * vm[i] ** 2 if not is_q else s[i].real - Y[i, i].real * vm[i] ** 2
                    else:
                        vij = vm[i] * vm[j]
                        ang = va[i] - va[j]
                        g, bb = Y[i, j].real, Y[i, j].imag
                        d = vij * (g * np.sin(ang) - bb * np.cos(ang)) if not is_q else -vij * (g * np.cos(ang) + bb * np.sin(ang))
                else:
                    if i == j:
                        d = s[i].real / vm[i] + Y[i, i].real * vm[i] if not is_q else s[i].imag / vm[i] - Y[i, i].imag * vm[i]
                    else:
                        ang = va[i] - va[j]
                        g, bb = Y[i, j].real, Y[i, j].imag
                        d = vm[i] * (g * np.cos(ang) + bb * np.sin(ang)) if not is_q else vm[i] * (g * np.sin(ang) - bb * np.cos(ang))
                J[a, bcol] = d
        dx = np.linalg.solve(J, mis)
        va[pv_pq] += dx[:n1]
        vm[pqs] += dx[n1:]
    else:
        print("did not converge", file=sys.stderr)
        sys.exit(1)

    v = vm * np.exp(1j * va)
    s = v * np.conj(Y @ v)
    print(f"converged in {it} iterations, max mismatch {np.max(np.abs(mis)):.2e}")
    print("bus   Vm (pu)        Va (deg)")
    for i in range(nb):
        print(f"{int(bus[i,0]):3d}  {vm[i]:.9f}  {np.rad2deg(va[i]):12.6f}")
    print("slack injection p/q (pu): {:.9f} {:.9f}".format(s[slack].real, s[slack].imag))


if __name__ == "__main__":
    main(sys.argv[1])
