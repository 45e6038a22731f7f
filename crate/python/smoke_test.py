"""Smoke test for the open_majorana_py extension.

Build and install first:  pip install --no-build-isolation -e crates/python
Then:                     python python/smoke_test.py
"""

import math
import sys

import numpy as np
from scipy.linalg import expm

import open_majorana_py as om


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    if not ok:
        check.failed += 1


check.failed = 0


def spin_algebra():
    for j in (0.5, 1.0, 2.5):
        ops = {k: np.array(v) for k, v in om.spin_operators(j).items()}
        jx, jy, jz = ops["jx"], ops["jy"], ops["jz"]
        comm = jx @ jy - jy @ jx - 1j * jz
        cas = jx @ jx + jy @ jy + jz @ jz - j * (j + 1) * np.eye(len(jz))
        check(f"spin algebra j={j}", np.abs(comm).max() < 1e-12 and np.abs(cas).max() < 1e-11)
        r = np.array(om.rotation_y(j, 0.7))
        check(f"rotation j={j}", np.abs(r - expm(0.7j * jy)).max() < 1e-12)


def hamiltonian():
    p = om.ModelParams(j=1.0)
    ops = {k: np.array(v) for k, v in om.spin_operators(1.0).items()}
    h = np.array(om.hamiltonian(3.0, p))
    expected = 0.1 * 3.0 * ops["jz"] + math.sqrt(2) * ops["jx"]
    check("hamiltonian", np.abs(h - expected).max() < 1e-14)


def rates():
    n = om.NoiseConfig("Jx", gamma=0.5, temperature=10.0)
    ratio = om.rates(-1, math.sqrt(2), n) / om.rates(1, math.sqrt(2), n)
    check("detailed balance", abs(ratio - math.exp(-math.sqrt(2) / 10)) < 1e-12, f"{ratio:.6f}")
    check("bose occupation", abs(om.bose_occupation(math.log(2), 1.0) - 1.0) < 1e-12)


def efficiency():
    short = om.ModelParams(t0=60.0)
    recs = [om.transfer_efficiency(j, None, short) for j in (0.5, 1.0, 1.5)]
    p = recs[0].efficiency
    worst = max(abs(r.efficiency - p ** (2 * r.j)) for r in recs)
    check("noiseless product rule", worst < 1e-6, f"p={p:.7f}")
    noisy = om.transfer_efficiency(1.0, om.NoiseConfig("Jz", gamma=0.01), short)
    check("noise lowers efficiency", noisy.efficiency < recs[1].efficiency and not noisy.failed, repr(noisy))


def sweep():
    recs = om.run_sweep([0.5, 1.0], [0.01], ["Jz", "Jx"], [0.001], om.ModelParams(t0=60.0), workers=1, timing=False)
    check("sweep size", len(recs) == 4)
    check("sweep order", [(r.j, r.channel) for r in recs] == [(0.5, "Jz"), (0.5, "Jx"), (1.0, "Jz"), (1.0, "Jx")])


def factorization():
    short = om.ModelParams(t0=60.0)
    u = om.unitary_factorization_check(1.0, short)
    check("unitary factorization", u < 1e-6, f"{u:.2e}")
    d = om.lindblad_factorization_residual(1.0, om.NoiseConfig("Jz", gamma=0.1), short)
    check("lindblad non-factorization", d > 100 * u, f"{d:.2e}")

    rng = np.random.default_rng(0)
    a1, a2, b = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    rho = b @ b.conj().T
    rho /= np.trace(rho)
    gap = np.array(om.dissipator_identity_gap(a1.tolist(), a2.tolist(), rho.tolist()))

    def d_of(a):
        ad = a.conj().T
        return a @ rho @ ad - 0.5 * (ad @ a @ rho + rho @ ad @ a)

    check("dissipator identity", np.abs(gap - (d_of(a1 + a2) - d_of(a1) - d_of(a2))).max() < 1e-12)


def classical_noise():
    rep = om.classical_noise_ensemble(n_traj=200, t_start=-2.0, t_end=2.0, seed=3)
    check("classical noise report", rep["statistical_error"] > 0 and len(rep["mc_difference"]) == 4)


def errors():
    try:
        om.transfer_efficiency(0.75)
    except ValueError as e:
        check("invalid spin raises ValueError", "half-integer" in str(e))
    else:
        check("invalid spin raises ValueError", False)


if __name__ == "__main__":
    for f in (spin_algebra, hamiltonian, rates, efficiency, sweep, factorization, classical_noise, errors):
        f()
    print("all passed" if check.failed == 0 else f"{check.failed} failed")
    sys.exit(1 if check.failed else 0)
