"""pytest entry for the binding smoke checks: pytest crates/python/tests"""

import pathlib
import runpy

SMOKE = pathlib.Path(__file__).resolve().parents[3] / "python" / "smoke_test.py"


def test_smoke_checks_pass():
    ns = runpy.run_path(str(SMOKE))
    for name in ("spin_algebra", "hamiltonian", "rates", "efficiency", "sweep",
                 "factorization", "classical_noise", "errors"):
        ns[name]()
    assert ns["check"].failed == 0
