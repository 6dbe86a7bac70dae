import sys
from pathlib import Path

import numpy as np
from hypothesis import settings, strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from cpapprox import from_atoms  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def lattice_dists(draw, max_atoms: int = 6, step: float = 0.25, span: int = 12):
    """Distributions on ``step * Z`` with a handful of atoms."""
    k = draw(st.integers(1, max_atoms))
    idx = draw(st.lists(st.integers(-span, span), min_size=k, max_size=k, unique=True))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
    w = np.array(raw) / sum(raw)
    return from_atoms(zip((np.array(idx) * step).tolist(), w.tolist()))


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"CRITERION {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}")
