"""Acceptance criteria at full scale; each test prints one PASS/FAIL line."""
from __future__ import annotations

import pytest

from charcomp import acceptance

NAMES = {
    1: "invariant_matching",
    2: "optimizer_effort",
    3: "closed_form_vs_numeric",
    4: "three_pulse_swap",
    5: "characterization_fidelity",
    6: "controlled_c1_formula",
    7: "canonical_invariant_formula",
    8: "compilation_soundness",
    9: "qft_benchmark",
    10: "trotter_benchmark",
    11: "coverage_completeness",
}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(NAMES), ids=[f"criterion_{k}_{v}" for k, v in sorted(NAMES.items())])
def test_criterion(number, report_line):
    result = acceptance.FULL[number]()
    print(result.line())
    report_line(result.line())
    assert result.number == number
    assert result.passed, result.line()
