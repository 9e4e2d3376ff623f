from __future__ import annotations

import pytest

from tracetune.prompt import ContentElement, StructuredPrompt

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _acceptance_results.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")


@pytest.fixture
def street_prompt() -> StructuredPrompt:
    return StructuredPrompt(
        theme="European 1930s urban street scene",
        art_style="muted gouache concept art",
        content=(
            ContentElement(
                label="Vintage Cars",
                description="1930s sedans parked along the curb",
            ),
            ContentElement(
                label="Gas Lamps",
                description="cast-iron gas lamps lining the sidewalk",
            ),
            ContentElement(
                label="Cobblestone Street",
                description="wet cobblestone street reflecting the lamps",
            ),
        ),
        lighting="overcast late afternoon",
        color="desaturated browns and greys",
        shot_angle="eye-level street view",
    )
