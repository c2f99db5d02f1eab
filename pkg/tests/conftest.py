import pytest

from streamforge.engine import EngineConfig, Mode
from streamforge.evaluation import run_prequential
from streamforge.registry import make_task
from streamforge.taskspec import parse_task


ACCEPTANCE_LINES: list[str] = []


def prequential(
    learner: str,
    stream: str,
    n: int | None,
    seed: int = 0,
    mode: Mode = Mode.DETERMINISTIC,
    workers: int = 4,
    lookahead: int = 0,
    frequency: int | None = None,
    timing: bool | None = None,
):
    """Run one prequential task given learner and stream component strings."""
    text = f"PrequentialEvaluation -l ({learner}) -s ({stream}) -f {frequency or n or 100_000}"
    if n is not None:
        text += f" -i {n}"
    if timing is None:
        timing = mode is Mode.PARALLEL
    task = make_task(parse_task(text), seed=seed, timing=timing)
    return run_prequential(task, EngineConfig(mode=mode, workers=workers, seed=seed, lookahead=lookahead))


@pytest.fixture
def run_task():
    return prequential


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
