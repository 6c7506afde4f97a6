import numpy as np
import pytest
from hypothesis import settings

from warptree.design import SampleZ, get_design
from warptree.wavelets import get_wavelet

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

DESIGN_NAMES = ["uniform", "power2", "power3", "piecewise", "scurve"]


@pytest.fixture
def two_point():
    return SampleZ([0.25, 0.75], [2.0, 4.0])


@pytest.fixture
def haar():
    return get_wavelet("haar")


@pytest.fixture
def uniform():
    return get_design("uniform")


@pytest.fixture(params=DESIGN_NAMES)
def design(request):
    return get_design(request.param)


def random_proper_tree(rng, max_depth=10, p_split=0.6):
    from warptree.dyadic import ROOT, DyadicTree, children

    nodes = {ROOT}
    frontier = [ROOT]
    while frontier:
        ix = frontier.pop()
        if ix.j + 1 >= max_depth:
            continue
        for c in children(ix):
            if rng.random() < p_split:
                nodes.add(c)
                frontier.append(c)
    return DyadicTree(frozenset(nodes))


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, title: str, ok: bool, detail: str = "") -> bool:
    line = f"criterion {criterion:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
