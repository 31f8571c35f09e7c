import numpy as np
import pytest


def subgroup_csv(path, beta_a, beta_b, m=1500, noise=0.05, seed=0):
    """Write a CSV whose ``group`` column splits rows into two linear models."""
    rng = np.random.default_rng(seed)
    d = len(beta_a)
    X = rng.uniform(-1, 1, (m, d))
    group = rng.integers(0, 2, m)
    beta = np.where(group[:, None] == 0, beta_a, beta_b)
    y = np.einsum("ij,ij->i", X, beta) + noise * rng.standard_normal(m)
    header = [f"x{j}" for j in range(d)] + ["group", "y"]
    rows = np.column_stack([X, group, y])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")
    return path


@pytest.fixture
def same_csv(tmp_path):
    beta = [0.3, -0.2, 0.1]
    return subgroup_csv(tmp_path / "same.csv", beta, beta)


@pytest.fixture
def gap_csv(tmp_path):
    return subgroup_csv(tmp_path / "gap.csv", [0.3, -0.2, 0.1], [-0.4, 0.4, -0.3])


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def check(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)
