import numpy as np
import pytest

from prnet.dataset import generate_synthetic, split
from prnet.network import TrainConfig, init_network, train
from prnet.pathway import build_masks, generate_toy_hierarchy, reference_levels


@pytest.fixture(scope="session")
def small_cohort():
    """120-gene cohort with 6 planted genes, split 80/20."""
    ds, truth = generate_synthetic(500, 120, 6, 0.3, seed=11)
    train_ds, test_ds = split(ds, 0.2, seed=11)
    return ds, truth, train_ds, test_ds


@pytest.fixture(scope="session")
def small_hierarchy(small_cohort):
    ds = small_cohort[0]
    return generate_toy_hierarchy(len(ds.genes), reference_levels(len(ds.genes)), 3, seed=11, genes=ds.genes)


@pytest.fixture(scope="session")
def trained_small(small_cohort, small_hierarchy):
    train_ds = small_cohort[2]
    net = init_network(build_masks(small_hierarchy, train_ds.loci), seed=5)
    return train(net, train_ds, TrainConfig(learning_rate=1e-2, epochs=30, seed=5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_VERDICTS: dict = {}


@pytest.fixture
def verdict():
    """Record one acceptance line, printed in the terminal summary, then assert it."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        _VERDICTS[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
