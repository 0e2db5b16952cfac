import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedsim import make_graph  # noqa: E402


def random_graph(seed, n, d, p=0.3, c=3):
    """Erdos-Renyi graph with Gaussian features, random labels and a 50/25/25 split."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    labels = np.arange(n) % c
    rng.shuffle(labels)
    perm = rng.permutation(n)
    masks = {"train": perm[: n // 2], "val": perm[n // 2: 3 * n // 4], "test": perm[3 * n // 4:]}
    return make_graph(n, np.stack([iu[keep], ju[keep]], 1), rng.normal(size=(n, d)), labels,
                      num_classes=c, masks=masks)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
