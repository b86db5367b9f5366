import numpy as np
import pytest

from blendids.dataset import LABEL, NUMERIC, Column, Dataset, FeatureSchema
from blendids.synth import make_blobs


def numeric_schema(d: int, n_classes: int = 2, name: str = "toy") -> FeatureSchema:
    cols = [Column(f"x{i}", NUMERIC) for i in range(d)] + [Column("y", LABEL)]
    return FeatureSchema(name, tuple(cols), {str(k): k for k in range(n_classes)})


def make_dataset(X, y, n_classes: int | None = None) -> Dataset:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.int64)
    C = n_classes if n_classes is not None else max(2, int(y.max()) + 1 if y.size else 2)
    return Dataset(X, y, numeric_schema(X.shape[1], C))


@pytest.fixture(scope="session")
def blobs():
    return make_blobs(n=2000, n_features=6, separation=2.0, minority_fraction=0.5, seed=7)


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    """A gen-synth demo directory (data.csv, schema.yaml, config.yaml) trained once."""
    from blendids.cli import main

    root = tmp_path_factory.mktemp("demo")
    assert main(["gen-synth", "--out", str(root), "--n", "1200", "--seed", "3"]) == 0
    assert main(["train", "--config", str(root / "config.yaml"), "--format", "json"]) == 0
    return root


def finite_difference_check(net, x, target, h=1e-5, floor=1e-6):
    """Largest relative error between backprop and central differences over every parameter.

    Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps parameters
    whose true gradient is ~0 from dividing round-off by round-off.
    """
    from blendids.net import backward, forward, loss

    acts, _ = forward(net, x)
    analytic = backward(net, acts, target).params()
    params = net.params()
    worst = 0.0
    for p_i, (p, g) in enumerate(zip(params, analytic)):
        for idx in np.ndindex(p.shape):
            shifted = []
            for sign in (1.0, -1.0):
                q = [a.copy() for a in params]
                q[p_i][idx] += sign * h
                moved = net.with_params(q)
                shifted.append(loss(moved, forward(moved, x)[1], target))
            numeric = (shifted[0] - shifted[1]) / (2 * h)
            a = g[idx]
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), floor))
    return worst


# -- acceptance summary ------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _CRITERIA[n] = (status, title)
    elif rep.when == "setup" and rep.failed:
        _CRITERIA[n] = ("FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}")
