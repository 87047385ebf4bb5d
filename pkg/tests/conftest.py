import functools
import tempfile

import numpy as np
import pytest

from mgdl import config, nn, runner

_DESK_ROOT = tempfile.mkdtemp(prefix="mgdl-desk-")


@functools.lru_cache(maxsize=None)
def desk_run(name, method="mgdl"):
    """Run a desk preset once per session; returns ``(metrics, output_dir)``."""
    cfg = config.preset(name)
    cfg.method = method
    out = f"{_DESK_ROOT}/{name}-{method}"
    return runner.run_experiment(cfg, out), out


def central_difference(spec, params, X, Y, h=1e-6):
    """Numerical gradient of the batch MSE loss, one coordinate at a time."""
    flat = params.flat
    out = np.empty_like(flat)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = nn.mse_loss(nn.predict(params, X), Y)
        flat[i] = keep - h
        down = nn.mse_loss(nn.predict(params, X), Y)
        flat[i] = keep
        out[i] = (up - down) / (2 * h)
    return out


def relative_error(a, b, floor=1e-8):
    return np.abs(a - b) / np.maximum(floor, np.abs(a) + np.abs(b))


def random_network(rng, max_width=8, max_depth=4):
    depth = int(rng.integers(1, max_depth + 1))
    widths = tuple(int(w) for w in rng.integers(1, max_width + 1, size=depth + 1))
    spec = nn.MlpSpec(widths)
    params = nn.MlpParams(spec)
    params.flat[:] = rng.normal(0.0, 0.8, size=spec.n_params)
    return spec, params


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
