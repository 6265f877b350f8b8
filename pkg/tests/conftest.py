import numpy as np
import pytest

from lprvqa.dataset import VideoRecord, generate_synthetic, make_split, materialize


def numeric_grads(loss_fn, params, h=1e-5):
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``params`` (mutated in place)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = loss_fn()
            p[idx] = orig - h
            down = loss_fn()
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-7):
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=rtol, atol=atol)


def tiny_records(n=6, n_frames=10, frame_dim=3, video_dim=2, fps=5.0, seed=0, labelled=True):
    rng = np.random.default_rng(seed)
    return [
        VideoRecord(
            f"r{i}",
            rng.normal(size=(n_frames, frame_dim)),
            fps,
            rng.uniform(size=video_dim),
            float(rng.uniform()) if labelled else None,
        )
        for i in range(n)
    ]


@pytest.fixture(scope="session")
def small_synthetic():
    return generate_synthetic(120, 6, 3, 10.0, 2.0, 0.5, 3)


@pytest.fixture(scope="session")
def small_split_data(small_synthetic):
    return materialize(small_synthetic, make_split(small_synthetic, 12, 0))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
