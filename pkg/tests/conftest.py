import numpy as np
import pytest

from polfuse.network import NetworkConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return NetworkConfig(base_channels=8, window=2, heads=2, cbam_reduction=4)


# One verdict line per acceptance criterion, printed in the terminal summary
# regardless of capture mode.
_CRITERION_LABELS = {
    1: "gradient oracle (per-op < 1e-4, end-to-end < 1e-3)",
    2: "polarization identities and scale invariance",
    3: "loss-term unit values and projections",
    4: "metric identity suite on 20 natural images",
    5: "tiny-overfit halves the loss in 300 steps",
    6: "architecture shape/range/equivariance/ablations",
    7: "persistence round-trip and seeded determinism",
    8: "demosaic-then-Stokes equals direct Stokes on constant cells",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for status, verdict in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(status, ()):
            name = report.location[2]
            if name.startswith("test_criterion_"):
                number = int(name.split("_")[2])
                verdicts[number] = verdict
    if verdicts:
        terminalreporter.write_line("")
        for number in sorted(verdicts):
            terminalreporter.write_line(
                "%s criterion %d: %s"
                % (verdicts[number], number, _CRITERION_LABELS[number])
            )
