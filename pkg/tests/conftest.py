import mpmath
import pytest

from cacsinr.outage import SystemConfig, TrafficClass, allocate_powers

mpmath.mp.dps = 40


def q_reference(x):
    """Upper normal tail by adaptive quadrature of the density (mpmath)."""
    x = mpmath.mpf(x)
    density = lambda t: mpmath.exp(-t * t / 2) / mpmath.sqrt(2 * mpmath.pi)
    if x >= 0:
        return mpmath.quad(density, [x, x + 10, mpmath.inf])
    return mpmath.quad(density, [x, 0, 10, mpmath.inf])


def q_inverse_reference(p, iters=120):
    lo, hi = mpmath.mpf(0), mpmath.mpf(40)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if q_reference(mid) > p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


@pytest.fixture
def preset_cfg():
    return SystemConfig(processing_gain=256.0, f1=0.114, f2=0.44)


@pytest.fixture
def preset_classes():
    return [
        TrafficClass.from_ber(1, 19.2e3, 1e-4, alpha=1.0, codes=1, outage_target=0.01),
        TrafficClass.from_ber(2, 19.2e3, 1e-6, alpha=1.0, codes=1, outage_target=0.01),
    ]


@pytest.fixture
def preset_alloc(preset_classes, preset_cfg):
    return allocate_powers(preset_classes, preset_cfg, 0)


def make_class(index=1, x=6.915, alpha=1.0, codes=1, target=0.01, ber=1e-4):
    return TrafficClass(index, 19.2e3, ber, x, alpha, codes, target)


# acceptance criteria report: (id, description, passed, detail)
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, desc, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {cid:>2}. {desc} -- {detail}")
