import numpy as np
import pytest

from cavsim import Scenario, default_truncation


def margin_scenario(alpha=1.0, beta=0.5, g=0.0, q=0.0, extra=10, **kw) -> Scenario:
    """Scenario with Fock cutoffs comfortably above the default rule.

    Raw-state comparisons at 1e-8 need the coherent tails pushed well below
    the default rule's ~1e-14 mass.
    """
    sc = Scenario().variant(g=g, q=q, alpha=alpha, beta=beta, **kw)
    return sc.variant(
        n1=default_truncation(alpha) + extra, n2=default_truncation(beta) + extra
    )


def stage1_scenario(alpha=1.0, g=0.0, t1=1000.0, **kw) -> Scenario:
    """Single-cavity traversal (everything after cavity 1 has zero duration)."""
    return margin_scenario(alpha=alpha, g=g, **kw).variant(
        stage_durations=(t1, 0.0, 0.0, 0.0, 0.0)
    )


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
