"""Shared fixtures: small flow files, clustered instances and simulated panels."""

from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import pandas as pd
import pytest
from scipy import linalg

from gvcspatial.data.frame import RegressionFrame
from gvcspatial.montecarlo.simulate import SimConfig, random_weights, simulate_panel
from gvcspatial.weights.matrix import WeightMatrix, save_weights


@pytest.fixture
def three_country_flows(tmp_path: Path) -> Path:
    """A->B 4, B->A 2, A->C 1, C->A 1: W rows (0, .75, .25), (1, 0, 0), (1, 0, 0)."""
    path = tmp_path / "flows.csv"
    pd.DataFrame(
        [
            {"origin": "A", "dest": "B", "year": 2000, "value": 4.0},
            {"origin": "B", "dest": "A", "year": 2000, "value": 2.0},
            {"origin": "A", "dest": "C", "year": 2000, "value": 1.0},
            {"origin": "C", "dest": "A", "year": 2000, "value": 1.0},
        ]
    ).to_csv(path, index=False)
    return path


@pytest.fixture
def paired_weights() -> WeightMatrix:
    """Two disjoint pairs: A-B and C-D."""
    S = np.zeros((4, 4))
    S[0, 1] = S[1, 0] = 1.0
    S[2, 3] = S[3, 2] = 1.0
    return WeightMatrix.from_proximity(["A", "B", "C", "D"], S)


@pytest.fixture
def paired_values() -> np.ndarray:
    """Values equal within each pair and opposite across pairs."""
    return np.array([1.0, 1.0, -1.0, -1.0])


@pytest.fixture
def ring_weights() -> WeightMatrix:
    n = 12
    S = np.zeros((n, n))
    for i in range(n):
        S[i, (i + 1) % n] = S[(i + 1) % n, i] = 1.0
    return WeightMatrix.from_proximity([f"R{i:02d}" for i in range(n)], S)


@pytest.fixture
def sar_config() -> SimConfig:
    return SimConfig(n=30, T=8, model="SAR", rho=0.4, beta=[-0.2, 0.3], gamma=[], sigma=0.1, degree=4, seed=11)


@pytest.fixture
def sdm_config() -> SimConfig:
    return SimConfig(n=30, T=8, model="SDM", rho=0.4, beta=[-0.2, 0.3], gamma=[0.25], sigma=0.1, degree=4, seed=12)


@pytest.fixture
def sem_config() -> SimConfig:
    return SimConfig(n=30, T=8, model="SEM", lambda_=0.5, beta=[-0.2, 0.3], gamma=[], sigma=0.1, degree=4, seed=13)


@pytest.fixture
def sar_frame(sar_config: SimConfig) -> Tuple[RegressionFrame, WeightMatrix]:
    sim = simulate_panel(sar_config)
    return sim.frame, sim.weights


def indicator_panel(
    w: WeightMatrix,
    T: int = 10,
    rho: float = 0.4,
    seed: int = 0,
    start_year: int = 2000,
) -> pd.DataFrame:
    """Country-year indicators whose log CI growth follows a spatial lag process.

    Growth of ln CI responds to the lagged log levels of CI, Y, EI, UR and GVC;
    GVC stays inside (0, 1).
    """
    rng = np.random.default_rng(seed)
    n = w.n
    levels: Dict[str, np.ndarray] = {}
    for name, centre, step in (("Y", 9.0, 0.05), ("EI", 1.5, 0.05), ("UR", 4.0, 0.02), ("GVC", -1.0, 0.05)):
        base = rng.normal(centre, 0.5, size=(n, 1))
        levels[name] = base + np.cumsum(rng.normal(0.0, step, size=(n, T)), axis=1)
    levels["GVC"] = np.minimum(levels["GVC"], -0.05)

    factor = linalg.lu_factor(np.eye(n) - rho * w.W)
    mu = rng.normal(0.0, 0.1, size=n)
    ln_ci = np.empty((n, T))
    ln_ci[:, 0] = rng.normal(0.0, 0.5, size=n)
    for t in range(1, T):
        systematic = (
            -0.2 * ln_ci[:, t - 1]
            + 0.05 * levels["Y"][:, t - 1]
            + 0.1 * levels["EI"][:, t - 1]
            - 0.05 * levels["UR"][:, t - 1]
            - 0.1 * levels["GVC"][:, t - 1]
            + mu
            + rng.normal(0.0, 0.05, size=n)
        )
        ln_ci[:, t] = ln_ci[:, t - 1] + linalg.lu_solve(factor, systematic)

    rows = []
    for i, country in enumerate(w.labels):
        for t in range(T):
            rows.append({
                "country": country,
                "year": start_year + t,
                "CI": float(np.exp(ln_ci[i, t])),
                "Y": float(np.exp(levels["Y"][i, t])),
                "EI": float(np.exp(levels["EI"][i, t])),
                "UR": float(np.exp(levels["UR"][i, t])),
                "GVC": float(np.exp(levels["GVC"][i, t])),
            })
    return pd.DataFrame(rows)


@pytest.fixture
def panel_inputs(tmp_path: Path) -> Tuple[Path, Path]:
    """An indicator panel CSV and its labelled weight matrix CSV."""
    w = random_weights(25, degree=4, seed=3)
    panel_path = tmp_path / "panel.csv"
    indicator_panel(w, T=10, rho=0.4, seed=5).to_csv(panel_path, index=False)
    weights_path = save_weights(w, tmp_path / "w.csv")
    return panel_path, weights_path


@pytest.fixture
def make_panel():
    return indicator_panel
