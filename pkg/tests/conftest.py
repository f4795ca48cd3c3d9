import numpy as np
import pytest

from flockphase import ArenaSpec, FlightParams, ModelParams, NavGoal


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def arena():
    return ArenaSpec()


@pytest.fixture
def goal():
    return NavGoal()


@pytest.fixture
def flight():
    return FlightParams()


def random_agents(rng, n, spread=10.0, z_center=10.0, v=2.0):
    """Seeded random swarm snapshot around the arena center."""
    from flockphase import AgentState

    agents = []
    for i in range(n):
        heading = rng.uniform(-np.pi, np.pi)
        vz = rng.uniform(-0.5, 0.5)
        agents.append(
            AgentState(
                id=i,
                position=np.array(
                    [rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                     z_center + rng.uniform(-2, 2)]
                ),
                velocity=np.array([v * np.cos(heading), v * np.sin(heading), vz]),
                heading=heading,
            )
        )
    return agents
