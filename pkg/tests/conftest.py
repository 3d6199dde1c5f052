import numpy as np
import pytest

from assetguard import atmosphere, dynamics


@pytest.fixture(scope="session")
def atmo():
    return atmosphere.load_atmosphere()


@pytest.fixture(scope="session")
def thin_atmo():
    """Near-vacuum atmosphere: drag negligible, tables still valid."""
    alt = np.array([0.0, 200000.0])
    return atmosphere.AtmosphereModel(
        density=atmosphere.build_table(alt, [1e-30, 1e-30]),
        speed_of_sound=atmosphere.build_table(alt, [1000.0, 1000.0]),
        drag_coeff=atmosphere.build_table([0.0, 10.0], [0.3, 0.3]),
    )


@pytest.fixture(scope="session")
def evader_spec():
    return dynamics.PlayerSpec(
        name="evader", role="evader", mass=1000.0, ref_area=np.pi / 4 * 25.0,
        u_max_g=7.0, mach_min=0.5, node_count=30,
        x0=np.array([-10000.0, 0.0, 31000.0, 3000.0, 0.0, 0.0]))


@pytest.fixture(scope="session")
def pursuer_spec():
    return dynamics.PlayerSpec(
        name="pursuer1", role="pursuer", mass=1000.0, ref_area=np.pi / 4 * 25.0,
        u_max_g=8.0, mach_min=0.5, node_count=30,
        x0=np.array([4000.0, 0.0, 30000.0, -3000.0, 0.0, 0.0]))
