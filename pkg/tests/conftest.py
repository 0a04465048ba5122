import numpy as np
import pytest

from cito.multibody import (
    ContactSpec,
    FlatSurface,
    ImplicitSurface,
    JointSpec,
    LinkSpec,
    RobotModel,
)


@pytest.fixture
def free_link_model():
    """Single unconstrained link, no contacts, flat ground far below."""
    return RobotModel(
        links=(LinkSpec(mass=2.0, inertia=0.5, geometry_length=1.0),),
        joints=(),
        contacts=(),
        surface=FlatSurface(height=-100.0),
        gravity=9.81,
    )


@pytest.fixture
def point_mass_model():
    """Single link with one contact at its CoM on flat ground."""
    return RobotModel(
        links=(LinkSpec(mass=1.0, inertia=0.1),),
        joints=(),
        contacts=(ContactSpec(link=0, local_offset=(0.0, 0.0), friction_mu=1.0),),
        surface=FlatSurface(height=0.0),
        gravity=9.81,
    )


@pytest.fixture
def pendulum_model():
    """Single link of length 1 pinned to the world at one end."""
    return RobotModel(
        links=(LinkSpec(mass=2.0, inertia=2.0 / 12.0, geometry_length=1.0),),
        joints=(
            JointSpec(
                parent_link=-1,
                child_link=0,
                parent_anchor=(0.0, 0.0),
                child_anchor=(-0.5, 0.0),
                actuated=False,
            ),
        ),
        contacts=(),
        surface=FlatSurface(height=-100.0),
        gravity=9.81,
    )


@pytest.fixture
def double_pendulum_model():
    link = LinkSpec(mass=1.0, inertia=1.0 / 12.0, geometry_length=1.0)
    return RobotModel(
        links=(link, link),
        joints=(
            JointSpec(
                parent_link=-1,
                child_link=0,
                parent_anchor=(0.0, 0.0),
                child_anchor=(-0.5, 0.0),
            ),
            JointSpec(
                parent_link=0,
                child_link=1,
                parent_anchor=(0.5, 0.0),
                child_anchor=(-0.5, 0.0),
                actuated=True,
                torque_min=-10.0,
                torque_max=10.0,
            ),
        ),
        contacts=(),
        surface=FlatSurface(height=-100.0),
        gravity=9.81,
    )


def hanging_double_pendulum_q():
    """Consistent configuration for double_pendulum_model: both links straight down."""
    th = -np.pi / 2
    return np.array([0.0, -0.5, th, 0.0, -1.5, th])


@pytest.fixture
def sinusoid_model():
    """Single link with a contact at its CoM above a sinusoidal terrain."""
    return RobotModel(
        links=(LinkSpec(mass=1.0, inertia=0.1),),
        joints=(),
        contacts=(ContactSpec(link=0, local_offset=(0.0, 0.0), friction_mu=1.0),),
        surface=ImplicitSurface(expression="pz - 0.1*sin(px)"),
        gravity=9.81,
    )
