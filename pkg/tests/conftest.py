import pytest

from stairloc.camera import Intrinsics
from stairloc.synth import StaircaseSpec, build_scene


@pytest.fixture
def intrinsics():
    return Intrinsics(fx=580.0, fy=580.0, cx=319.5, cy=239.5, width=640, height=480)


@pytest.fixture
def frontal_scene(intrinsics):
    spec = StaircaseSpec(steps=5, rise=0.17, run=0.29, width=1.2,
                         position=(0.0, 0.5, 3.0), yaw=0.0, direction="up")
    return build_scene(spec, intrinsics)
