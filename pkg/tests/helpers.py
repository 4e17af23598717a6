import math

from stairloc.synth import StaircaseSpec, build_scene


def make_scene(intrinsics, distance=3.0, lateral=0.0, yaw=0.0, direction="up",
               steps=5, rise=0.17, run=0.29, width=1.2, camera_height=0.5):
    spec = StaircaseSpec(steps=steps, rise=rise, run=run, width=width,
                         position=(lateral, camera_height, distance),
                         yaw=yaw, direction=direction)
    return build_scene(spec, intrinsics)


def angle_diff_pi(a, b):
    """Minimal distance between undirected-line angles."""
    d = abs(math.fmod(a - b, math.pi))
    return min(d, math.pi - d)
