"""Desk-scale environments with deterministic resets and pure stepping.

Both environments are fixed-horizon and fully deterministic: stepping is a
pure function of (state, action), resets always return the same start state,
and the behavior descriptor is a function of the final state. Stepping is
written against a batch axis so a whole population advances in one call;
single-state step() is the batch-of-one special case.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    episode_length: int
    bd_dim: int
    bd_bounds: np.ndarray  # (bd_dim, 2), descriptor box after normalization
    fitness_offset: float  # makes fitness + offset strictly positive

    def __post_init__(self):
        b = np.asarray(self.bd_bounds, dtype=np.float64)
        b = np.ascontiguousarray(b)
        b.flags.writeable = False
        object.__setattr__(self, "bd_bounds", b)


class PointMazeTrap:
    """Point mass in a [-5, 5]^2 arena with a U-shaped trap in its path.

    State is (x, y, vx, vy); the action is an acceleration in [-1, 1]^2,
    scaled by 0.1 and integrated with the speed clipped to 0.5. The trap is
    a slab filling x in [1.5, 2.5], y in [-1, 1] plus two arms reaching back
    toward the start along y = +/-1, so a pocket opens toward -x. Driving
    straight toward +x from the start enters the pocket and stalls on the
    slab's inner face at x = 1.5, while the reward vx - 0.01|a|^2 keeps
    pointing that way. Collisions zero the velocity component normal to the
    surface hit; movement resolves x then y, so contact slides.

    Reward telescopes to roughly the x displacement minus the action cost, so
    the drive-into-the-pocket policy is a local optimum and detours around
    the trap dominate it.
    """

    ARENA = 5.0
    VMAX = 0.5
    ACCEL = 0.1
    ACTION_COST = 0.01
    WALL_X0, WALL_X1 = 1.5, 2.5  # back slab of the U
    WALL_Y0, WALL_Y1 = -1.0, 1.0
    ARM_X0 = 0.5  # arm tips; the pocket mouth plane
    ARM_INNER_Y = 0.75  # pocket half-height between the arms
    # Arms overlap the slab in x: a shared boundary plane would let a point
    # pressed exactly on it slide through, since boundaries count as outside.
    ARM_X1 = 1.6
    WALLS = (
        (WALL_X0, WALL_X1, WALL_Y0, WALL_Y1),
        (ARM_X0, ARM_X1, ARM_INNER_Y, WALL_Y1),
        (ARM_X0, ARM_X1, WALL_Y0, -ARM_INNER_Y),
    )

    def __init__(self):
        self.spec = EnvSpec(
            name="point-maze-trap",
            state_dim=4,
            action_dim=2,
            episode_length=100,
            bd_dim=2,
            bd_bounds=np.array([[0.0, 1.0], [0.0, 1.0]]),
            # |vx| <= 0.5 over 100 steps bounds the velocity term of the
            # return below by -50; 51 clears that with one to spare. A
            # full-reverse policy can dip slightly lower once action costs
            # are added, but nothing that trains or explores does.
            fitness_offset=51.0,
        )

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        return np.zeros(4, dtype=np.float64)

    def reset_batch(self, count: int) -> np.ndarray:
        return np.zeros((count, 4), dtype=np.float64)

    def step_batch(self, states: np.ndarray, actions: np.ndarray):
        a = np.clip(actions, -1.0, 1.0)
        x, y = states[:, 0].copy(), states[:, 1].copy()
        v = states[:, 2:4] + self.ACCEL * a
        speed = np.sqrt(np.square(v).sum(axis=1))
        over = speed > self.VMAX
        scale = np.where(over, self.VMAX / np.where(speed > 0, speed, 1.0), 1.0)
        vx = v[:, 0] * scale
        vy = v[:, 1] * scale

        # x sweep: wall faces, then arena walls. Walls are applied in
        # sequence against the updated xn; clamping only pulls xn back
        # toward x, so it can falsify a later wall's crossing test but
        # never fabricate one.
        xn = x + vx
        for wx0, wx1, wy0, wy1 in self.WALLS:
            inside_y = (y > wy0) & (y < wy1)
            hit_r = inside_y & (x <= wx0) & (xn > wx0)
            hit_l = inside_y & (x >= wx1) & (xn < wx1)
            xn = np.where(hit_r, wx0, xn)
            xn = np.where(hit_l, wx1, xn)
            vx = np.where(hit_r | hit_l, 0.0, vx)
        lo, hi = -self.ARENA, self.ARENA
        out = (xn < lo) | (xn > hi)
        xn = np.clip(xn, lo, hi)
        vx = np.where(out, 0.0, vx)

        # y sweep against the post-sweep x
        yn = y + vy
        for wx0, wx1, wy0, wy1 in self.WALLS:
            inside_x = (xn > wx0) & (xn < wx1)
            hit_u = inside_x & (y <= wy0) & (yn > wy0)
            hit_d = inside_x & (y >= wy1) & (yn < wy1)
            yn = np.where(hit_u, wy0, yn)
            yn = np.where(hit_d, wy1, yn)
            vy = np.where(hit_u | hit_d, 0.0, vy)
        out = (yn < lo) | (yn > hi)
        yn = np.clip(yn, lo, hi)
        vy = np.where(out, 0.0, vy)

        next_states = np.stack([xn, yn, vx, vy], axis=1)
        rewards = vx - self.ACTION_COST * np.square(a).sum(axis=1)
        return next_states, rewards

    def step(self, state: np.ndarray, action: np.ndarray):
        ns, r = self.step_batch(state[None, :], np.asarray(action)[None, :])
        return ns[0], float(r[0])

    def descriptor_from_state(self, state: np.ndarray) -> np.ndarray:
        pos = np.asarray(state[..., :2], dtype=np.float64)
        return (pos + self.ARENA) / (2.0 * self.ARENA)

    def descriptor(self, trajectory_states: np.ndarray) -> np.ndarray:
        return self.descriptor_from_state(np.asarray(trajectory_states)[-1])


class PlanarArm:
    """Eight-link arm; actions nudge joint angles, reward favors evenness.

    State is the 8 joint angles (radians, relative to the previous link),
    all zero at reset. An action in [-1, 1]^8 is scaled by 0.1 and added to
    the angles. Reward each step is the negative standard deviation of the
    angles, so fitness is maximal for evenly curled configurations. The
    descriptor is the end-effector position after the final step, mapped
    from [-1, 1]^2 into the unit square.
    """

    NUM_LINKS = 8
    LINK_LENGTH = 1.0 / 8.0
    DELTA_SCALE = 0.1

    def __init__(self):
        self.spec = EnvSpec(
            name="planar-arm",
            state_dim=8,
            action_dim=8,
            episode_length=10,
            bd_dim=2,
            bd_bounds=np.array([[0.0, 1.0], [0.0, 1.0]]),
            # angles stay within 0.1 * T = 1 rad of zero, so each step's
            # reward is above -1 and the return above -10.
            fitness_offset=10.0,
        )

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        return np.zeros(self.NUM_LINKS, dtype=np.float64)

    def reset_batch(self, count: int) -> np.ndarray:
        return np.zeros((count, self.NUM_LINKS), dtype=np.float64)

    def step_batch(self, states: np.ndarray, actions: np.ndarray):
        a = np.clip(actions, -1.0, 1.0)
        next_states = states + self.DELTA_SCALE * a
        rewards = -np.std(next_states, axis=1)
        return next_states, rewards

    def step(self, state: np.ndarray, action: np.ndarray):
        ns, r = self.step_batch(state[None, :], np.asarray(action)[None, :])
        return ns[0], float(r[0])

    def end_effector(self, state: np.ndarray) -> np.ndarray:
        heading = np.cumsum(np.asarray(state, dtype=np.float64), axis=-1)
        x = self.LINK_LENGTH * np.cos(heading).sum(axis=-1)
        y = self.LINK_LENGTH * np.sin(heading).sum(axis=-1)
        return np.stack([x, y], axis=-1)

    def descriptor_from_state(self, state: np.ndarray) -> np.ndarray:
        return (self.end_effector(state) + 1.0) / 2.0

    def descriptor(self, trajectory_states: np.ndarray) -> np.ndarray:
        return self.descriptor_from_state(np.asarray(trajectory_states)[-1])


ENV_BUILDERS = {
    "point-maze-trap": PointMazeTrap,
    "planar-arm": PlanarArm,
}


def make_env(name: str):
    try:
        return ENV_BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown env {name!r}, available: {sorted(ENV_BUILDERS)}") from None


def write_trajectory(path, states: np.ndarray, actions: np.ndarray, rewards: np.ndarray) -> None:
    """Diagnostic log: one line per step with step, state, action, reward."""
    with open(path, "w") as f:
        for t in range(len(actions)):
            fields = [str(t)]
            fields += [repr(float(v)) for v in np.asarray(states[t]).ravel()]
            fields += [repr(float(v)) for v in np.asarray(actions[t]).ravel()]
            fields.append(repr(float(rewards[t])))
            f.write(" ".join(fields) + "\n")
