"""Pure-Python training kernel; import fallback for ``hplsv._core``.

The compiled kernel mirrors this loop operation-for-operation (same RNG,
same IEEE arithmetic order), so both backends produce bit-identical
tables. Keep any change here in lockstep with ``_core.pyx``.
"""
from __future__ import annotations

from math import atan2, floor, pi, sqrt

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * pi

_DX = (0, 1, 0, -1)
_DY = (1, 0, -1, 0)
_ANGLE = (pi / 2.0, 0.0, -pi / 2.0, pi)


class TrainerKernel:
    """Owns both Q tables and runs one training episode at a time."""

    def __init__(
        self,
        dist_bin_size: float,
        dist_cap: float,
        angle_bins: int,
        person_slots: int,
        goal_bonus: float,
        step_penalty: float,
        crossing_penalty: float,
        social_weight: float,
        alpha: float,
        gamma: float,
        task_greedy_bootstrap: bool,
    ) -> None:
        self.dist_bin_size = dist_bin_size
        self.dist_cap = dist_cap
        self.angle_bins = angle_bins
        self.person_slots = person_slots
        self.dist_bins = int(floor(dist_cap / dist_bin_size)) + 1
        self.goal_bonus = goal_bonus
        self.step_penalty = step_penalty
        self.crossing_penalty = crossing_penalty
        self.social_weight = social_weight
        self.alpha = alpha
        self.gamma = gamma
        self.task_greedy_bootstrap = task_greedy_bootstrap
        self.q_task: dict = {}
        self.q_social: dict = {}

    def load_tables(self, q_task: dict, q_social: dict) -> None:
        self.q_task = q_task
        self.q_social = q_social

    def export_tables(self):
        # Exact zeros are indistinguishable from absent entries (lookups
        # default to 0), so strip them for a canonical table.
        return (
            {k: v for k, v in self.q_task.items() if v != 0.0},
            {k: v for k, v in self.q_social.items() if v != 0.0},
        )

    def run_episode(
        self,
        scn,
        start_x: int,
        start_y: int,
        start_h: int,
        max_steps: int,
        epsilon: float,
        rng_state: int,
        learn_social: bool = True,
    ):
        """One epsilon-greedy rollout with per-step dual Q updates.

        Returns (rng_state, steps, task_return, reached, crossings).
        """
        width = scn.width
        height = scn.height
        gx = scn.goal_x
        gy = scn.goal_y
        obst = scn.obstacles
        vobs = scn.vobstacles
        people_x = scn.people_x
        people_y = scn.people_y
        n_people = len(people_x)

        nd = self.dist_bins
        na = self.angle_bins
        bin_size = self.dist_bin_size
        cap = self.dist_cap
        sector = _TWO_PI / na
        half = sector / 2.0
        # Missing person slots fold in as a constant suffix: far bucket, sector 0.
        pad_mult = 1
        pad_add = 0
        for _ in range(self.person_slots - n_people):
            pad_add = (pad_add * nd + (nd - 1)) * na
            pad_mult *= nd * na

        k_g = self.goal_bonus
        k_r = self.step_penalty
        k_s = self.crossing_penalty
        w = self.social_weight
        alpha = self.alpha
        gamma = self.gamma
        task_greedy = self.task_greedy_bootstrap
        qt = self.q_task
        qs = self.q_social
        qt_get = qt.get
        qs_get = qs.get

        def key_and_dist(x: int, y: int, h: int):
            ha = _ANGLE[h]
            dx = gx - x
            dy = gy - y
            if dx == 0 and dy == 0:
                d_goal = 0.0
                key = 0
            else:
                d_goal = sqrt(dx * dx + dy * dy)
                b = atan2(dy, dx) - ha
                while b <= -pi:
                    b += _TWO_PI
                while b > pi:
                    b -= _TWO_PI
                di = int(floor((d_goal if d_goal < cap else cap) / bin_size))
                si = int(floor((b + half) / sector)) % na
                key = di * na + si
            for i in range(n_people):
                dx = people_x[i] - x
                dy = people_y[i] - y
                if dx == 0 and dy == 0:
                    key = (key * nd) * na
                    continue
                d = sqrt(dx * dx + dy * dy)
                b = atan2(dy, dx) - ha
                while b <= -pi:
                    b += _TWO_PI
                while b > pi:
                    b -= _TWO_PI
                di = int(floor((d if d < cap else cap) / bin_size))
                si = int(floor((b + half) / sector)) % na
                key = (key * nd + di) * na + si
            return key * pad_mult + pad_add, d_goal

        state = rng_state
        x, y, h = start_x, start_y, start_h
        steps = 0
        task_return = 0.0
        crossings = 0
        reached = x == gx and y == gy
        if reached:
            return state, steps, task_return, True, crossings
        key, d_prev = key_and_dist(x, y, h)

        while steps < max_steps:
            # -- epsilon-greedy action from the task table ----------------
            state = (state + 0x9E3779B97F4A7C15) & _MASK64
            z = state
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            u = ((z ^ (z >> 31)) >> 11) * 2.0**-53
            if u < epsilon:
                state = (state + 0x9E3779B97F4A7C15) & _MASK64
                z = state
                z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
                z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
                action = (z ^ (z >> 31)) % 4
            else:
                base = key * 4
                action = 0
                best = qt_get(base, 0.0)
                for a in (1, 2, 3):
                    v = qt_get(base + a, 0.0)
                    if v > best:
                        best = v
                        action = a

            # -- apply the action -----------------------------------------
            nx, ny, nh = x, y, h
            if action == 0 or action == 1:
                sign = 1 if action == 0 else -1
                tx = x + sign * _DX[h]
                ty = y + sign * _DY[h]
                if 0 <= tx < width and 0 <= ty < height and not obst[ty * width + tx]:
                    nx, ny = tx, ty
            elif action == 2:
                nh = (h + 3) % 4
            else:
                nh = (h + 1) % 4

            key2, d_now = key_and_dist(nx, ny, nh)
            reached = nx == gx and ny == gy
            crossing = action <= 1 and vobs[ny * width + nx]
            if crossing:
                crossings += 1
            r_social = -k_s if crossing else 0.0
            r_nav = k_g if reached else d_prev - d_now - k_r
            r_task = r_nav + w * r_social
            task_return += r_task

            # -- dual one-step updates ------------------------------------
            if reached:
                boot_task = 0.0
                boot_social = 0.0
            else:
                base2 = key2 * 4
                a_star = 0
                boot_task = qt_get(base2, 0.0)
                for a in (1, 2, 3):
                    v = qt_get(base2 + a, 0.0)
                    if v > boot_task:
                        boot_task = v
                        a_star = a
                if task_greedy:
                    boot_social = qs_get(base2 + a_star, 0.0)
                else:
                    boot_social = qs_get(base2, 0.0)
                    for a in (1, 2, 3):
                        v = qs_get(base2 + a, 0.0)
                        if v > boot_social:
                            boot_social = v

            slot = key * 4 + action
            old = qt_get(slot, 0.0)
            qt[slot] = old + alpha * (r_task + gamma * boot_task - old)
            if learn_social:
                old = qs_get(slot, 0.0)
                qs[slot] = old + alpha * (r_social + gamma * boot_social - old)

            steps += 1
            x, y, h = nx, ny, nh
            key, d_prev = key2, d_now
            if reached:
                break

        return state, steps, task_return, bool(reached), crossings
