# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled training kernel; drop-in replacement for ``hplsv._pure``.

Mirrors the pure-Python loop operation-for-operation: same SplitMix64
stream, same IEEE arithmetic order, so trained tables are bit-identical
across backends. Keep changes in lockstep with ``_pure.py``.
"""

from cython.operator cimport dereference

from libc.math cimport atan2, floor, sqrt, M_PI
from libc.stdint cimport int64_t, uint64_t
from libcpp.unordered_map cimport unordered_map

ctypedef unordered_map[int64_t, double] QMap

cdef double TWO_PI = 2.0 * M_PI
cdef double INV_2_53 = 2.0 ** -53

cdef int[4] DX = [0, 1, 0, -1]
cdef int[4] DY = [1, 0, -1, 0]
cdef double[4] ANGLE = [M_PI / 2.0, 0.0, -M_PI / 2.0, M_PI]

cdef int MAX_PEOPLE = 8


cdef inline double map_get(QMap& m, int64_t key) nogil:
    cdef QMap.iterator it = m.find(key)
    if it == m.end():
        return 0.0
    return dereference(it).second


cdef class TrainerKernel:
    """Owns both Q tables and runs one training episode at a time."""

    cdef QMap q_task
    cdef QMap q_social
    cdef double dist_bin_size, dist_cap, goal_bonus, step_penalty
    cdef double crossing_penalty, social_weight, alpha, gamma
    cdef int angle_bins, person_slots, dist_bins
    cdef bint task_greedy_bootstrap

    def __init__(
        self,
        double dist_bin_size,
        double dist_cap,
        int angle_bins,
        int person_slots,
        double goal_bonus,
        double step_penalty,
        double crossing_penalty,
        double social_weight,
        double alpha,
        double gamma,
        bint task_greedy_bootstrap,
    ):
        self.dist_bin_size = dist_bin_size
        self.dist_cap = dist_cap
        self.angle_bins = angle_bins
        self.person_slots = person_slots
        self.dist_bins = <int>floor(dist_cap / dist_bin_size) + 1
        self.goal_bonus = goal_bonus
        self.step_penalty = step_penalty
        self.crossing_penalty = crossing_penalty
        self.social_weight = social_weight
        self.alpha = alpha
        self.gamma = gamma
        self.task_greedy_bootstrap = task_greedy_bootstrap

    def load_tables(self, dict q_task, dict q_social):
        cdef int64_t k
        cdef double v
        self.q_task.clear()
        self.q_social.clear()
        for k, v in q_task.items():
            self.q_task[k] = v
        for k, v in q_social.items():
            self.q_social[k] = v

    def export_tables(self):
        # Exact zeros are indistinguishable from absent entries (lookups
        # default to 0), so strip them for a canonical table.
        cdef dict qt = {}
        cdef dict qs = {}
        for item in self.q_task:
            if item.second != 0.0:
                qt[item.first] = item.second
        for item in self.q_social:
            if item.second != 0.0:
                qs[item.first] = item.second
        return qt, qs

    def run_episode(
        self,
        scn,
        int start_x,
        int start_y,
        int start_h,
        int max_steps,
        double epsilon,
        object rng_state,
        bint learn_social=True,
    ):
        """One epsilon-greedy rollout with per-step dual Q updates.

        Returns (rng_state, steps, task_return, reached, crossings).
        """
        cdef int width = scn.width
        cdef int height = scn.height
        cdef int gx = scn.goal_x
        cdef int gy = scn.goal_y
        cdef const unsigned char[:] obst = scn.obstacles
        cdef const unsigned char[:] vobs = scn.vobstacles
        cdef int n_people = len(scn.people_x)
        cdef int[8] people_x
        cdef int[8] people_y
        if n_people > MAX_PEOPLE:
            raise ValueError("too many people for the compiled kernel")
        cdef int i
        for i in range(n_people):
            people_x[i] = scn.people_x[i]
            people_y[i] = scn.people_y[i]

        cdef int nd = self.dist_bins
        cdef int na = self.angle_bins
        cdef double bin_size = self.dist_bin_size
        cdef double cap = self.dist_cap
        cdef double sector = TWO_PI / na
        cdef double half = sector / 2.0
        cdef int64_t pad_mult = 1
        cdef int64_t pad_add = 0
        for i in range(self.person_slots - n_people):
            pad_add = (pad_add * nd + (nd - 1)) * na
            pad_mult *= nd * na

        cdef double k_g = self.goal_bonus
        cdef double k_r = self.step_penalty
        cdef double k_s = self.crossing_penalty
        cdef double w = self.social_weight
        cdef double alpha = self.alpha
        cdef double gamma = self.gamma
        cdef bint task_greedy = self.task_greedy_bootstrap

        cdef uint64_t state = <uint64_t>(<object>rng_state)
        cdef uint64_t z
        cdef double u
        cdef int x = start_x, y = start_y, h = start_h
        cdef int steps = 0
        cdef double task_return = 0.0
        cdef int crossings = 0
        cdef bint reached = x == gx and y == gy
        cdef int64_t key, key2, base2, slot
        cdef double d_prev, d_now
        cdef int action, a, nx, ny, nh, tx, ty, sign
        cdef bint crossing
        cdef double r_social, r_nav, r_task, boot_task, boot_social, best, v, old
        cdef int a_star

        if reached:
            return rng_state, steps, task_return, True, crossings
        key = self._key_and_dist(x, y, h, gx, gy, people_x, people_y, n_people,
                                 nd, na, bin_size, cap, sector, half,
                                 pad_mult, pad_add, &d_prev)

        while steps < max_steps:
            # -- epsilon-greedy action from the task table ----------------
            state = state + <uint64_t>0x9E3779B97F4A7C15
            z = state
            z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
            z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
            u = <double>((z ^ (z >> 31)) >> 11) * INV_2_53
            if u < epsilon:
                state = state + <uint64_t>0x9E3779B97F4A7C15
                z = state
                z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
                z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
                action = <int>((z ^ (z >> 31)) % 4)
            else:
                action = 0
                best = map_get(self.q_task, key * 4)
                for a in range(1, 4):
                    v = map_get(self.q_task, key * 4 + a)
                    if v > best:
                        best = v
                        action = a

            # -- apply the action -----------------------------------------
            nx = x
            ny = y
            nh = h
            if action == 0 or action == 1:
                sign = 1 if action == 0 else -1
                tx = x + sign * DX[h]
                ty = y + sign * DY[h]
                if 0 <= tx < width and 0 <= ty < height and not obst[ty * width + tx]:
                    nx = tx
                    ny = ty
            elif action == 2:
                nh = (h + 3) % 4
            else:
                nh = (h + 1) % 4

            key2 = self._key_and_dist(nx, ny, nh, gx, gy, people_x, people_y,
                                      n_people, nd, na, bin_size, cap, sector,
                                      half, pad_mult, pad_add, &d_now)
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
                boot_task = map_get(self.q_task, base2)
                for a in range(1, 4):
                    v = map_get(self.q_task, base2 + a)
                    if v > boot_task:
                        boot_task = v
                        a_star = a
                if task_greedy:
                    boot_social = map_get(self.q_social, base2 + a_star)
                else:
                    boot_social = map_get(self.q_social, base2)
                    for a in range(1, 4):
                        v = map_get(self.q_social, base2 + a)
                        if v > boot_social:
                            boot_social = v

            slot = key * 4 + action
            old = map_get(self.q_task, slot)
            self.q_task[slot] = old + alpha * (r_task + gamma * boot_task - old)
            if learn_social:
                old = map_get(self.q_social, slot)
                self.q_social[slot] = old + alpha * (r_social + gamma * boot_social - old)

            steps += 1
            x = nx
            y = ny
            h = nh
            key = key2
            d_prev = d_now
            if reached:
                break

        return int(state), steps, task_return, bool(reached), crossings

    cdef int64_t _key_and_dist(
        self, int x, int y, int h, int gx, int gy,
        int* people_x, int* people_y, int n_people,
        int nd, int na, double bin_size, double cap,
        double sector, double half,
        int64_t pad_mult, int64_t pad_add, double* d_goal_out,
    ) nogil:
        cdef double ha = ANGLE[h]
        cdef int dx = gx - x
        cdef int dy = gy - y
        cdef double d_goal, d, b
        cdef int64_t key
        cdef int di, si, i
        if dx == 0 and dy == 0:
            d_goal = 0.0
            key = 0
        else:
            d_goal = sqrt(<double>(dx * dx + dy * dy))
            b = atan2(<double>dy, <double>dx) - ha
            while b <= -M_PI:
                b += TWO_PI
            while b > M_PI:
                b -= TWO_PI
            di = <int>floor((d_goal if d_goal < cap else cap) / bin_size)
            si = <int>floor((b + half) / sector) % na
            if si < 0:
                si += na
            key = di * na + si
        for i in range(n_people):
            dx = people_x[i] - x
            dy = people_y[i] - y
            if dx == 0 and dy == 0:
                key = (key * nd) * na
                continue
            d = sqrt(<double>(dx * dx + dy * dy))
            b = atan2(<double>dy, <double>dx) - ha
            while b <= -M_PI:
                b += TWO_PI
            while b > M_PI:
                b -= TWO_PI
            di = <int>floor((d if d < cap else cap) / bin_size)
            si = <int>floor((b + half) / sector) % na
            if si < 0:
                si += na
            key = (key * nd + di) * na + si
        d_goal_out[0] = d_goal
        return key * pad_mult + pad_add
