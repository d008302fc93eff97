"""Two-locus line dynamics: the real coupled pair and its decoupled twin.

Lines carry genealogical material for the tree at locus 0, the tree at
locus u, or both ("double lines").  Single lines coalesce pairwise at
rate 1 (possibly forming doubles), singles coalesce with doubles at
rate 1, and doubles split at rate rho_u.  The processes differ only in
what a pair of double lines does:

* real process: joint coalescence at rate 1 per pair, merging both trees
  in one event (the shared node id is what makes cross-locus distance
  equalities well defined);
* decoupled process: a "ring" at rate 2 per pair that merges the two
  lines in exactly one tree (fair coin), leaving the trees independent.

The coupled sampler drives both from one stream: every ring carries a
fair coin, the decoupled process always acts on it, the real process acts
only on heads.  Ring-free runs are therefore bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rng import RandomSource, UniformStream
from .trees import UltrametricTree


@dataclass(frozen=True)
class AuxGraphResult:
    tree_0: UltrametricTree
    tree_u: UltrametricTree
    event_iv_occurred: bool
    first_event_iv_time: float | None


@dataclass(frozen=True)
class CoupledPairResult:
    real_tree_0: UltrametricTree
    real_tree_u: UltrametricTree
    aux: AuxGraphResult


class _State:
    """Mutable line configuration plus the merge histories of both trees."""

    __slots__ = ("s0", "su", "d", "merges0", "mergesu", "leaves0", "leavesu")

    def __init__(self, a0: int, b0: int, c0: int):
        if a0 < 0 or b0 < 0 or c0 < 0 or a0 + b0 < 1 or c0 + b0 < 1:
            raise ValueError("need non-negative counts with a0+b0 >= 1 and c0+b0 >= 1")
        n0, nu = a0 + b0, c0 + b0
        self.leaves0 = tuple(range(1, n0 + 1))
        self.leavesu = tuple(range(n0 + 1, n0 + nu + 1))
        self.s0 = list(self.leaves0[:a0])
        self.su = list(self.leavesu[:c0])
        self.d = [(self.leaves0[a0 + i], self.leavesu[c0 + i]) for i in range(b0)]
        self.merges0: list = []
        self.mergesu: list = []

    def copy(self) -> "_State":
        out = _State.__new__(_State)
        out.s0 = list(self.s0)
        out.su = list(self.su)
        out.d = list(self.d)
        out.merges0 = list(self.merges0)
        out.mergesu = list(self.mergesu)
        out.leaves0 = self.leaves0
        out.leavesu = self.leavesu
        return out

    def done(self) -> bool:
        return len(self.s0) + len(self.d) == 1 and len(self.su) + len(self.d) == 1

    def trees(self) -> tuple:
        return (
            UltrametricTree(self.leaves0, tuple(self.merges0)),
            UltrametricTree(self.leavesu, tuple(self.mergesu)),
        )


class _Driver:
    """Applies events to a state; node ids come from a shared counter so
    that the same event sequence yields identical trees."""

    def __init__(self, state: _State, us: UniformStream, counter: list):
        self.state = state
        self.us = us
        self.counter = counter

    def _node(self):
        self.counter[0] += 1
        return self.counter[0]

    def rates(self, rho_u: float) -> tuple:
        a, c, b = len(self.state.s0), len(self.state.su), len(self.state.d)
        return (
            a * (a - 1) * 0.5,  # same-side coalescence in tree 0
            c * (c - 1) * 0.5,  # same-side coalescence in tree u
            a * c,  # cross coalescence -> double
            a * b,  # single(0) with double
            c * b,  # single(u) with double
            b * rho_u,  # double splits
            b * (b - 1),  # rings: rate 2 per pair of doubles
        )

    # -- event applications -------------------------------------------------

    def same_side(self, t, side):
        s = self.state.s0 if side == 0 else self.state.su
        merges = self.state.merges0 if side == 0 else self.state.mergesu
        i, j = self.us.pair_index(len(s))
        node = self._node()
        merges.append((t, s[i], s[j], node))
        s[j] = s[-1]
        s.pop()
        s[i] = node

    def cross(self, t):
        st = self.state
        i = self.us.index(len(st.s0))
        j = self.us.index(len(st.su))
        st.d.append((st.s0[i], st.su[j]))
        st.s0[i] = st.s0[-1]
        st.s0.pop()
        st.su[j] = st.su[-1]
        st.su.pop()

    def single_double(self, t, side):
        st = self.state
        s = st.s0 if side == 0 else st.su
        merges = st.merges0 if side == 0 else st.mergesu
        i = self.us.index(len(s))
        j = self.us.index(len(st.d))
        node = self._node()
        c0, cu = st.d[j]
        if side == 0:
            merges.append((t, s[i], c0, node))
            st.d[j] = (node, cu)
        else:
            merges.append((t, s[i], cu, node))
            st.d[j] = (c0, node)
        s[i] = s[-1]
        s.pop()

    def split(self, t):
        st = self.state
        i = self.us.index(len(st.d))
        c0, cu = st.d[i]
        st.d[i] = st.d[-1]
        st.d.pop()
        st.s0.append(c0)
        st.su.append(cu)

    def joint(self, t):
        """Real-process ring on heads: merge both trees in one event."""
        st = self.state
        i, j = self.us.pair_index(len(st.d))
        node = self._node()
        st.merges0.append((t, st.d[i][0], st.d[j][0], node))
        st.mergesu.append((t, st.d[i][1], st.d[j][1], node))
        st.d[i] = (node, node)
        st.d[j] = st.d[-1]
        st.d.pop()

    def ring_decoupled(self, t, side):
        """Decoupled-process ring: merge one side only; the other side's
        two components become a double component and a fresh single."""
        st = self.state
        i, j = self.us.pair_index(len(st.d))
        node = self._node()
        if side == 0:
            st.merges0.append((t, st.d[i][0], st.d[j][0], node))
            st.su.append(st.d[j][1])
            st.d[i] = (node, st.d[i][1])
        else:
            st.mergesu.append((t, st.d[i][1], st.d[j][1], node))
            st.s0.append(st.d[j][0])
            st.d[i] = (st.d[i][0], node)
        st.d[j] = st.d[-1]
        st.d.pop()


def _run(driver: _Driver, rho_u: float, t: float, mode: str) -> tuple:
    """Run a state to completion; returns (ring_fired, first_ring_time)."""
    us = driver.us
    ring_fired = False
    first_ring = None
    st = driver.state
    while not st.done():
        rates = driver.rates(rho_u)
        total = sum(rates)
        t += us.exponential(total)
        x = us.uniform() * total
        k = 0
        while x >= rates[k]:
            x -= rates[k]
            k += 1
        if k == 0:
            driver.same_side(t, 0)
        elif k == 1:
            driver.same_side(t, 1)
        elif k == 2:
            driver.cross(t)
        elif k == 3:
            driver.single_double(t, 0)
        elif k == 4:
            driver.single_double(t, 1)
        elif k == 5:
            driver.split(t)
        else:
            coin = us.uniform() < 0.5
            if not ring_fired:
                ring_fired = True
                first_ring = t
            if mode == "aux":
                driver.ring_decoupled(t, 0 if coin else 1)
            else:  # real: heads acts, tails is a thinned no-op
                if coin:
                    driver.joint(t)
    return ring_fired, first_ring


def sample_aux_graph(
    a0: int, b0: int, c0: int, rho_u: float, rng: RandomSource
) -> AuxGraphResult:
    """Run the decoupled graph from (a0 singles, b0 doubles, c0 singles)
    until both marginal trees are complete."""
    if rho_u < 0:
        raise ValueError("rho_u must be non-negative")
    state = _State(a0, b0, c0)
    driver = _Driver(state, rng.uniforms(), [len(state.leaves0) + len(state.leavesu)])
    fired, first = _run(driver, rho_u, 0.0, "aux")
    tree_0, tree_u = state.trees()
    return AuxGraphResult(tree_0, tree_u, fired, first)


def sample_real_pair(
    a0: int, b0: int, c0: int, rho_u: float, rng: RandomSource
) -> tuple:
    """Real-process pair of trees from an arbitrary line configuration.

    This is the projection of the backward graph onto the material of the
    two loci: identical line dynamics, with joint coalescences at rate 1
    per pair of double lines (thinned rings).
    """
    if rho_u < 0:
        raise ValueError("rho_u must be non-negative")
    state = _State(a0, b0, c0)
    driver = _Driver(state, rng.uniforms(), [len(state.leaves0) + len(state.leavesu)])
    _run(driver, rho_u, 0.0, "real")
    return state.trees()


def sample_coupled_pair(n: int, rho_u: float, rng: RandomSource) -> CoupledPairResult:
    """Drive the real and decoupled processes from (n, 0, n) with shared
    randomness; they stay verbatim-identical until the first ring."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if rho_u < 0:
        raise ValueError("rho_u must be non-negative")
    us = rng.uniforms()
    real = _State(n, 0, n)
    counter = [2 * n]
    driver = _Driver(real, us, counter)
    t = 0.0
    fired = False
    first = None
    aux_result = None

    while not real.done():
        rates = driver.rates(rho_u)
        total = sum(rates)
        t += us.exponential(total)
        x = us.uniform() * total
        k = 0
        while x >= rates[k]:
            x -= rates[k]
            k += 1
        if k == 6:
            # first ring: fork the decoupled twin, then let both evolve
            coin = us.uniform() < 0.5
            fired = True
            first = t
            aux_state = real.copy()
            aux_counter = list(counter)
            aux_driver = _Driver(aux_state, us, aux_counter)
            # shared pair selection and coin for the forking event itself
            pair_u1, pair_u2 = us.uniform(), us.uniform()
            _apply_pair_event(driver, t, coin, pair_u1, pair_u2, real_mode=True)
            _apply_pair_event(aux_driver, t, coin, pair_u1, pair_u2, real_mode=False)
            _run(driver, rho_u, t, "real")
            _run(aux_driver, rho_u, t, "aux")
            aux_t0, aux_tu = aux_state.trees()
            aux_result = AuxGraphResult(aux_t0, aux_tu, True, first)
            break
        if k == 0:
            driver.same_side(t, 0)
        elif k == 1:
            driver.same_side(t, 1)
        elif k == 2:
            driver.cross(t)
        elif k == 3:
            driver.single_double(t, 0)
        elif k == 4:
            driver.single_double(t, 1)
        else:
            driver.split(t)

    real_t0, real_tu = real.trees()
    if aux_result is None:
        # no ring ever fired: the decoupled run is verbatim the real one
        aux_result = AuxGraphResult(real_t0, real_tu, False, None)
    return CoupledPairResult(real_t0, real_tu, aux_result)


def _apply_pair_event(driver, t, coin, u1, u2, real_mode):
    """Apply one ring with pre-drawn pair-selection uniforms and coin."""
    fixed = _FixedUniforms(driver.us, (u1, u2))
    original = driver.us
    driver.us = fixed
    try:
        if real_mode:
            if coin:
                driver.joint(t)
        else:
            driver.ring_decoupled(t, 0 if coin else 1)
    finally:
        driver.us = original


class _FixedUniforms:
    """Replays a fixed batch of uniforms, then defers to the base stream."""

    def __init__(self, base, values):
        self.base = base
        self.values = list(values)

    def uniform(self):
        return self.values.pop(0) if self.values else self.base.uniform()

    def index(self, n):
        return min(int(self.uniform() * n), n - 1)

    def pair_index(self, k):
        i = self.index(k)
        j = self.index(k - 1)
        if j >= i:
            j += 1
        return (i, j) if i < j else (j, i)

    def exponential(self, rate):
        return self.base.exponential(rate)
