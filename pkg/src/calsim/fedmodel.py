"""Static model of a federation and the analyses derived from its structure.

A federation is a set of federates (ports, actions, an ordered reaction
list) joined by connections. Two port-level relations are derived from it:

* the counterfactual cause graph: an output can occur only because some
  specific trigger occurred, following reaction signatures, logical-action
  minimum delays, and connection delays;
* the influence graph: a superset that also includes same-federate state
  coupling, where a trigger of an earlier reaction can influence effects of
  later reactions at the same tag, and effects of earlier reactions only at
  strictly larger tags.

On top of these sit the minimum logical-delay matrix used by the
centralized coordinator and the safe-to-advance / safe-to-assume-absent
offset derivation used by the decentralized one. The offset derivation only
claims to handle the class of programs where every network input is fed by
counterfactual chains rooted at physical actions; anything else is reported
as unsupported rather than guessed at.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .maxplus import MaxPlusMatrix
from .timekit import INF, NEG_INF, format_interval, interval_add, interval_sub

STARTUP = "startup"


class Mode(enum.Enum):
    CENTRALIZED = "centralized"
    DECENTRALIZED = "decentralized"


class ConnKind(enum.Enum):
    LOGICAL = "logical"
    PHYSICAL = "physical"


class ActionKind(enum.Enum):
    LOGICAL = "logical"
    PHYSICAL = "physical"


class SpacingPolicy(enum.Enum):
    DROP = "drop"
    REPLACE = "replace"
    DEFER = "defer"


class SpecError(ValueError):
    """The federation specification is malformed."""


class UnsupportedTopologyError(ValueError):
    """The program lies outside the analyzable class for offset derivation."""


class UnsatisfiableStaError(ValueError):
    """The safe-to-advance constraint system has a positive cycle."""

    def __init__(self, cycle: tuple[str, ...]):
        self.cycle = cycle
        path = " -> ".join(cycle + cycle[:1])
        super().__init__(
            f"unsatisfiable safe-to-advance constraints on cycle {path}; "
            "splitting the federates on this cycle may make it satisfiable"
        )


@dataclass(frozen=True)
class ActionSpec:
    name: str
    kind: ActionKind
    min_delay: int = 0
    min_spacing: int = 0
    policy: SpacingPolicy = SpacingPolicy.DEFER

    def __post_init__(self) -> None:
        if self.min_delay < 0:
            raise SpecError(f"action {self.name}: negative min_delay")
        if self.min_spacing < 0:
            raise SpecError(f"action {self.name}: negative min_spacing")


@dataclass(frozen=True)
class ReactionSpec:
    """One reaction: triggers, effects, and a behavior-library binding.

    ``behavior`` names a function in the scenario behavior library; target
    language code is out of scope, so bodies are data. ``fault_behavior``
    names the handler invoked when a network trigger arrives tardy.
    """

    name: str
    triggers: tuple[str, ...]
    effects: tuple[str, ...] = ()
    behavior: str = "noop"
    deadline: int | None = None
    deadline_behavior: str | None = None
    fault_behavior: str | None = None

    def __post_init__(self) -> None:
        overlap = set(self.triggers) & set(self.effects)
        if overlap:
            raise SpecError(f"reaction {self.name}: effects overlap triggers: {overlap}")


@dataclass
class FederateSpec:
    """A federate: ports, actions, and reactions in declaration order."""

    name: str
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    internals: tuple[str, ...] = ()
    actions: tuple[ActionSpec, ...] = ()
    reactions: tuple[ReactionSpec, ...] = ()
    sta: int = 0
    staa: dict[str, int] = field(default_factory=dict)
    host: str | None = None
    behavior_params: dict = field(default_factory=dict)

    def action(self, name: str) -> ActionSpec:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(f"{self.name}: no action {name!r}")

    def has_physical_action(self) -> bool:
        return any(a.kind is ActionKind.PHYSICAL for a in self.actions)

    def validate(self) -> None:
        names = list(self.inputs) + list(self.outputs) + list(self.internals) + [
            a.name for a in self.actions
        ]
        if len(names) != len(set(names)):
            raise SpecError(f"federate {self.name}: duplicate port/action names")
        declared = set(names) | {STARTUP}
        writable = set(self.outputs) | set(self.internals) | {a.name for a in self.actions}
        written: set[str] = set()
        readable_now = set(self.inputs) | {a.name for a in self.actions} | {STARTUP}
        for r in self.reactions:
            for t in r.triggers:
                if t not in declared:
                    raise SpecError(f"{self.name}.{r.name}: unknown trigger {t!r}")
                if t in self.internals and t not in written:
                    raise SpecError(
                        f"{self.name}.{r.name}: internal port {t!r} read before "
                        "any earlier reaction can write it"
                    )
                if t in self.outputs:
                    raise SpecError(f"{self.name}.{r.name}: cannot trigger on output {t!r}")
            for e in r.effects:
                if e not in writable:
                    raise SpecError(f"{self.name}.{r.name}: unknown effect {e!r}")
                act = next((a for a in self.actions if a.name == e), None)
                if act is not None and act.kind is ActionKind.PHYSICAL:
                    raise SpecError(
                        f"{self.name}.{r.name}: physical action {e!r} can only be "
                        "scheduled from outside the program"
                    )
                written.add(e)
        if self.sta < 0:
            raise SpecError(f"federate {self.name}: negative STA")
        for port, v in self.staa.items():
            if port not in self.inputs:
                raise SpecError(f"federate {self.name}: STAA for unknown input {port!r}")
            if v < 0:
                raise SpecError(f"federate {self.name}: negative STAA for {port!r}")
        _ = readable_now  # ordering of action reads is unconstrained


@dataclass(frozen=True)
class Connection:
    src_federate: str
    src_port: str
    dst_federate: str
    dst_port: str
    kind: ConnKind = ConnKind.LOGICAL
    after: int = 0

    def __post_init__(self) -> None:
        if self.after < 0:
            raise SpecError("connection: negative after delay")
        if self.kind is ConnKind.PHYSICAL and self.after != 0:
            raise SpecError("physical connections cannot carry an after delay")

    @property
    def channel(self) -> str:
        return f"{self.src_federate}.{self.src_port}->{self.dst_federate}.{self.dst_port}"


@dataclass
class FederationSpec:
    name: str
    federates: tuple[FederateSpec, ...]
    connections: tuple[Connection, ...]
    mode: Mode = Mode.CENTRALIZED

    def federate(self, name: str) -> FederateSpec:
        for f in self.federates:
            if f.name == name:
                return f
        raise KeyError(f"no federate {name!r}")

    def federate_names(self) -> list[str]:
        return [f.name for f in self.federates]

    def incoming(self, fed: str, port: str) -> Connection | None:
        for c in self.connections:
            if c.dst_federate == fed and c.dst_port == port:
                return c
        return None

    def validate(self) -> None:
        names = self.federate_names()
        if len(names) != len(set(names)):
            raise SpecError("duplicate federate names")
        for f in self.federates:
            f.validate()
        seen_dst: set[tuple[str, str]] = set()
        for c in self.connections:
            src = self.federate(c.src_federate)
            dst = self.federate(c.dst_federate)
            if c.src_port not in src.outputs:
                raise SpecError(f"connection from unknown output {c.src_federate}.{c.src_port}")
            if c.dst_port not in dst.inputs:
                raise SpecError(f"connection to unknown input {c.dst_federate}.{c.dst_port}")
            key = (c.dst_federate, c.dst_port)
            if key in seen_dst:
                raise SpecError(f"input {key} has more than one incoming connection")
            seen_dst.add(key)


# --- causality analyses -------------------------------------------------

Node = tuple[str, str]  # (federate, port-or-action)


@dataclass(frozen=True)
class CauseEdge:
    src: Node
    dst: Node
    delay: int


@dataclass
class CauseGraph:
    """Port-level counterfactual causality with minimum logical delays."""

    nodes: list[Node]
    edges: list[CauseEdge]

    def out_edges(self, node: Node) -> list[CauseEdge]:
        return [e for e in self.edges if e.src == node]

    def has_edge(self, src: Node, dst: Node) -> bool:
        return any(e.src == src and e.dst == dst for e in self.edges)

    def min_delays_from(self, src: Node) -> dict[Node, int]:
        """Single-source minimum path delays (all edge delays are >= 0)."""
        import heapq

        dist: dict[Node, int] = {src: 0}
        heap: list[tuple[int, Node]] = [(0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, INF):
                continue
            for e in self.edges:
                if e.src != u:
                    continue
                nd = interval_add(d, e.delay)
                if nd < dist.get(e.dst, INF):
                    dist[e.dst] = nd
                    heapq.heappush(heap, (nd, e.dst))
        return dist


def counterfactual_cause_graph(spec: FederationSpec) -> CauseGraph:
    """Edges only where an event cannot occur without its trigger.

    A reaction contributes trigger->effect edges at delay 0 (or the action's
    minimum delay when the effect is a logical action). Logical connections
    contribute edges at their after delay. Physical connections assign a
    fresh tag at the receiver, so they sever logical-time causality and
    contribute no edge.
    """
    nodes: list[Node] = []
    edges: list[CauseEdge] = []
    for f in spec.federates:
        for p in list(f.inputs) + list(f.outputs) + list(f.internals):
            nodes.append((f.name, p))
        for a in f.actions:
            nodes.append((f.name, a.name))
        for r in f.reactions:
            for t in r.triggers:
                if t == STARTUP:
                    continue
                for e in r.effects:
                    act = next((a for a in f.actions if a.name == e), None)
                    delay = act.min_delay if act is not None else 0
                    edges.append(CauseEdge((f.name, t), (f.name, e), delay))
    for c in spec.connections:
        if c.kind is ConnKind.LOGICAL:
            edges.append(
                CauseEdge((c.src_federate, c.src_port), (c.dst_federate, c.dst_port), c.after)
            )
    return CauseGraph(nodes, edges)


@dataclass(frozen=True)
class InfluenceEdge:
    src: Node
    dst: Node
    delay: int
    strict: bool  # True: only tags strictly larger than the trigger's


@dataclass
class InfluenceGraph:
    nodes: list[Node]
    edges: list[InfluenceEdge]

    def has_edge(self, src: Node, dst: Node) -> bool:
        return any(e.src == src and e.dst == dst for e in self.edges)


def influence_graph(spec: FederationSpec) -> InfluenceGraph:
    """Causal influence: counterfactual edges plus state coupling.

    Within a federate, a trigger of reaction k can influence effects of any
    reaction k' >= k at the same tag (reaction k runs first and may change
    state reaction k' reads), and effects of reactions k' < k only at
    strictly larger tags.
    """
    base = counterfactual_cause_graph(spec)
    edges = [InfluenceEdge(e.src, e.dst, e.delay, strict=False) for e in base.edges]
    seen = {(e.src, e.dst) for e in edges}
    for f in spec.federates:
        for ki, rk in enumerate(f.reactions):
            for kj, rj in enumerate(f.reactions):
                strict = kj < ki
                for t in rk.triggers:
                    if t == STARTUP:
                        continue
                    for e in rj.effects:
                        key = ((f.name, t), (f.name, e))
                        if key in seen:
                            continue
                        seen.add(key)
                        edges.append(InfluenceEdge(key[0], key[1], 0, strict=strict))
    return InfluenceGraph(base.nodes, edges)


def logical_delay_matrix(spec: FederationSpec) -> MaxPlusMatrix:
    """D[i][j]: minimum logical delay of any counterfactual path j -> i.

    The entry is infinity when federate j cannot reach a network input of
    federate i at all.
    """
    graph = counterfactual_cause_graph(spec)
    names = spec.federate_names()
    index = {n: k for k, n in enumerate(names)}
    n = len(names)
    d = [[INF] * n for _ in range(n)]
    targets: dict[str, list[Node]] = {f.name: [(f.name, p) for p in f.inputs] for f in spec.federates}
    for f in spec.federates:
        sources = [(f.name, p) for p in list(f.inputs) + list(f.internals)]
        sources += [(f.name, a.name) for a in f.actions]
        j = index[f.name]
        for src in sources:
            dist = graph.min_delays_from(src)
            for g in spec.federates:
                i = index[g.name]
                for t in targets[g.name]:
                    if t in dist and dist[t] < d[i][j]:
                        d[i][j] = dist[t]
    return MaxPlusMatrix.from_rows(d)


# --- STA / STAA derivation ----------------------------------------------

@dataclass(frozen=True)
class OffsetAssignment:
    """Derived decentralized-coordination offsets."""

    sta: dict[str, int]
    staa: dict[tuple[str, str], int]

    def format_table(self) -> str:
        lines = ["federate  STA"]
        for fed, v in self.sta.items():
            lines.append(f"{fed}  {format_interval(v)}")
        lines.append("port  STAA")
        for (fed, port), v in self.staa.items():
            lines.append(f"{fed}.{port}  {format_interval(v)}")
        return "\n".join(lines)


class _Bounds:
    """Pairwise latency/clock-error bound lookup with a 0 default."""

    def __init__(self, spec: FederationSpec, latency: MaxPlusMatrix | None,
                 clock_error: MaxPlusMatrix | None):
        self.index = {name: k for k, name in enumerate(spec.federate_names())}
        self.latency = latency
        self.clock_error = clock_error

    def link_lag(self, dst: str, src: str) -> int:
        i, j = self.index[dst], self.index[src]
        lag = 0
        if self.latency is not None:
            lag = interval_add(lag, self.latency.rows[i][j])
        if self.clock_error is not None:
            lag = interval_add(lag, self.clock_error.rows[i][j])
        return lag


def _port_roots(spec: FederationSpec, graph: CauseGraph) -> dict[Node, set[Node]]:
    """For every node, the physical-action nodes its events trace back to."""
    phys: set[Node] = set()
    for f in spec.federates:
        for a in f.actions:
            if a.kind is ActionKind.PHYSICAL:
                phys.add((f.name, a.name))
    # reverse reachability from each physical action
    roots: dict[Node, set[Node]] = {n: set() for n in graph.nodes}
    for p in phys:
        stack = [p]
        seen = {p}
        roots[p].add(p)
        while stack:
            u = stack.pop()
            for e in graph.edges:
                if e.src == u and e.dst not in seen:
                    seen.add(e.dst)
                    roots.setdefault(e.dst, set()).add(p)
                    stack.append(e.dst)
    return roots


def derive_offsets(
    spec: FederationSpec,
    latency_bounds: MaxPlusMatrix | None = None,
    clock_error_bounds: MaxPlusMatrix | None = None,
    exec_bounds: dict[tuple[str, str], int] | None = None,
) -> OffsetAssignment:
    """Smallest nonnegative STA/STAA offsets for the supported topologies.

    The derivation computes, for every network input port, a worst-case
    arrival lag: how late (in physical time, relative to the timestamp of
    the tag carried) a message on that port can be, assuming every federate
    releases outputs as soon as its own gates allow. Ports whose events are
    counterfactually rooted only in the owning federate's physical actions
    impose no safe-to-advance constraint (the tag barrier covers them);
    every other port requires STA to cover its arrival lag. The remaining
    slack per port becomes its STAA.

    Positive cycles in the STA constraint system mean no finite assignment
    exists and raise :class:`UnsatisfiableStaError` naming the federate
    cycle. Structures whose port-lag recursion does not settle are reported
    as :class:`UnsupportedTopologyError`.
    """
    if spec.mode is not Mode.DECENTRALIZED:
        raise SpecError("offset derivation applies to decentralized mode only")
    spec.validate()
    graph = counterfactual_cause_graph(spec)
    bounds = _Bounds(spec, latency_bounds, clock_error_bounds)
    exec_bounds = exec_bounds or {}
    roots = _port_roots(spec, graph)

    own_actions: dict[str, set[Node]] = {
        f.name: {(f.name, a.name) for a in f.actions if a.kind is ActionKind.PHYSICAL}
        for f in spec.federates
    }

    def exec_cost(fed: str, upto_idx: int) -> int:
        f = spec.federate(fed)
        total = 0
        for k in range(upto_idx + 1):
            total = interval_add(total, exec_bounds.get((fed, f.reactions[k].name), 0))
        return total

    sta: dict[str, int] = {f.name: 0 for f in spec.federates}
    staa: dict[tuple[str, str], int] = {}
    for f in spec.federates:
        for p in f.inputs:
            staa[(f.name, p)] = 0

    def gate_lag(fed: str, reaction_idx: int) -> int:
        """Worst-case invocation lag of a reaction relative to its tag."""
        f = spec.federate(fed)
        lag = sta[fed]
        worst_staa = 0
        for k in range(reaction_idx + 1):
            for t in f.reactions[k].triggers:
                if t in f.inputs:
                    worst_staa = max(worst_staa, staa[(fed, t)])
        return interval_add(interval_add(lag, worst_staa), exec_cost(fed, reaction_idx))

    def release_lag(fed: str, port: str) -> int:
        """Worst-case lag of an output or internal-port event vs its tag."""
        f = spec.federate(fed)
        lag = NEG_INF
        for idx, r in enumerate(f.reactions):
            if port in r.effects:
                lag = max(lag, gate_lag(fed, idx))
        return lag

    def arrival_lag(fed: str, port: str) -> int:
        conn = spec.incoming(fed, port)
        if conn is None or conn.kind is ConnKind.PHYSICAL:
            return NEG_INF  # nothing constrains this port in logical time
        rel = release_lag(conn.src_federate, conn.src_port)
        if rel == NEG_INF:
            return NEG_INF
        lag = interval_add(rel, bounds.link_lag(fed, conn.src_federate))
        return interval_sub(lag, conn.after)

    def upstream_of(fed: str, port: str) -> str | None:
        conn = spec.incoming(fed, port)
        if conn is None or conn.kind is ConnKind.PHYSICAL:
            return None
        return conn.src_federate

    # STA constraint edges: port p of fed i fed by k imposes
    #   sta[i] >= arrival_lag(p), which expands to sta[k] + (other terms).
    # Iterate to a joint fixed point of STA and STAA; detect positive cycles
    # by failure to settle within a generous round budget.
    constrained_ports: dict[str, list[str]] = {}
    for f in spec.federates:
        plist = []
        for p in f.inputs:
            conn = spec.incoming(f.name, p)
            if conn is None or conn.kind is ConnKind.PHYSICAL:
                continue
            r = roots.get((f.name, p), set())
            if not r:
                continue  # not reachable from any physical action
            if r <= own_actions[f.name]:
                continue  # self-rooted: the per-tag barrier covers it
            plist.append(p)
        constrained_ports[f.name] = plist

    n = len(spec.federates)
    max_rounds = max(4, n * n + 4)
    for round_no in range(max_rounds + 1):
        changed = False
        growing: set[str] = set()
        for f in spec.federates:
            want = 0
            for p in constrained_ports[f.name]:
                want = max(want, arrival_lag(f.name, p))
            if want > sta[f.name]:
                sta[f.name] = want
                changed = True
                growing.add(f.name)
        for f in spec.federates:
            for p in f.inputs:
                lag = arrival_lag(f.name, p)
                want = max(0, interval_sub(lag, sta[f.name])) if lag != NEG_INF else 0
                if want != staa[(f.name, p)]:
                    staa[(f.name, p)] = want
                    changed = True
        if not changed:
            break
        if round_no == max_rounds:
            cycle = _find_sta_cycle(spec, constrained_ports, upstream_of, growing)
            if cycle:
                raise UnsatisfiableStaError(cycle)
            raise UnsupportedTopologyError(
                "offset recursion did not settle; topology outside the supported class"
            )

    return OffsetAssignment(sta=sta, staa=staa)


def _find_sta_cycle(
    spec: FederationSpec,
    constrained_ports: dict[str, list[str]],
    upstream_of,
    growing: set[str] | None = None,
) -> tuple[str, ...]:
    """Locate a federate cycle among the STA constraint edges.

    When the set of federates whose STA was still growing at the iteration
    budget is known, the search is restricted to it so the witness is a
    genuinely unsatisfiable cycle.
    """
    adj: dict[str, list[str]] = {f.name: [] for f in spec.federates}
    for f in spec.federates:
        if growing and f.name not in growing:
            continue
        for p in constrained_ports[f.name]:
            k = upstream_of(f.name, p)
            if k is not None and (not growing or k in growing):
                adj[f.name].append(k)
    color: dict[str, int] = {}
    stack: list[str] = []

    def dfs(u: str) -> tuple[str, ...] | None:
        color[u] = 1
        stack.append(u)
        for v in adj[u]:
            if color.get(v, 0) == 1:
                i = stack.index(v)
                return tuple(stack[i:])
            if color.get(v, 0) == 0:
                got = dfs(v)
                if got:
                    return got
        color[u] = 2
        stack.pop()
        return None

    for f in spec.federates:
        if color.get(f.name, 0) == 0:
            got = dfs(f.name)
            if got:
                return got
    return ()


def zero_delay_sccs(spec: FederationSpec) -> list[set[str]]:
    """Nontrivial strongly connected components of the zero-delay graph.

    Federates on such a cycle can block each other at a single tag, which
    is what provisional grants exist to resolve.
    """
    d = logical_delay_matrix(spec)
    names = spec.federate_names()
    n = len(names)
    adj = {
        names[j]: [names[i] for i in range(n) if d.rows[i][j] == 0]
        for j in range(n)
    }
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    onstack: set[str] = set()
    stack: list[str] = []
    out: list[set[str]] = []
    counter = [0]

    def strongconnect(v: str) -> None:
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        onstack.add(v)
        for w in adj[v]:
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in onstack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp: set[str] = set()
            while True:
                w = stack.pop()
                onstack.discard(w)
                comp.add(w)
                if w == v:
                    break
            if len(comp) > 1 or v in adj[v]:
                out.append(comp)

    for name in names:
        if name not in index:
            strongconnect(name)
    return out
