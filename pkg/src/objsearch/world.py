"""Simulated office domain and the per-trial search loop.

A square grid holds four quadrant rooms inside a hallway ring. Objects
from a class hierarchy are scattered over the rooms, a knowledge base
seeds room priors, and a planner localizes one target object under
noisy detections, optional human answers, and existence tracking.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .existence import ExistenceTracker
from .fusion import (
    MergeStrategy,
    bayesian_merge,
    redistribute,
    room_marginals,
    weighted_average_merge,
)
from .kb import KnowledgeBase, ObjectHierarchy
from .pomdp import GridModel, ObservationConfig, entropy
from .priors import (
    alpha_vector,
    beta_existence,
    beta_init,
    dirichlet_pdf,
    domain_nonexistence,
)
from .rules import Atom, Constant, Literal, Number, Program, parse_program, serialize_program
from .solver import ground


class WorldError(Exception):
    pass


# argument sorts for grounding the office programs
SIGNATURE = {
    "in": ("object", "room"),
    "is": ("object", "class"),
    "exists": ("class", "room"),
    "subclass": ("class", "class"),
    "holds": (None, "step"),
}

DOMAIN_RULES = """\
holds(exists(C, R), I) :- holds(in(O, R), I), is(O, C).
holds(exists(C1, R), I) :- holds(exists(C2, R), I), subclass(C2, C1).
-holds(in(O, R2), I) :- holds(in(O, R1), I), room(R2), R1 != R2.
holds(in(O, R1), I+1) :- holds(in(O, R1), I), not holds(in(O, R2), I+1),
    room(R2), R1 != R2.
"""


def location_fact(obj: str, room: str, step: int, neg: bool = False) -> Literal:
    atom = Atom("holds", (Atom("in", (Constant(obj), Constant(room))), Number(step)))
    return Literal(atom, neg=neg)


class RoomLayout:
    """Four quadrant rooms inside a hallway ring on a square grid.

    Room ids 0..3 are nw, ne, sw, se; the hallway is always the last
    id. split is the first row/column of the south/east rooms.
    """

    def __init__(self, size: int = 15, split: int = 7, room_names=None,
                 hallway: str = "hallway"):
        if size < 5 or not 2 <= split <= size - 3:
            raise WorldError("grid too small for four rooms in a hallway ring")
        names = list(room_names) if room_names else ["room_nw", "room_ne", "room_sw", "room_se"]
        if len(names) != 4:
            raise WorldError("expected exactly four quadrant rooms")
        self.size = size
        self.split = split
        self.hallway_id = 4
        self.room_names = names + [hallway]
        ids = np.full((size, size), self.hallway_id, dtype=int)
        for r in range(1, size - 1):
            for c in range(1, size - 1):
                ids[r, c] = (0 if r < split else 2) + (0 if c < split else 1)
        self.room_ids = ids.ravel()
        rows, cols = np.divmod(np.arange(size * size), size)
        self.coords = np.column_stack([rows, cols]).astype(float)
        self.room_cells = self.room_ids != self.hallway_id

    @property
    def n_cells(self) -> int:
        return self.size * self.size

    def cell(self, row: int, col: int) -> int:
        return row * self.size + col

    def cells_of(self, room_id: int) -> np.ndarray:
        return np.flatnonzero(self.room_ids == room_id)

    def room_of(self, cell: int) -> str:
        return self.room_names[self.room_ids[cell]]

    def room_id(self, name: str) -> int:
        return self.room_names.index(name)


def build_hierarchy(branches: dict, instances_per_class: int,
                    root: str = "equipment") -> ObjectHierarchy:
    """Two-level tree from branch -> leaf-class lists, instances numbered."""
    parent = {}
    instances = {}
    for branch, leaves in branches.items():
        parent[branch] = root
        for leaf in leaves:
            parent[leaf] = branch
            instances[leaf] = [f"{leaf}{i}" for i in range(1, instances_per_class + 1)]
    return ObjectHierarchy(parent, instances)


def build_domain_program(hierarchy: ObjectHierarchy, room_names) -> Program:
    """Sorts, taxonomy facts, and the location rules as one program."""
    lines = [f"room({name})." for name in room_names]
    classes = sorted(set(hierarchy.parent) | set(hierarchy.parent.values()))
    lines += [f"class({c})." for c in classes]
    objects = sorted(o for objs in hierarchy.instances.values() for o in objs)
    lines += [f"object({o})." for o in objects]
    lines.append("step(1..2).")
    for cls in sorted(hierarchy.parent):
        lines.append(f"subclass({cls}, {hierarchy.parent[cls]}).")
    for cls in sorted(hierarchy.instances):
        for obj in hierarchy.instances[cls]:
            lines.append(f"is({obj}, {cls}).")
    lines.append(DOMAIN_RULES)
    return parse_program("\n".join(lines))


@dataclass(frozen=True)
class HumanModel:
    appear: float = 0.5
    correct: float = 0.8
    unknown: float = 0.15
    incorrect: float = 0.05

    def __post_init__(self):
        probs = (self.appear, self.correct, self.unknown, self.incorrect)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise WorldError("human model probabilities must be in [0, 1]")
        if abs(self.correct + self.unknown + self.incorrect - 1.0) > 1e-9:
            raise WorldError("answer probabilities must sum to 1")


class Scenario:
    """Everything fixed across the trials of one experiment.

    The rule program is ground once here and shared by every trial's
    knowledge base.
    """

    def __init__(self, name, layout, program, observation, thresholds,
                 time_limit, human, merge_strategy, merge_trust,
                 accessible=None, travel_cost=False, raw=None):
        self.name = name
        self.layout = layout
        self.program = program
        self.hierarchy = ObjectHierarchy.from_program(program)
        self.observation = observation
        self.model = GridModel(layout.coords, layout.room_ids, observation)
        self.localize_threshold = thresholds.get("localize", 0.8)
        self.theta_absent = thresholds.get("absent", 0.9)
        self.assert_threshold = thresholds.get("assert_detection", 0.9)
        self.entropy_gate = thresholds.get("entropy_gate", 4.0)
        self.time_limit = time_limit
        self.human = human
        self.merge_strategy = merge_strategy
        self.merge_trust = merge_trust
        self.accessible = tuple(accessible) if accessible else (True,) * 5
        self.travel_cost = travel_cost
        self.raw = raw or {}
        self.ground_program = ground(program, SIGNATURE)

    def with_observation(self, **params) -> "Scenario":
        """Clone with sensor parameters swapped out.

        Comparison suites use this to stress the sensor without touching
        the domain program or thresholds.
        """
        obs = dataclasses.replace(self.observation, **params)
        thresholds = {
            "localize": self.localize_threshold,
            "absent": self.theta_absent,
            "assert_detection": self.assert_threshold,
            "entropy_gate": self.entropy_gate,
        }
        return Scenario(self.name, self.layout, self.program, obs, thresholds,
                        self.time_limit, self.human, self.merge_strategy,
                        self.merge_trust, accessible=self.accessible,
                        travel_cost=self.travel_cost, raw=self.raw)

    @classmethod
    def from_dict(cls, cfg: dict, base_dir: Path | None = None) -> "Scenario":
        try:
            grid = cfg.get("grid", {})
            layout = RoomLayout(
                size=grid.get("size", 15),
                split=grid.get("split", 7),
                room_names=cfg.get("rooms", {}).get("names"),
                hallway=cfg.get("rooms", {}).get("hallway", "hallway"),
            )
            if "kb" in cfg:
                path = Path(cfg["kb"])
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                program = parse_program(path.read_text(encoding="utf-8"))
            else:
                hierarchy = build_hierarchy(
                    cfg["hierarchy"], cfg.get("instances_per_class", 5))
                program = build_domain_program(hierarchy, layout.room_names[:4])
            obs = ObservationConfig(**cfg.get("observation", {}))
            human = HumanModel(**cfg.get("human", {}))
            merge = cfg.get("merge", {})
            strategy = MergeStrategy(merge.get("strategy", "bayesian"))
            return cls(
                name=cfg.get("name", "scenario"),
                layout=layout,
                program=program,
                observation=obs,
                thresholds=cfg.get("thresholds", {}),
                time_limit=cfg.get("time_limit", 100),
                human=human,
                merge_strategy=strategy,
                merge_trust=merge.get("trust", 0.5),
                accessible=cfg.get("accessible"),
                travel_cost=cfg.get("travel_cost", False),
                raw=cfg,
            )
        except (KeyError, TypeError, ValueError) as err:
            raise WorldError(f"bad scenario config: {err}") from err

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        try:
            cfg = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as err:
            raise WorldError(f"cannot read scenario {path}: {err}") from err
        if not isinstance(cfg, dict):
            raise WorldError(f"scenario {path} is not a mapping")
        return cls.from_dict(cfg, base_dir=path.parent)


def default_scenario() -> "Scenario":
    base = resources.files("objsearch") / "data"
    cfg = yaml.safe_load((base / "office.yaml").read_text(encoding="utf-8"))
    return Scenario.from_dict(cfg, base_dir=Path(str(base)))


@dataclass(frozen=True)
class World:
    """Ground truth for one trial."""

    placements: dict
    target: str
    target_class: str
    present: bool
    branch_rooms: dict
    leaf_rooms: dict

    def true_cell(self) -> int:
        if self.target not in self.placements:
            raise WorldError("absent target has no cell")
        return self.placements[self.target]


def generate_world(scenario: Scenario, rng, present: bool = True,
                   target: str | None = None) -> World:
    """Place all objects branch-by-branch into permuted rooms.

    Class-room affinity is strict: every class of a branch shares that
    branch's room. Full location knowledge then always pins the target
    room, since the target's own class plus its co-located siblings
    outweigh any cross-branch evidence.
    """
    h = scenario.hierarchy
    layout = scenario.layout
    branches = h.children(h.root)
    if len(branches) != 4:
        raise WorldError("world generator expects four top-level branches")
    perm = rng.permutation(4)
    branch_rooms = {b: int(perm[i]) for i, b in enumerate(branches)}
    leaf_rooms = {leaf: branch_rooms[b] for b in branches for leaf in h.children(b)}
    placements = {}
    for branch in branches:
        free = [int(c) for c in layout.cells_of(branch_rooms[branch])]
        for leaf in h.children(branch):
            for obj in h.instances.get(leaf, ()):
                if not free:
                    raise WorldError(f"room {branch_rooms[branch]} ran out of cells")
                placements[obj] = free.pop(int(rng.integers(len(free))))
    objects = sorted(placements)
    if target is None:
        target = objects[int(rng.integers(len(objects)))]
    elif target not in placements:
        raise WorldError(f"unknown target object {target}")
    if not present:
        placements.pop(target)
    return World(placements, target, h.class_of(target), present, branch_rooms,
                 leaf_rooms)


def knowledge_order(world: World, scenario: Scenario, rng) -> list:
    """All non-target location pairs in a fixed random order.

    Percent subsets are prefixes of this list, so more knowledge always
    contains less.
    """
    layout = scenario.layout
    others = sorted(o for o in world.placements if o != world.target)
    order = rng.permutation(len(others))
    return [(others[i], layout.room_of(world.placements[others[i]])) for i in order]


def knowledge_subset(world: World, scenario: Scenario, percent: float, rng) -> list:
    if not 0.0 <= percent <= 100.0:
        raise WorldError("knowledge percent must be in [0, 100]")
    pairs = knowledge_order(world, scenario, rng)
    take = int(round(percent / 100.0 * len(pairs)))
    return [location_fact(obj, room, 1) for obj, room in pairs[:take]]


def sample_observation(world: World, action: int, model: GridModel, rng) -> bool:
    if world.present:
        p = model.detection[action, world.true_cell()]
    else:
        p = model.config.epsilon
    return bool(rng.random() < p)


# -- priors from the knowledge base -----------------------------------

def room_class_counts(kb: KnowledgeBase, scenario: Scenario, step: int = 2) -> list:
    """Per-room counts of located instances per primary class.

    A room where a primary class is known to exist without any located
    instance still counts one.
    """
    h = scenario.hierarchy
    layout = scenario.layout
    leaf_of = {obj: cls for cls, objs in h.instances.items() for obj in objs}
    primaries = set(h.primaries())
    counts = [dict() for _ in range(4)]
    exists = []
    for atom in kb.answer_set().positive:
        if atom.name != "holds" or len(atom.args) != 2:
            continue
        when = atom.args[1]
        if not isinstance(when, Number) or when.value != step:
            continue
        inner = atom.args[0]
        if inner.name == "in":
            cls = leaf_of.get(inner.args[0].name)
            if cls is not None:
                k = layout.room_id(inner.args[1].name)
                counts[k][cls] = counts[k].get(cls, 0) + 1
        elif inner.name == "exists":
            exists.append((inner.args[0].name, inner.args[1].name))
    for cls, room in exists:
        if cls in primaries:
            k = layout.room_id(room)
            counts[k].setdefault(cls, 1)
    return counts


def prior_alpha(kb: KnowledgeBase, scenario: Scenario, target_class: str) -> np.ndarray:
    return alpha_vector(target_class, room_class_counts(kb, scenario),
                        scenario.hierarchy)


def initial_belief(layout: RoomLayout) -> np.ndarray:
    """Uniform over room cells; the hallway never holds objects."""
    b = np.where(layout.room_cells, 1.0, 0.0)
    return b / b.sum()


def merge_belief(strategy: MergeStrategy, belief, alpha, layout: RoomLayout,
                 trust: float = 0.5) -> np.ndarray:
    """One room-level merge of the KB prior into the cell belief.

    The hallway is carried as a fifth room with zero prior mass, which
    keeps it empty through every strategy.
    """
    if strategy is MergeStrategy.NONE:
        return np.asarray(belief, dtype=float)
    prior = np.append(np.asarray(alpha, dtype=float), 0.0)
    prior /= prior.sum()
    marginals = room_marginals(belief, layout.room_ids, 5)
    if strategy is MergeStrategy.BAYESIAN:
        merged = bayesian_merge(prior, marginals)
    elif strategy is MergeStrategy.TRUST_FACTOR:
        merged = weighted_average_merge(prior, marginals, trust)
    elif strategy is MergeStrategy.DIRICHLET_WEIGHT:
        rooms = marginals[:4]
        total = rooms.sum()
        if total > 0.0:
            x = np.clip(rooms / total, 1e-12, None)
            density = dirichlet_pdf(alpha, x / x.sum())
        else:
            density = 0.0
        merged = weighted_average_merge(prior, marginals, density / (1.0 + density))
    else:
        raise WorldError(f"unknown merge strategy {strategy}")
    return redistribute(belief, merged, layout.room_ids)


# -- trials -----------------------------------------------------------

@dataclass(frozen=True)
class TrialConfig:
    """Per-trial knobs; None fields fall back to the scenario."""

    percent: float = 100.0
    merge: MergeStrategy = MergeStrategy.BAYESIAN
    trust: float = 0.5
    human: bool = True
    tracking: bool = False
    present: bool = True
    gate: float | None = None
    time_limit: int | None = None
    temperature: float | None = None
    drip_every: int = 0
    drip_count: int = 0
    accessible: tuple | None = None


@dataclass
class TrialResult:
    outcome: str
    error: float | None
    elapsed: int
    steps: int
    queries: int
    seed: str
    present: bool
    target_class: str
    true_room: str | None
    declared_room: str | None
    correct: bool
    top2: bool | None
    p_not_final: float | None
    kb_facts: int


def _strict_correct(outcome: str, present: bool, declared_room, true_room) -> bool:
    if present:
        return outcome == "localized" and declared_room == true_room
    return outcome == "declared_absent"


def _trial_rngs(base_seed: int, index: int):
    ss = np.random.SeedSequence([base_seed, index])
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))


def _accessible_mask(layout: RoomLayout, accessible) -> np.ndarray | None:
    if all(accessible):
        return None
    flags = np.asarray(accessible, dtype=bool)
    return flags[layout.room_ids]


def run_trial(scenario: Scenario, tc: TrialConfig, base_seed: int, index: int,
              log: list | None = None) -> TrialResult:
    """Simulate one search trial; a pure function of its arguments."""
    world_rng, know_rng, rng = _trial_rngs(base_seed, index)
    world = generate_world(scenario, world_rng, present=tc.present)
    layout, model = scenario.layout, scenario.model
    target = world.target

    kb = KnowledgeBase(scenario.program, signature=SIGNATURE, tie_break="newest",
                       ground_program=scenario.ground_program)
    pairs = knowledge_order(world, scenario, know_rng)
    take = int(round(tc.percent / 100.0 * len(pairs)))
    kb.assert_many([(location_fact(o, r, 1), "initial") for o, r in pairs[:take]])
    drip_queue = pairs[take:]

    belief = initial_belief(layout)
    alpha = prior_alpha(kb, scenario, world.target_class)
    if tc.merge is not MergeStrategy.NONE:
        belief = merge_belief(tc.merge, belief, alpha, layout, tc.trust)
    merged_version = kb.version

    tracker = None
    if tc.tracking:
        a0, b0 = beta_init(alpha)
        p0 = domain_nonexistence(beta_existence(a0, b0))
        tracker = ExistenceTracker(p0, theta=scenario.theta_absent)

    gate = scenario.entropy_gate if tc.gate is None else tc.gate
    limit = scenario.time_limit if tc.time_limit is None else tc.time_limit
    allowed = _accessible_mask(layout, tc.accessible or scenario.accessible)
    true_room = layout.room_of(world.true_cell()) if world.present else None

    elapsed = steps = queries = 0
    prev_cell = None
    outcome = "timeout"
    while elapsed < limit:
        action = model.select_action(
            belief, rng=rng if tc.temperature is not None else None,
            temperature=tc.temperature, allowed=allowed)
        steps += 1
        if scenario.travel_cost and prev_cell is not None:
            dist = np.abs(layout.coords[action] - layout.coords[prev_cell]).sum()
            elapsed += max(1, int(dist))
        else:
            elapsed += 1
        prev_cell = action

        z = sample_observation(world, action, model, rng)
        pre = belief
        belief = model.belief_update(belief, action, z)
        if tracker is not None:
            if z:
                tracker.positive(action, model, pre)
            else:
                tracker.negative(action, pre, belief, model.fov_states(action))

        if z and belief.max() >= scenario.assert_threshold:
            cell = int(np.argmax(belief))
            if layout.room_ids[cell] != layout.hallway_id:
                kb.assert_fact(location_fact(target, layout.room_of(cell), 2),
                               "sensor-high", confidence=float(belief.max()))

        queried = False
        if tc.human and rng.random() < scenario.human.appear:
            if entropy(belief) > gate:
                queried = True
                queries += 1
                elapsed += 2
                draw = rng.random()
                if world.present and draw < scenario.human.correct:
                    kb.assert_fact(location_fact(target, true_room, 2), "human")
                elif world.present and draw < scenario.human.correct + scenario.human.incorrect:
                    others = [n for n in layout.room_names[:4] if n != true_room]
                    kb.assert_fact(
                        location_fact(target, others[int(rng.integers(3))], 2),
                        "human")
                # an absent target or an unlucky draw means "don't know"

        if tc.drip_every and drip_queue and steps % tc.drip_every == 0:
            batch = drip_queue[:tc.drip_count]
            drip_queue = drip_queue[tc.drip_count:]
            kb.assert_many(
                [(location_fact(o, r, 2), "sensor-high") for o, r in batch])

        if tc.merge is not MergeStrategy.NONE and kb.version != merged_version:
            alpha = prior_alpha(kb, scenario, world.target_class)
            belief = merge_belief(tc.merge, belief, alpha, layout, tc.trust)
            merged_version = kb.version

        if log is not None:
            log.append({
                "trial": index,
                "step": steps,
                "time": elapsed,
                "action_cell": action,
                "obs": int(z),
                "max_belief": float(belief.max()),
                "belief_entropy": entropy(belief),
                "p_not_exist": tracker.p_not_exist if tracker else "",
                "queried": int(queried),
                "kb_facts": kb.fact_count(),
            })

        if tracker is not None and tracker.should_stop():
            outcome = "declared_absent"
            break
        if belief.max() >= scenario.localize_threshold:
            outcome = "localized"
            break

    declared_room = None
    error = None
    if outcome in ("localized", "timeout"):
        # timeouts still report their best guess so error CDFs see the
        # whole distribution, but they never count as correct
        cell = int(np.argmax(belief))
        declared_room = layout.room_of(cell)
        if world.present:
            delta = layout.coords[cell] - layout.coords[world.true_cell()]
            error = float(math.hypot(*delta))
    kb.answer_set()  # trials must end with a consistent KB
    return TrialResult(
        outcome=outcome,
        error=error,
        elapsed=elapsed,
        steps=steps,
        queries=queries,
        seed=f"{base_seed}:{index}",
        present=world.present,
        target_class=world.target_class,
        true_room=true_room,
        declared_room=declared_room,
        correct=_strict_correct(outcome, world.present, declared_room, true_room),
        top2=None,
        p_not_final=tracker.p_not_exist if tracker else None,
        kb_facts=kb.fact_count(),
    )


def run_asp_trial(scenario: Scenario, tc: TrialConfig, base_seed: int,
                  index: int) -> TrialResult:
    """Room inference from the KB prior alone, no search."""
    world_rng, know_rng, _ = _trial_rngs(base_seed, index)
    world = generate_world(scenario, world_rng, present=True)
    layout = scenario.layout
    kb = KnowledgeBase(scenario.program, signature=SIGNATURE, tie_break="newest",
                       ground_program=scenario.ground_program)
    pairs = knowledge_order(world, scenario, know_rng)
    take = int(round(tc.percent / 100.0 * len(pairs)))
    kb.assert_many([(location_fact(o, r, 1), "initial") for o, r in pairs[:take]])
    alpha = prior_alpha(kb, scenario, world.target_class)
    ranked = np.argsort(-alpha, kind="stable")
    true_id = layout.room_ids[world.true_cell()]
    declared = layout.room_names[int(ranked[0])]
    return TrialResult(
        outcome="inferred",
        error=None,
        elapsed=0,
        steps=0,
        queries=0,
        seed=f"{base_seed}:{index}",
        present=True,
        target_class=world.target_class,
        true_room=layout.room_names[true_id],
        declared_room=declared,
        correct=bool(ranked[0] == true_id),
        top2=bool(true_id in ranked[:2]),
        p_not_final=None,
        kb_facts=kb.fact_count(),
    )
