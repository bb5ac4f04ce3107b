"""Tick-based behavior tree nodes.

A traversal starts at the root and returns one of SUCCESS, FAILURE or
RUNNING.  Leaf actions are looked up by name on the plant bound to the tick
context, so trees are plain data and can round-trip through JSON.
"""

from __future__ import annotations

import enum
import json
from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

from .. import expr as exprlang


class Status(str, enum.Enum):
    SUCCESS = "SUCCESS"
    FAILURE = "FAILURE"
    RUNNING = "RUNNING"


class MalformedTree(ValueError):
    pass


class Blackboard(Mapping):
    """Global key/value store shared by all nodes.

    Values are floats or booleans.  Every write is logged with the tick at
    which it happened.
    """

    def __init__(self, initial: Mapping[str, Any] | None = None) -> None:
        self._data: dict[str, exprlang.Value] = {}
        self.write_log: list[tuple[int, str, exprlang.Value]] = []
        self.tick = 0
        for k, v in (initial or {}).items():
            self.set(k, v)

    def __getitem__(self, key: str) -> exprlang.Value:
        try:
            return self._data[key]
        except KeyError:
            raise exprlang.UnknownKey(key) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def set(self, key: str, value: Any) -> None:
        if isinstance(value, bool):
            v: exprlang.Value = value
        elif isinstance(value, (int, float)):
            v = float(value)
        else:
            raise TypeError(f"blackboard values must be numbers or booleans, got {type(value).__name__}")
        self._data[key] = v
        self.write_log.append((self.tick, key, v))

    def snapshot(self) -> dict[str, exprlang.Value]:
        return dict(self._data)


@dataclass
class TickContext:
    blackboard: Blackboard
    plant: Any = None
    tick: int = 0
    mailbox: list[tuple[str, Any]] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    trace: list[str] | None = None

    def enter(self, node: Node) -> None:
        if self.trace is not None:
            self.trace.append(f"{self.tick} enter {node.path}")

    def exit(self, node: Node, status: Status) -> None:
        if self.trace is not None:
            self.trace.append(f"{self.tick} exit {node.path} {status.value}")

    def post(self, kind: str, payload: Any = None) -> None:
        self.mailbox.append((kind, payload))

    def drain(self) -> list[tuple[str, Any]]:
        msgs, self.mailbox = self.mailbox, []
        return msgs


class Node:
    kind = "Node"

    def __init__(self, name: str | None = None, children: list[Node] | None = None) -> None:
        self.name = name or self.kind
        self.children: list[Node] = list(children or [])
        self.status: Status | None = None
        self.path = self.name

    def tick(self, ctx: TickContext) -> Status:
        ctx.enter(self)
        status = self.update(ctx)
        self.status = status
        ctx.exit(self, status)
        return status

    def update(self, ctx: TickContext) -> Status:
        raise NotImplementedError

    def halt(self) -> None:
        """Abort whatever the node is doing and reset to its initial state."""
        for child in self.children:
            child.halt()
        self.status = None

    def params(self) -> dict[str, Any]:
        return {}

    def walk(self) -> Iterator[Node]:
        yield self
        for child in self.children:
            yield from child.walk()


class Sequence(Node):
    kind = "Sequence"

    def __init__(self, children: list[Node], memory: bool = True, name: str | None = None) -> None:
        super().__init__(name, children)
        self.memory = memory
        self.current = 0

    def update(self, ctx: TickContext) -> Status:
        start = self.current if self.memory else 0
        for i in range(start, len(self.children)):
            status = self.children[i].tick(ctx)
            if status is Status.RUNNING:
                if not self.memory:
                    for later in self.children[i + 1:]:
                        later.halt()
                self.current = i
                return status
            if status is Status.FAILURE:
                self.halt()
                return status
        self.halt()
        return Status.SUCCESS

    def halt(self) -> None:
        super().halt()
        self.current = 0

    def params(self) -> dict[str, Any]:
        return {"memory": self.memory}


class Fallback(Node):
    kind = "Fallback"

    def __init__(self, children: list[Node], name: str | None = None) -> None:
        super().__init__(name, children)

    def update(self, ctx: TickContext) -> Status:
        for i, child in enumerate(self.children):
            status = child.tick(ctx)
            if status is not Status.FAILURE:
                for later in self.children[i + 1:]:
                    later.halt()
                return status
        self.halt()
        return Status.FAILURE


class Parallel(Node):
    """Ticks every child; the main child's status is the node's status."""

    kind = "Parallel"

    def __init__(
        self,
        children: list[Node],
        main_child: int = 0,
        halt_siblings: bool = True,
        name: str | None = None,
    ) -> None:
        super().__init__(name, children)
        if not 0 <= main_child < len(self.children):
            raise MalformedTree(f"main_child {main_child} out of range for {len(self.children)} children")
        self.main_child = main_child
        self.halt_siblings = halt_siblings

    def update(self, ctx: TickContext) -> Status:
        statuses = [child.tick(ctx) for child in self.children]
        status = statuses[self.main_child]
        if status is not Status.RUNNING and self.halt_siblings:
            for i, child in enumerate(self.children):
                if i != self.main_child:
                    child.halt()
        return status

    def params(self) -> dict[str, Any]:
        return {"main_child": self.main_child, "halt_siblings": self.halt_siblings}


class Retry(Node):
    """Restart the child after each failure, up to ``limit`` failures in total."""

    kind = "Retry"

    def __init__(self, child: Node, limit: int, name: str | None = None) -> None:
        super().__init__(name, [child])
        if limit < 1:
            raise MalformedTree("Retry limit must be >= 1")
        self.limit = limit
        self.failures = 0

    def update(self, ctx: TickContext) -> Status:
        child = self.children[0]
        while True:
            status = child.tick(ctx)
            if status is Status.RUNNING:
                return status
            if status is Status.SUCCESS:
                self.failures = 0
                return status
            self.failures += 1
            child.halt()
            if self.failures >= self.limit:
                self.failures = 0
                return Status.FAILURE

    def halt(self) -> None:
        super().halt()
        self.failures = 0

    def params(self) -> dict[str, Any]:
        return {"limit": self.limit}


class AlwaysSuccess(Node):
    kind = "AlwaysSuccess"

    def __init__(self, child: Node, name: str | None = None) -> None:
        super().__init__(name, [child])

    def update(self, ctx: TickContext) -> Status:
        status = self.children[0].tick(ctx)
        return Status.RUNNING if status is Status.RUNNING else Status.SUCCESS


class Condition(Node):
    kind = "Condition"

    def __init__(self, expression: str, name: str | None = None) -> None:
        super().__init__(name)
        self.source = expression
        self.expr = exprlang.parse(expression)

    def update(self, ctx: TickContext) -> Status:
        try:
            value = exprlang.evaluate(self.expr, ctx.blackboard)
        except exprlang.ExprError as exc:
            ctx.diagnostics.append(f"tick {ctx.tick}: {self.path}: {exc}")
            return Status.FAILURE
        if not isinstance(value, bool):
            ctx.diagnostics.append(f"tick {ctx.tick}: {self.path}: condition evaluated to a number")
            return Status.FAILURE
        return Status.SUCCESS if value else Status.FAILURE

    def params(self) -> dict[str, Any]:
        return {"expr": self.source}


class Expression(Node):
    """Evaluate an expression and store the result on the blackboard."""

    kind = "Expression"

    def __init__(self, target_key: str, expression: str, name: str | None = None) -> None:
        super().__init__(name)
        self.target_key = target_key
        self.source = expression
        self.expr = exprlang.parse(expression)

    def update(self, ctx: TickContext) -> Status:
        try:
            value = exprlang.evaluate(self.expr, ctx.blackboard)
        except exprlang.ExprError as exc:
            ctx.diagnostics.append(f"tick {ctx.tick}: {self.path}: {exc}")
            return Status.FAILURE
        ctx.blackboard.set(self.target_key, value)
        return Status.SUCCESS

    def params(self) -> dict[str, Any]:
        return {"target": self.target_key, "expr": self.source}


ActionFn = Callable[[TickContext, dict], Status]


class Action(Node):
    """Leaf bound by name to a plant action.

    The plant action receives the tick context and a per-activation scratch
    dict that is cleared when the node is halted or completes.
    """

    kind = "Action"

    def __init__(self, action: str, name: str | None = None) -> None:
        super().__init__(name or action)
        self.action = action
        self.state: dict[str, Any] = {}

    def update(self, ctx: TickContext) -> Status:
        fn = _resolve_action(ctx.plant, self.action)
        status = fn(ctx, self.state)
        if status is not Status.RUNNING:
            self.state = {}
        return status

    def halt(self) -> None:
        super().halt()
        self.state = {}

    def params(self) -> dict[str, Any]:
        return {"action": self.action}


def _resolve_action(plant: Any, name: str) -> ActionFn:
    registry = getattr(plant, "actions", None)
    if registry is None or name not in registry:
        raise MalformedTree(f"plant has no action named {name!r}")
    return registry[name]


def assign_paths(root: Node) -> Node:
    """Give every node a slash-separated path, unique among siblings."""
    ids = [id(n) for n in root.walk()]
    if len(ids) != len(set(ids)):
        raise MalformedTree("tree contains a cycle or a shared node")

    def visit(node: Node, path: str) -> None:
        node.path = path
        seen: dict[str, int] = {}
        for child in node.children:
            n = seen.get(child.name, 0)
            seen[child.name] = n + 1
            visit(child, f"{path}/{child.name}" + (f"#{n}" if n else ""))

    visit(root, root.name)
    return root


# -- JSON -----------------------------------------------------------------


def tree_to_dict(node: Node) -> dict[str, Any]:
    doc: dict[str, Any] = {"type": node.kind, "name": node.name}
    doc.update(node.params())
    if node.children:
        doc["children"] = [tree_to_dict(c) for c in node.children]
    return doc


def tree_from_dict(doc: Mapping[str, Any]) -> Node:
    try:
        kind = doc["type"]
        name = doc.get("name")
        kids = [tree_from_dict(c) for c in doc.get("children", [])]
        if kind == "Sequence":
            node: Node = Sequence(kids, memory=bool(doc.get("memory", True)), name=name)
        elif kind == "Fallback":
            node = Fallback(kids, name=name)
        elif kind == "Parallel":
            node = Parallel(
                kids,
                main_child=int(doc.get("main_child", 0)),
                halt_siblings=bool(doc.get("halt_siblings", True)),
                name=name,
            )
        elif kind in ("Retry", "AlwaysSuccess"):
            if len(kids) != 1:
                raise MalformedTree(f"{kind} needs exactly one child")
            node = Retry(kids[0], int(doc["limit"]), name=name) if kind == "Retry" else AlwaysSuccess(kids[0], name=name)
        elif kind == "Condition":
            node = Condition(doc["expr"], name=name)
        elif kind == "Expression":
            node = Expression(doc["target"], doc["expr"], name=name)
        elif kind == "Action":
            node = Action(doc["action"], name=name)
        else:
            raise MalformedTree(f"unknown node type {kind!r}")
    except KeyError as exc:
        raise MalformedTree(f"missing field {exc.args[0]!r} in {dict(doc)!r}") from None
    except exprlang.ExprSyntaxError as exc:
        raise MalformedTree(f"bad expression in {doc.get('name')!r}: {exc}") from None
    return node


def load_tree(text: str) -> Node:
    return assign_paths(tree_from_dict(json.loads(text)))


def dump_tree(root: Node) -> str:
    return json.dumps(tree_to_dict(root), indent=2)
