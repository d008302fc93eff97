"""Newick serialization for ultrametric trees.

Branch lengths carry node-time differences, so every leaf sits at depth
equal to the root time; decoding rejects inputs whose leaves end up at
unequal depths.  Multifurcations decode as chains of merges at the shared
time (ties are permitted exactly when they do not break ultrametricity).
"""

from __future__ import annotations

from .trees import UltrametricTree

_DEPTH_TOL = 1e-9


class NewickError(ValueError):
    """Malformed Newick input; ``position`` is the offending offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


def _fmt(x: float) -> str:
    return repr(float(x))


def newick_encode(tree: UltrametricTree) -> str:
    if tree.n_leaves == 1:
        return f"{tree.leaf_labels[0]};"
    time = {x: 0.0 for x in tree.leaf_labels}
    children: dict = {}
    for t, a, b, node in tree.merges:
        time[node] = t
        children[node] = (a, b)
    root = tree.merges[-1][3]

    # explicit stack; sampled trees can be deep (caterpillar topologies)
    out: list[str] = []
    stack: list[tuple] = [("node", root, None)]
    while stack:
        op, payload, parent = stack.pop()
        if op == "text":
            out.append(payload)
            continue
        node = payload
        suffix = "" if parent is None else f":{_fmt(time[parent] - time[node])}"
        if node in children:
            a, b = children[node]
            out.append("(")
            stack.append(("text", f"){suffix}", None))
            stack.append(("node", b, node))
            stack.append(("text", ",", None))
            stack.append(("node", a, node))
        else:
            out.append(f"{node}{suffix}")
    out.append(";")
    return "".join(out)


def newick_decode(text: str) -> UltrametricTree:
    """Parse Newick text into an ultrametric tree.

    Labels consisting only of digits become integers so that encoded trees
    round-trip their integer leaf labels.
    """
    s = text.strip()
    if not s.endswith(";"):
        raise NewickError("missing trailing ';'", len(text))
    s = s[:-1]
    pos = 0

    def read_label():
        nonlocal pos
        start = pos
        while pos < len(s) and s[pos] not in "():,;":
            pos += 1
        raw = s[start:pos]
        if not raw:
            return None
        return int(raw) if raw.isdigit() else raw

    def read_length():
        nonlocal pos
        if pos < len(s) and s[pos] == ":":
            pos += 1
            start = pos
            while pos < len(s) and s[pos] not in "():,;":
                pos += 1
            try:
                value = float(s[start:pos])
            except ValueError:
                raise NewickError("malformed branch length", start) from None
            if value < 0:
                raise NewickError("negative branch length", start)
            return value
        return None

    def parse_clade():
        nonlocal pos
        if pos < len(s) and s[pos] == "(":
            start = pos
            pos += 1
            children = []
            while True:
                children.append(parse_clade())
                if pos >= len(s):
                    raise NewickError("unbalanced '('", start)
                if s[pos] == ",":
                    pos += 1
                    continue
                if s[pos] == ")":
                    pos += 1
                    break
                raise NewickError(f"unexpected character {s[pos]!r}", pos)
            read_label()  # internal labels are accepted and ignored
            length = read_length()
            return ("internal", children, length)
        label_pos = pos
        label = read_label()
        if label is None:
            raise NewickError("expected a leaf label", label_pos)
        length = read_length()
        return ("leaf", label, label_pos, length)

    root = parse_clade()
    if pos != len(s):
        raise NewickError(f"unexpected trailing text {s[pos:]!r}", pos)

    leaves: list[tuple] = []  # (label, depth, source position)

    def resolve(spec, depth):
        if spec[0] == "leaf":
            _, label, label_pos, length = spec
            d = depth + (length or 0.0)
            leaves.append((label, d, label_pos))
            return ("leaf", label)
        _, children, length = spec
        d = depth + (length or 0.0)
        return ("internal", [resolve(c, d) for c in children], d)

    shaped = resolve(root, 0.0)
    if not leaves:
        raise NewickError("empty tree", 0)
    seen = set()
    for label, _, label_pos in leaves:
        if label in seen:
            raise NewickError(f"duplicate leaf label {label!r}", label_pos)
        seen.add(label)
    depth0 = leaves[0][1]
    for label, depth, label_pos in leaves:
        if abs(depth - depth0) > _DEPTH_TOL:
            raise NewickError(
                f"leaf {label!r} at depth {depth} breaks ultrametricity "
                f"(expected {depth0})",
                label_pos,
            )

    merges: list[tuple] = []
    counter = [0]

    def build(node):
        # returns the lineage id of the subtree; appends merges bottom-up
        if node[0] == "leaf":
            return node[1]
        _, children, node_depth = node
        t = depth0 - node_depth
        parts = [build(c) for c in children]
        if len(parts) == 1:
            return parts[0]  # unary node: collapse
        current = parts[0]
        for other in parts[1:]:
            counter[0] += 1
            node_id = ("n", counter[0])
            merges.append((max(t, 0.0), current, other, node_id))
            current = node_id
        return current

    build(shaped)
    # children always carry smaller times than their parent, and build()
    # appends child merges first, so a stable sort keeps references valid
    merges.sort(key=lambda m: m[0])
    tree = UltrametricTree(tuple(l for l, _, _ in leaves), tuple(merges))
    tree.validate(strictly_increasing=False)
    return tree
